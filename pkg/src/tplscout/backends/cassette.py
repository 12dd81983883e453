"""Record and replay of external-service interactions.

A cassette is one JSON document (schema in docs/cassette.md). Lookups are by
``(channel, request_digest)`` where the digest is the SHA-256 of the
key-sorted canonical JSON of the request, so prompt edits invalidate
recordings.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from tplscout import __version__
from tplscout.backends.base import (
    DEFAULT_SEARCH_PAGES,
    ChatRequest,
    ChatResponse,
    FetchBackend,
    FetchResult,
    LlmBackend,
    SearchBackend,
    _preview,
    digest,
    fetch_request,
    hit_from_json,
    hit_to_json,
    search_request,
)
from tplscout.errors import ProviderError, ReplayMiss, SearchProviderError
from tplscout.model import FetchStatus, SearchHit

log = logging.getLogger(__name__)

SCHEMA = "tplscout-cassette/1"
CHANNELS = ("llm", "search", "fetch")


@dataclass(frozen=True)
class Interaction:
    channel: str
    request_digest: str
    request_preview: str
    response: dict

    def to_json(self) -> dict:
        return {
            "channel": self.channel,
            "request_digest": self.request_digest,
            "request_preview": self.request_preview,
            "response": self.response,
        }


class Cassette:
    """In-memory interaction store; appends are serialized through one lock."""

    def __init__(self, interactions=(), created_at: str | None = None, tool_version: str = __version__):
        self._lock = threading.Lock()
        self._index: dict[tuple[str, str], Interaction] = {}
        self.created_at = created_at or datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        self.tool_version = tool_version
        for item in interactions:
            self._put(item)

    def _put(self, item: Interaction) -> None:
        if item.channel not in CHANNELS:
            raise ValueError(f"unknown channel {item.channel!r}")
        self._index[(item.channel, item.request_digest)] = item

    def __len__(self) -> int:
        return len(self._index)

    def interactions(self) -> list[Interaction]:
        with self._lock:
            return sorted(self._index.values(), key=lambda i: (CHANNELS.index(i.channel), i.request_digest))

    def lookup(self, channel: str, request: dict, preview: str) -> dict:
        item = self._index.get((channel, digest(request)))
        if item is None:
            raise ReplayMiss(channel, preview)
        return item.response

    def get(self, channel: str, request_digest: str) -> Interaction | None:
        return self._index.get((channel, request_digest))

    def record(self, channel: str, request: dict, preview: str, response: dict) -> None:
        with self._lock:
            self._put(Interaction(channel, digest(request), preview, response))

    def merge(self, other: Cassette) -> None:
        for item in other.interactions():
            with self._lock:
                self._put(item)

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "metadata": {"created_at": self.created_at, "tool_version": self.tool_version},
            "interactions": [i.to_json() for i in self.interactions()],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, ensure_ascii=False, sort_keys=True) + "\n"

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())
        os.replace(tmp, path)

    @classmethod
    def from_json(cls, data: dict) -> Cassette:
        if not isinstance(data, dict) or data.get("schema") != SCHEMA:
            raise ValueError(f"unsupported cassette schema {data.get('schema')!r}")
        seen = set()
        items = []
        try:
            for raw in data["interactions"]:
                key = (raw["channel"], raw["request_digest"])
                if key in seen:
                    raise ValueError(f"duplicate cassette digest {key}")
                seen.add(key)
                items.append(Interaction(raw["channel"], raw["request_digest"], raw.get("request_preview", ""),
                                         raw["response"]))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed cassette interaction: {exc}") from None
        meta = data.get("metadata", {})
        return cls(items, created_at=meta.get("created_at"), tool_version=meta.get("tool_version", __version__))

    @classmethod
    def load(cls, path: str | Path) -> Cassette:
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def _error_payload(exc: Exception) -> dict:
    return {"error": {"type": type(exc).__name__, "message": str(exc)}}


def chat_response_to_json(resp: ChatResponse) -> dict:
    return {"content": resp.content, "prompt_tokens": resp.prompt_tokens, "completion_tokens": resp.completion_tokens}


class ReplayLlm:
    def __init__(self, cassette: Cassette):
        self.cassette = cassette

    def chat(self, req: ChatRequest) -> ChatResponse:
        data = self.cassette.lookup("llm", req.canonical(), req.preview())
        if "error" in data:
            raise ProviderError(data["error"]["message"])
        return ChatResponse(data["content"], data["prompt_tokens"], data["completion_tokens"])


class ReplaySearch:
    def __init__(self, cassette: Cassette):
        self.cassette = cassette

    def search(self, query: str, pages: int = DEFAULT_SEARCH_PAGES) -> list[SearchHit]:
        data = self.cassette.lookup("search", search_request(query, pages), _preview(f"{query} (pages={pages})"))
        if "error" in data:
            raise SearchProviderError(data["error"]["message"])
        return [hit_from_json(h) for h in data["hits"]]


class ReplayFetch:
    def __init__(self, cassette: Cassette):
        self.cassette = cassette

    def fetch_text(self, url: str) -> FetchResult:
        data = self.cassette.lookup("fetch", fetch_request(url), url)
        return FetchResult(FetchStatus(data["status"]), data.get("text"))


class RecordingLlm:
    def __init__(self, inner: LlmBackend, cassette: Cassette):
        self.inner = inner
        self.cassette = cassette

    def chat(self, req: ChatRequest) -> ChatResponse:
        try:
            resp = self.inner.chat(req)
        except ProviderError as exc:
            self.cassette.record("llm", req.canonical(), req.preview(), _error_payload(exc))
            raise
        self.cassette.record("llm", req.canonical(), req.preview(), chat_response_to_json(resp))
        return resp


class RecordingSearch:
    def __init__(self, inner: SearchBackend, cassette: Cassette):
        self.inner = inner
        self.cassette = cassette

    def search(self, query: str, pages: int = DEFAULT_SEARCH_PAGES) -> list[SearchHit]:
        request = search_request(query, pages)
        preview = _preview(f"{query} (pages={pages})")
        try:
            hits = self.inner.search(query, pages)
        except SearchProviderError as exc:
            self.cassette.record("search", request, preview, _error_payload(exc))
            raise
        self.cassette.record("search", request, preview, {"hits": [hit_to_json(h) for h in hits]})
        return hits


class RecordingFetch:
    def __init__(self, inner: FetchBackend, cassette: Cassette):
        self.inner = inner
        self.cassette = cassette

    def fetch_text(self, url: str) -> FetchResult:
        result = self.inner.fetch_text(url)
        self.cassette.record("fetch", fetch_request(url), url, {"status": result.status.value, "text": result.text})
        return result
