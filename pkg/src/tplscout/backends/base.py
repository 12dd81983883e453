"""Service contracts shared by live, recording and replaying backends."""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Protocol, TypeVar

from tplscout.model import FetchStatus, SearchHit

log = logging.getLogger(__name__)

T = TypeVar("T")

HITS_PER_PAGE = 10
DEFAULT_SEARCH_PAGES = 2
DEFAULT_FETCH_BYTE_CAP = 16384
FETCH_TIMEOUT_S = 15.0
MAX_CONCURRENT_FETCHES = 3
DEFAULT_RETRIES = 2


class ResponseFormat(str, Enum):
    FREE_TEXT = "FreeText"
    JSON_OBJECT = "JsonObject"


@dataclass(frozen=True)
class ChatRequest:
    session_id: str
    system_prompt: str
    messages: tuple[tuple[str, str], ...]
    temperature: float = 0.0
    response_format: ResponseFormat = ResponseFormat.JSON_OBJECT

    def __post_init__(self) -> None:
        object.__setattr__(self, "messages", tuple((r, c) for r, c in self.messages))
        object.__setattr__(self, "response_format", ResponseFormat(self.response_format))
        if not self.messages:
            raise ValueError("chat request needs at least one message")
        for role, _ in self.messages:
            if role not in ("user", "assistant"):
                raise ValueError(f"bad role {role!r}")

    def canonical(self) -> dict:
        # session_id is transport metadata; excluding it keeps digests stable across runs.
        return {
            "system_prompt": self.system_prompt,
            "messages": [list(m) for m in self.messages],
            "temperature": self.temperature,
            "response_format": self.response_format.value,
        }

    def preview(self) -> str:
        return _preview(self.messages[-1][1])


@dataclass(frozen=True)
class ChatResponse:
    content: str
    prompt_tokens: int = 0
    completion_tokens: int = 0

    def __post_init__(self) -> None:
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("token counts must be non-negative")

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens


@dataclass(frozen=True)
class FetchResult:
    status: FetchStatus
    text: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "status", FetchStatus(self.status))
        if self.status is FetchStatus.FETCHED and self.text is None:
            raise ValueError("fetched result requires text")


class LlmBackend(Protocol):
    def chat(self, req: ChatRequest) -> ChatResponse: ...


class SearchBackend(Protocol):
    def search(self, query: str, pages: int = DEFAULT_SEARCH_PAGES) -> list[SearchHit]: ...


class FetchBackend(Protocol):
    def fetch_text(self, url: str) -> FetchResult: ...


@dataclass
class Backends:
    llm: LlmBackend
    search: SearchBackend
    fetch: FetchBackend
    closers: list[Callable[[], None]] = field(default_factory=list)

    def close(self) -> None:
        for close in self.closers:
            close()


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def digest(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def _preview(text: str, limit: int = 160) -> str:
    flat = " ".join(text.split())
    return flat if len(flat) <= limit else flat[: limit - 3] + "..."


def search_request(query: str, pages: int) -> dict:
    return {"query": query, "pages": pages}


def fetch_request(url: str) -> dict:
    return {"url": url}


def hit_to_json(hit: SearchHit) -> dict:
    return {
        "title": hit.title,
        "snippet": hit.snippet,
        "url": hit.url,
        "page_index": hit.page_index,
        "rank_on_page": hit.rank_on_page,
    }


def hit_from_json(data: dict) -> SearchHit:
    return SearchHit(
        title=data["title"],
        snippet=data["snippet"],
        url=data["url"],
        page_index=data["page_index"],
        rank_on_page=data["rank_on_page"],
    )


class TransientError(Exception):
    """Raised by live clients for failures worth retrying."""


def with_retries(fn: Callable[[], T], *, retries: int = DEFAULT_RETRIES, base_delay: float = 0.5,
                 sleep: Callable[[float], None] = time.sleep, what: str = "request") -> T:
    """Call ``fn``, retrying TransientError with exponential backoff; re-raise the last failure."""
    attempt = 0
    while True:
        try:
            return fn()
        except TransientError:
            if attempt >= retries:
                raise
            delay = base_delay * (2 ** attempt)
            log.warning("%s failed (attempt %d/%d), retrying in %.1fs", what, attempt + 1, retries + 1, delay)
            sleep(delay)
            attempt += 1
