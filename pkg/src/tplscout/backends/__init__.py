"""Pluggable LLM, search and fetch services in live, record and replay modes."""

from __future__ import annotations

import os
from pathlib import Path
from typing import Mapping

from tplscout.backends.base import (
    Backends,
    ChatRequest,
    ChatResponse,
    FetchResult,
    ResponseFormat,
)
from tplscout.backends.cassette import (
    Cassette,
    RecordingFetch,
    RecordingLlm,
    RecordingSearch,
    ReplayFetch,
    ReplayLlm,
    ReplaySearch,
)
from tplscout.errors import ConfigError

MODES = ("live", "record", "replay")

__all__ = [
    "Backends",
    "Cassette",
    "ChatRequest",
    "ChatResponse",
    "FetchResult",
    "MODES",
    "ResponseFormat",
    "build_backends",
    "replay_backends",
]


def replay_backends(cassette: Cassette) -> Backends:
    return Backends(ReplayLlm(cassette), ReplaySearch(cassette), ReplayFetch(cassette))


REQUIRED_ENV = ("LLM_API_KEY", "SEARCH_API_KEY")


def _require(env: Mapping[str, str]) -> list[str]:
    missing = [name for name in REQUIRED_ENV if not env.get(name, "").strip()]
    if missing:
        raise ConfigError(f"live backends need environment variable(s): {', '.join(missing)}")
    return [env[name].strip() for name in REQUIRED_ENV]


def _live(env: Mapping[str, str]) -> Backends:
    llm_key, search_key = _require(env)
    from tplscout.backends.live import (
        DEFAULT_LLM_API_BASE,
        DEFAULT_LLM_MODEL,
        DEFAULT_SEARCH_API_BASE,
        HttpFetcher,
        JsonApiSearch,
        OpenAIChat,
    )

    llm = OpenAIChat(llm_key, env.get("LLM_API_BASE") or DEFAULT_LLM_API_BASE, env.get("LLM_MODEL") or DEFAULT_LLM_MODEL)
    search = JsonApiSearch(search_key, env.get("SEARCH_API_BASE") or DEFAULT_SEARCH_API_BASE)
    fetch = HttpFetcher()
    return Backends(llm, search, fetch, closers=[llm.close, search.close, fetch.close])


def build_backends(mode: str, cassette_path: str | Path | None = None,
                   env: Mapping[str, str] | None = None) -> Backends:
    """Construct the service bundle for ``mode``.

    Replay never constructs a network client. Record wraps the live clients
    and writes the cassette when the bundle is closed.
    """
    env = os.environ if env is None else env
    if mode not in MODES:
        raise ConfigError(f"unknown backend mode {mode!r}; expected one of {', '.join(MODES)}")
    if mode == "replay":
        if cassette_path is None:
            raise ConfigError("--cassette is required with --backend replay")
        return replay_backends(Cassette.load(cassette_path))
    if mode == "live":
        return _live(env)
    if cassette_path is None:
        raise ConfigError("--cassette is required with --backend record")
    path = Path(cassette_path)
    cassette = Cassette.load(path) if path.exists() else Cassette()
    live = _live(env)
    return Backends(
        RecordingLlm(live.llm, cassette),
        RecordingSearch(live.search, cassette),
        RecordingFetch(live.fetch, cassette),
        closers=live.closers + [lambda: cassette.save(path)],
    )
