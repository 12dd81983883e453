"""HTTP clients for the live services.

The chat client speaks the OpenAI-compatible ``/chat/completions`` protocol.
The search client speaks the Google Custom Search JSON API shape
(``items[].title/snippet/link``, ``start``/``num`` paging); any endpoint that
answers in that shape works. Extra fixed query parameters such as ``cx`` can
be put directly into ``SEARCH_API_BASE``.
"""

from __future__ import annotations

import logging
import time
from typing import Callable

import httpx

from tplscout.backends.base import (
    DEFAULT_FETCH_BYTE_CAP,
    DEFAULT_RETRIES,
    DEFAULT_SEARCH_PAGES,
    FETCH_TIMEOUT_S,
    HITS_PER_PAGE,
    ChatRequest,
    ChatResponse,
    FetchResult,
    ResponseFormat,
    TransientError,
    with_retries,
)
from tplscout.backends.htmltext import cap_text, content_kind, html_to_text
from tplscout.errors import MalformedUrl, ProviderError, SearchProviderError
from tplscout.model import FetchStatus, SearchHit, is_http_url

log = logging.getLogger(__name__)

DEFAULT_LLM_API_BASE = "https://api.openai.com/v1"
DEFAULT_LLM_MODEL = "gpt-4o"
DEFAULT_SEARCH_API_BASE = "https://www.googleapis.com/customsearch/v1"
USER_AGENT = "tplscout/0.1 (+https://pypi.org/project/tplscout)"

_RETRYABLE_STATUS = {408, 425, 429, 500, 502, 503, 504}


def _raise_for_status(resp: httpx.Response, error_cls: type[Exception]) -> None:
    if resp.status_code in _RETRYABLE_STATUS:
        raise TransientError(f"HTTP {resp.status_code}")
    if resp.status_code >= 400:
        raise error_cls(f"HTTP {resp.status_code}: {resp.text[:200]}")


class OpenAIChat:
    def __init__(self, api_key: str, api_base: str = DEFAULT_LLM_API_BASE, model: str = DEFAULT_LLM_MODEL, *,
                 client: httpx.Client | None = None, retries: int = DEFAULT_RETRIES,
                 sleep: Callable[[float], None] = time.sleep, timeout: float = 120.0):
        self.model = model
        self.url = api_base.rstrip("/") + "/chat/completions"
        self.retries = retries
        self.sleep = sleep
        self.client = client or httpx.Client(timeout=timeout)
        self.headers = {"Authorization": f"Bearer {api_key}"}

    def _once(self, payload: dict) -> ChatResponse:
        try:
            resp = self.client.post(self.url, json=payload, headers=self.headers)
        except httpx.TransportError as exc:
            raise TransientError(str(exc)) from exc
        _raise_for_status(resp, ProviderError)
        try:
            body = resp.json()
            content = body["choices"][0]["message"]["content"] or ""
            usage = body.get("usage") or {}
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"unexpected chat response: {exc}") from exc
        return ChatResponse(content, int(usage.get("prompt_tokens", 0)), int(usage.get("completion_tokens", 0)))

    def chat(self, req: ChatRequest) -> ChatResponse:
        payload = {
            "model": self.model,
            "temperature": req.temperature,
            "messages": [{"role": "system", "content": req.system_prompt}]
            + [{"role": role, "content": content} for role, content in req.messages],
            "user": req.session_id,
        }
        if req.response_format is ResponseFormat.JSON_OBJECT:
            payload["response_format"] = {"type": "json_object"}
        try:
            return with_retries(lambda: self._once(payload), retries=self.retries, sleep=self.sleep, what="chat")
        except TransientError as exc:
            raise ProviderError(f"chat failed after {self.retries} retries: {exc}") from exc

    def close(self) -> None:
        self.client.close()


class JsonApiSearch:
    def __init__(self, api_key: str, api_base: str = DEFAULT_SEARCH_API_BASE, *,
                 client: httpx.Client | None = None, retries: int = DEFAULT_RETRIES,
                 sleep: Callable[[float], None] = time.sleep, timeout: float = 30.0):
        self.api_key = api_key
        self.api_base = api_base
        self.retries = retries
        self.sleep = sleep
        self.client = client or httpx.Client(timeout=timeout)

    def _page(self, query: str, page_index: int) -> list[dict]:
        params = {"q": query, "key": self.api_key, "num": HITS_PER_PAGE,
                  "start": (page_index - 1) * HITS_PER_PAGE + 1}
        try:
            resp = self.client.get(self.api_base, params=params)
        except httpx.TransportError as exc:
            raise TransientError(str(exc)) from exc
        _raise_for_status(resp, SearchProviderError)
        try:
            return list(resp.json().get("items") or [])
        except ValueError as exc:
            raise SearchProviderError(f"unexpected search response: {exc}") from exc

    def search(self, query: str, pages: int = DEFAULT_SEARCH_PAGES) -> list[SearchHit]:
        if not query.strip():
            raise ValueError("empty search query")
        if pages < 1:
            raise ValueError("pages must be >= 1")
        hits: list[SearchHit] = []
        for page_index in range(1, pages + 1):
            try:
                items = with_retries(lambda: self._page(query, page_index), retries=self.retries,
                                     sleep=self.sleep, what="search")
            except TransientError as exc:
                raise SearchProviderError(f"search failed after {self.retries} retries: {exc}") from exc
            rank = 0
            for item in items[:HITS_PER_PAGE]:
                url = item.get("link", "")
                if not is_http_url(url):
                    continue
                rank += 1
                hits.append(SearchHit(item.get("title", ""), item.get("snippet", ""), url, page_index, rank))
            if len(items) < HITS_PER_PAGE:
                break
        return hits

    def close(self) -> None:
        self.client.close()


class HttpFetcher:
    """Single-page GET; every failure is reported as FetchFailed rather than raised."""

    def __init__(self, *, byte_cap: int = DEFAULT_FETCH_BYTE_CAP, client: httpx.Client | None = None,
                 timeout: float = FETCH_TIMEOUT_S):
        self.byte_cap = byte_cap
        self.client = client or httpx.Client(timeout=timeout, follow_redirects=True,
                                             headers={"User-Agent": USER_AGENT})

    def fetch_text(self, url: str) -> FetchResult:
        if not is_http_url(url):
            log.info("fetch skipped, not an http(s) URL: %s", url)
            return FetchResult(FetchStatus.FETCH_FAILED)
        try:
            resp = self.client.get(url)
        except (httpx.HTTPError, MalformedUrl) as exc:
            log.info("fetch failed for %s: %s", url, exc)
            return FetchResult(FetchStatus.FETCH_FAILED)
        if resp.status_code >= 400:
            log.info("fetch failed for %s: HTTP %d", url, resp.status_code)
            return FetchResult(FetchStatus.FETCH_FAILED)
        body = resp.text
        kind = content_kind(resp.headers.get("content-type"), body)
        if kind is None:
            log.info("fetch failed for %s: unsupported content type %s", url, resp.headers.get("content-type"))
            return FetchResult(FetchStatus.FETCH_FAILED)
        text = html_to_text(body) if kind == "html" else body.strip()
        if not text:
            log.info("fetch failed for %s: no readable text", url)
            return FetchResult(FetchStatus.FETCH_FAILED)
        return FetchResult(FetchStatus.FETCHED, cap_text(text, self.byte_cap))

    def close(self) -> None:
        self.client.close()
