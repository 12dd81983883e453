"""A scripted, offline stand-in for the LLM provider, the search API and the web.

Scenario files (data/scenarios/*.json, schema in docs/fixtures.md)
describe what each service answers. The real live clients are pointed at
``httpx.MockTransport`` handlers built from the scenario, so recording a
cassette exercises exactly the code path a live run would.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import httpx

from tplscout.agents import agent_of
from tplscout.backends.base import HITS_PER_PAGE, Backends, ChatRequest
from tplscout.backends.live import HttpFetcher, JsonApiSearch, OpenAIChat
from tplscout.model import normalize_url

LLM_BASE = "https://llm.fixture.invalid/v1"
SEARCH_BASE = "https://search.fixture.invalid/customsearch/v1"

_NAME_RE = re.compile(r"^Name hint: (.*)$", re.MULTILINE)
_URL_RE = re.compile(r"^URL: (.*)$", re.MULTILINE)
_LISTED_URL_RE = re.compile(r"^\[\d+\] (\S+)$", re.MULTILINE)


def estimate_tokens(text: str) -> int:
    return math.ceil(len(text) / 4)


@dataclass
class Scenario:
    name: str
    kind: str
    input: str
    base_dir: Path
    libraries: dict = field(default_factory=dict)
    search: dict = field(default_factory=dict)
    pages: dict = field(default_factory=dict)
    summaries: dict = field(default_factory=dict)
    candidates: list = field(default_factory=list)
    so_strings: list = field(default_factory=list)
    so_seed: int = 0

    @classmethod
    def load(cls, path: str | Path) -> Scenario:
        path = Path(path)
        data = json.loads(path.read_text(encoding="utf-8"))
        return cls(
            name=data["name"],
            kind=data["kind"],
            input=data["input"],
            base_dir=path.parent.parent,
            libraries=data.get("libraries", {}),
            search=data.get("search", {}),
            pages={normalize_url(u): v for u, v in data.get("pages", {}).items()},
            summaries={normalize_url(u): v for u, v in data.get("summaries", {}).items()},
            candidates=data.get("candidates", []),
            so_strings=data.get("so_strings", []),
            so_seed=data.get("so_seed", 0),
        )

    @property
    def input_path(self) -> Path:
        return self.base_dir / self.input

    def page_html(self, url: str) -> str | None:
        page = self.pages.get(normalize_url(url))
        if page is None or page.get("status", 200) != 200:
            return None
        if "html_file" in page:
            return (self.base_dir / page["html_file"]).read_text(encoding="utf-8")
        return page["html"]


class ScriptedResponder:
    """Answers agent prompts according to the scenario's per-library script."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario

    def _library(self, text: str) -> dict:
        return self.scenario.libraries.get(self._library_name(text), {})

    def respond(self, req: ChatRequest) -> str:
        agent = agent_of(req)
        user = req.messages[0][1]
        handler = getattr(self, f"_{agent}", None)
        if handler is None:
            raise ValueError(f"unrecognized agent prompt: {req.system_prompt[:60]!r}")
        return json.dumps(handler(user), ensure_ascii=False)

    def _a0_select(self, user: str) -> dict:
        return {"candidates": self.scenario.candidates}

    def _a1_keywords(self, user: str) -> dict:
        lib = self._library(user)
        generations = lib.get("keywords") or [["library"]]
        has_feedback = "Feedback from the previous validation round" in user
        keywords = generations[min(1 if has_feedback else 0, len(generations) - 1)]
        return {"keywords": keywords, "rationale": lib.get("keyword_rationale", "Distinctive terms from the evidence.")}

    def _a2_summarize(self, user: str) -> dict:
        url = _URL_RE.search(user).group(1).strip()
        summary = self.scenario.summaries.get(normalize_url(url))
        if summary is None:
            text = user.split("Page text:\n", 1)[1]
            lines = [ln for ln in text.splitlines() if ln.strip()]
            summary = " ".join(lines[:2])[:300] or "Page without readable text."
        return {"summary": summary}

    def _a3_rank(self, user: str) -> dict:
        lib = self._library(user)
        urls = _LISTED_URL_RE.findall(user.split("\nPages:\n", 1)[1])
        by_norm = {normalize_url(u): u for u in urls}
        ranking = []
        rationales = lib.get("rank_rationale", {})
        for pref in lib.get("rank_first", []):
            key = normalize_url(pref)
            if key in by_norm:
                ranking.append({"url": by_norm.pop(key),
                                "rationale": rationales.get(pref, "Closest match to the evidence.")})
        if lib.get("rank_others"):
            name = self._library_name(user).lower()
            blocks = user.split("\nPages:\n", 1)[1].split("\n\n")
            for block in blocks:
                m = _LISTED_URL_RE.search(block)
                if m and normalize_url(m.group(1)) in by_norm and name in block.lower():
                    ranking.append({"url": m.group(1), "rationale": lib.get(
                        "other_rationale", "Mentions the library but is not its upstream source.")})
        return {"ranking": ranking, "vendor_hint": lib.get("vendor_hint"), "version_hint": lib.get("version_hint")}

    def _library_name(self, text: str) -> str:
        m = _NAME_RE.search(text)
        return m.group(1).strip() if m else ""

    def _a4_validate(self, user: str) -> dict:
        lib = self._library(user)
        listed = _LISTED_URL_RE.findall(user.split("\nCandidates:\n", 1)[1])
        accept = {normalize_url(u) for u in lib.get("accept", [])}
        if listed and normalize_url(listed[0]) in accept:
            return {"decision": "accept", "reasons": lib.get("accept_reasons", "The first candidate is the upstream source.")}
        return {"decision": "reject", "reasons": lib.get("reject_reasons", "The first candidate does not match the evidence."),
                "refined_keywords": lib.get("refined_keywords")}

    def _a5_aggregate(self, user: str) -> dict:
        lib = self._library(user)
        accepted = "Origin: none accepted" not in user
        return {"description": lib.get("description") if accepted else lib.get("exhausted_description"),
                "vendor": None, "version": None}


def _llm_handler(responder: ScriptedResponder):
    def handle(request: httpx.Request) -> httpx.Response:
        body = json.loads(request.content)
        msgs = body["messages"]
        req = ChatRequest(body.get("user", "fixture"), msgs[0]["content"],
                          tuple((m["role"], m["content"]) for m in msgs[1:]))
        content = responder.respond(req)
        prompt_tokens = estimate_tokens("".join(m["content"] for m in msgs))
        return httpx.Response(200, json={
            "choices": [{"message": {"role": "assistant", "content": content}}],
            "usage": {"prompt_tokens": prompt_tokens, "completion_tokens": estimate_tokens(content)},
        })
    return handle


def _search_handler(scenario: Scenario):
    def handle(request: httpx.Request) -> httpx.Response:
        query = request.url.params["q"]
        start = int(request.url.params.get("start", "1"))
        results = scenario.search.get(query, [])
        if results == "fail":
            return httpx.Response(503, text="search backend unavailable")
        page = results[start - 1:start - 1 + HITS_PER_PAGE]
        return httpx.Response(200, json={"items": [
            {"title": r["title"], "snippet": r.get("snippet", ""), "link": r["url"]} for r in page]})
    return handle


def _fetch_handler(scenario: Scenario):
    def handle(request: httpx.Request) -> httpx.Response:
        html = scenario.page_html(str(request.url))
        if html is None:
            return httpx.Response(404, text="Not Found", headers={"content-type": "text/html"})
        return httpx.Response(200, text=html, headers={"content-type": "text/html; charset=utf-8"})
    return handle


def scripted_backends(scenario: Scenario) -> Backends:
    """Live clients wired to mock transports; no real network is touched."""
    def no_sleep(_seconds: float) -> None:
        pass

    llm = OpenAIChat("fixture-key", LLM_BASE, "fixture-model", sleep=no_sleep,
                     client=httpx.Client(transport=httpx.MockTransport(_llm_handler(ScriptedResponder(scenario)))))
    search = JsonApiSearch("fixture-key", SEARCH_BASE, sleep=no_sleep,
                           client=httpx.Client(transport=httpx.MockTransport(_search_handler(scenario))))
    fetch = HttpFetcher(client=httpx.Client(transport=httpx.MockTransport(_fetch_handler(scenario)),
                                            follow_redirects=True))
    return Backends(llm, search, fetch, closers=[llm.close, search.close, fetch.close])

