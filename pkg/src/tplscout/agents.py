"""Prompt construction and reply parsing for the identification agents.

Every agent call opens a fresh chat session, asks for a JSON object, and
allows one repair round-trip when the reply does not validate:

* ``a0_select_candidates`` picks vendored libraries out of a tree listing.
* ``a1_keywords`` turns evidence (and validator feedback) into search keywords.
* ``a2_summarize_page`` summarizes one fetched search result.
* ``a3_rank_origins`` orders pages by how likely each is the upstream source.
* ``a4_validate`` independently checks the top candidates against the evidence.
* ``a5_aggregate`` writes the final description and hints.
"""

from __future__ import annotations

import json
import logging
import re
import threading
import uuid
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from string import Template
from typing import Callable, Generic, TypeVar

from tplscout.backends.base import ChatRequest, ChatResponse, FetchResult, ResponseFormat
from tplscout.errors import AgentParseError, BudgetExceeded, ProviderError
from tplscout.model import (
    MAX_KEYWORDS,
    Decision,
    Evidence,
    EvidenceKind,
    FetchStatus,
    KeywordSet,
    PageRecord,
    RankedEntry,
    RankedOrigins,
    SearchHit,
    SummarySource,
    ValidationVerdict,
    normalize_url,
)

log = logging.getLogger(__name__)

T = TypeVar("T")

AGENTS = ("a0_select", "a1_keywords", "a2_summarize", "a3_rank", "a4_validate", "a5_aggregate")
MAX_SUMMARY_CHARS = 600
UNPARSEABLE_VALIDATION = "unparseable validation"

# Evidence digest limits for the validator and aggregator prompts.
DIGEST_STRINGS = 40
DIGEST_EXCERPT_CHARS = 1500
PAGE_TEXT_CHARS = 12000


@dataclass(frozen=True)
class Prompt:
    system: str
    user: Template

    def render(self, **values) -> str:
        return self.user.substitute(**values).strip()


@lru_cache(maxsize=None)
def load_prompt(name: str) -> Prompt:
    text = resources.files("tplscout.prompts").joinpath(f"{name}.txt").read_text(encoding="utf-8")
    system, _, user = text.partition("=== user ===\n")
    return Prompt(system.strip(), Template(user))


def agent_of(req: ChatRequest) -> str | None:
    """Identify which agent issued ``req`` from its system prompt."""
    for name in AGENTS:
        if req.system_prompt == load_prompt(name).system:
            return name
    return None


@dataclass(frozen=True)
class CallRecord:
    agent: str
    session_id: str
    request: ChatRequest
    response: ChatResponse | None
    error: str | None = None


@dataclass
class AgentLlm:
    """Run-scoped view of an LLM backend.

    Hands out a fresh session id per agent call, logs every request and
    response, sums token usage and enforces an optional token budget.
    """

    backend: object
    run_id: str = field(default_factory=lambda: uuid.uuid4().hex[:12])
    token_budget: int | None = None
    calls: list[CallRecord] = field(default_factory=list)
    _counter: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def new_session(self, agent: str) -> str:
        with self._lock:
            self._counter += 1
            return f"{self.run_id}/{agent}/{self._counter:03d}"

    @property
    def token_usage(self) -> int:
        with self._lock:
            return sum(c.response.total_tokens for c in self.calls if c.response is not None)

    def chat(self, agent: str, req: ChatRequest) -> ChatResponse:
        try:
            resp = self.backend.chat(req)
        except ProviderError as exc:
            with self._lock:
                self.calls.append(CallRecord(agent, req.session_id, req, None, str(exc)))
            raise
        with self._lock:
            self.calls.append(CallRecord(agent, req.session_id, req, resp))
        if self.token_budget is not None and self.token_usage > self.token_budget:
            raise BudgetExceeded(f"token budget of {self.token_budget} exceeded")
        return resp


def tracked(llm) -> AgentLlm:
    return llm if isinstance(llm, AgentLlm) else AgentLlm(llm)


@dataclass(frozen=True)
class AgentReply(Generic[T]):
    parsed: T
    raw: str
    repair_used: bool = False


_FENCE_RE = re.compile(r"^```(?:json)?\s*|\s*```$", re.IGNORECASE)


def parse_json_object(raw: str) -> dict:
    text = _FENCE_RE.sub("", raw.strip())
    start, end = text.find("{"), text.rfind("}")
    if start < 0 or end <= start:
        raise ValueError("reply contains no JSON object")
    try:
        data = json.loads(text[start:end + 1])
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid JSON: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ValueError("reply is not a JSON object")
    return data


def ask(llm: AgentLlm, agent: str, user: str, validate: Callable[[dict], T],
        lenient: Callable[[dict], T] | None = None) -> AgentReply[T]:
    """One agent call with at most one repair round.

    ``validate`` raises ValueError on schema violations. After a failed
    repair, ``lenient`` (when given) salvages what it can from the second
    reply instead of failing.
    """
    prompt = load_prompt(agent)
    session = llm.new_session(agent)
    messages: list[tuple[str, str]] = [("user", user)]
    raw = llm.chat(agent, ChatRequest(session, prompt.system, tuple(messages))).content
    try:
        return AgentReply(validate(parse_json_object(raw)), raw)
    except ValueError as exc:
        first_error = str(exc)
    log.info("%s reply invalid (%s); requesting repair", agent, first_error)
    messages += [("assistant", raw), ("user", load_prompt("repair").render(error=first_error))]
    raw2 = llm.chat(agent, ChatRequest(session, prompt.system, tuple(messages))).content
    try:
        data = parse_json_object(raw2)
        return AgentReply(validate(data), raw2, repair_used=True)
    except ValueError as exc:
        if lenient is not None:
            try:
                return AgentReply(lenient(parse_json_object(raw2)), raw2, repair_used=True)
            except ValueError:
                pass
        raise AgentParseError(agent, f"reply still invalid after repair: {exc}", raw2) from None


def _opt_str(value) -> str | None:
    if value is None:
        return None
    if not isinstance(value, str):
        value = str(value)
    value = value.strip()
    return None if not value or value.lower() in ("null", "none", "unknown", "n/a") else value


def _str_list(value, what: str) -> list[str]:
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise ValueError(f"{what} must be a list of strings")
    return value


def clean_keywords(raw: list[str]) -> list[str]:
    out: list[str] = []
    seen: set[str] = set()
    for kw in raw:
        kw = " ".join(kw.split())
        if kw and kw.lower() not in seen:
            seen.add(kw.lower())
            out.append(kw)
    return out[:MAX_KEYWORDS]


# ---------------------------------------------------------------- evidence text

def render_evidence(evidence: Evidence, *, max_strings: int | None = None,
                    max_excerpt_chars: int | None = None, include_tree: bool = True) -> str:
    lines = [f"Name hint: {evidence.name_hint}"]
    if evidence.kind is EvidenceKind.ELF_SHARED_OBJECT:
        lines.append("Artifact: ELF shared object (native library)")
        strings = evidence.strings if max_strings is None else evidence.strings[:max_strings]
        if strings:
            lines.append(f"Readable strings ({len(strings)} of {len(evidence.strings)}):")
            lines.extend(strings)
        else:
            lines.append("Readable strings: none survived filtering")
    else:
        lines.append("Artifact: third-party source code vendored into a C/C++ project")
        if include_tree and evidence.tree_text:
            lines.append("Directory listing:")
            lines.append(evidence.tree_text)
        for ex in evidence.file_excerpts:
            content = ex.content if max_excerpt_chars is None else ex.content[:max_excerpt_chars]
            cut = ex.truncated or len(content) < len(ex.content)
            lines.append(f"--- {ex.path}{' (truncated)' if cut else ''} ---")
            lines.append(content)
        if not evidence.file_excerpts:
            lines.append("File excerpts: none readable")
    return "\n".join(lines)


def evidence_digest(evidence: Evidence) -> str:
    return render_evidence(evidence, max_strings=DIGEST_STRINGS, max_excerpt_chars=DIGEST_EXCERPT_CHARS,
                           include_tree=False)


# ---------------------------------------------------------------- a0

def _validate_candidates(data: dict) -> list[dict]:
    items = data.get("candidates")
    if not isinstance(items, list):
        raise ValueError("'candidates' must be a list")
    out = []
    for item in items:
        if not isinstance(item, dict):
            raise ValueError("each candidate must be an object")
        name = item.get("name")
        if not isinstance(name, str) or not name.strip():
            raise ValueError("each candidate needs a non-empty 'name'")
        files = _str_list(item.get("files"), "'files'")
        root = item.get("root") or ""
        if not isinstance(root, str):
            raise ValueError("'root' must be a string")
        out.append({"name": name.strip(), "root": root, "files": files,
                    "rationale": str(item.get("rationale") or "")})
    return out


def a0_select_candidates(tree_text: str, llm) -> AgentReply[list[dict]]:
    llm = tracked(llm)
    return ask(llm, "a0_select", load_prompt("a0_select").render(tree=tree_text), _validate_candidates)


# ---------------------------------------------------------------- a1

def _render_feedback(feedback: ValidationVerdict | None) -> str:
    if feedback is None:
        return ""
    lines = ["", "Feedback from the previous validation round:", f"Reasons: {feedback.reasons}"]
    if feedback.refined_keywords:
        lines.append("Suggested keywords: " + ", ".join(feedback.refined_keywords))
    return "\n".join(lines)


def a1_keywords(evidence: Evidence, feedback: ValidationVerdict | None, llm, *,
                previous: KeywordSet | None = None) -> KeywordSet:
    if evidence.empty and not evidence.name_hint.strip():
        raise ValueError("evidence is empty and has no name hint")
    llm = tracked(llm)

    def validate(data: dict) -> tuple[list[str], str]:
        keywords = clean_keywords(_str_list(data.get("keywords"), "'keywords'"))
        if not keywords:
            raise ValueError("'keywords' must contain at least one non-empty keyword")
        rationale = data.get("rationale") or ""
        return keywords, rationale if isinstance(rationale, str) else str(rationale)

    user = load_prompt("a1_keywords").render(evidence=render_evidence(evidence), feedback=_render_feedback(feedback))
    reply = ask(llm, "a1_keywords", user, validate)
    generation = 0 if feedback is None else (previous.generation + 1 if previous is not None else 1)
    keywords, rationale = reply.parsed
    return KeywordSet(tuple(keywords), rationale, generation)


# ---------------------------------------------------------------- a2

def _validate_summary(data: dict) -> str:
    summary = data.get("summary")
    if not isinstance(summary, str) or not summary.strip():
        raise ValueError("'summary' must be a non-empty string")
    summary = " ".join(summary.split())
    if len(summary) > MAX_SUMMARY_CHARS:
        cut = summary[:MAX_SUMMARY_CHARS - 3]
        summary = (cut.rsplit(" ", 1)[0] if " " in cut else cut) + "..."
    return summary


def snippet_record(hit: SearchHit, fetched: FetchResult) -> PageRecord:
    return PageRecord(hit, fetched.status, hit.snippet, SummarySource.SNIPPET_FALLBACK, fetched.text)


def a2_summarize_page(hit: SearchHit, fetched: FetchResult, llm) -> PageRecord:
    if fetched.status is not FetchStatus.FETCHED or not (fetched.text or "").strip():
        return snippet_record(hit, fetched)
    llm = tracked(llm)
    user = load_prompt("a2_summarize").render(title=hit.title, url=hit.url, text=fetched.text[:PAGE_TEXT_CHARS])
    try:
        reply = ask(llm, "a2_summarize", user, _validate_summary)
    except AgentParseError as exc:
        log.info("summary for %s unusable, using snippet: %s", hit.url, exc)
        return snippet_record(hit, fetched)
    return PageRecord(hit, FetchStatus.FETCHED, reply.parsed, SummarySource.LLM_SUMMARY, fetched.text)


# ---------------------------------------------------------------- a3

def render_pages(pages: list[PageRecord]) -> str:
    blocks = []
    for i, page in enumerate(pages, 1):
        blocks.append(f"[{i}] {page.url}\nTitle: {page.hit.title}\nSummary: {page.summary}")
    return "\n\n".join(blocks)


def _ranking(data: dict, pages: list[PageRecord], strict: bool) -> RankedOrigins:
    items = data.get("ranking")
    if not isinstance(items, list):
        raise ValueError("'ranking' must be a list")
    by_url = {normalize_url(p.url): p for p in pages}
    entries: list[RankedEntry] = []
    used: set[str] = set()
    problems: list[str] = []
    for item in items:
        if not isinstance(item, dict):
            problems.append("ranking entries must be objects")
            continue
        url = item.get("url")
        rationale = item.get("rationale")
        try:
            key = normalize_url(url) if isinstance(url, str) else None
        except ValueError:
            key = None
        if key is None or key not in by_url:
            problems.append(f"URL not in the page list: {url!r}")
            continue
        if not isinstance(rationale, str) or not rationale.strip():
            problems.append(f"missing rationale for {url}")
            continue
        if key in used:
            continue
        used.add(key)
        entries.append(RankedEntry(by_url[key], rationale.strip()))
    if strict and problems:
        raise ValueError("; ".join(problems))
    return RankedOrigins(tuple(entries), _opt_str(data.get("vendor_hint")), _opt_str(data.get("version_hint")))


def a3_rank_origins(evidence: Evidence, keywords: KeywordSet, pages: list[PageRecord], llm) -> RankedOrigins:
    if not pages:
        raise ValueError("a3_rank_origins needs at least one page")
    llm = tracked(llm)
    user = load_prompt("a3_rank").render(evidence=render_evidence(evidence), keywords=", ".join(keywords.keywords),
                                         pages=render_pages(pages))
    reply = ask(llm, "a3_rank", user, lambda d: _ranking(d, pages, strict=True),
                lenient=lambda d: _ranking(d, pages, strict=False))
    return reply.parsed


# ---------------------------------------------------------------- a4

def render_candidates(top: tuple[RankedEntry, ...] | list[RankedEntry]) -> str:
    return "\n\n".join(f"[{i}] {e.url}\nSummary: {e.page.summary}" for i, e in enumerate(top, 1))


def a4_validate(evidence: Evidence, top, llm, *, final: bool = True) -> ValidationVerdict:
    """Judge the top candidates against the evidence alone.

    The prompt is built from an evidence digest and (url, summary) pairs only,
    so nothing the keyword or ranking agents wrote reaches the validator.
    A rejection before the final iteration always carries refined keywords;
    the name hint stands in when the model offers none.
    """
    top = tuple(top)
    if not top:
        raise ValueError("a4_validate needs at least one candidate")
    llm = tracked(llm)
    fallback_keywords = (evidence.name_hint,) if evidence.name_hint.strip() else ("library",)

    def validate(data: dict) -> ValidationVerdict:
        decision = str(data.get("decision", "")).strip().lower()
        if decision not in ("accept", "reject"):
            raise ValueError("'decision' must be 'accept' or 'reject'")
        reasons = data.get("reasons")
        if not isinstance(reasons, str) or not reasons.strip():
            raise ValueError("'reasons' must be a non-empty string")
        if decision == "accept":
            return ValidationVerdict(Decision.ACCEPT, reasons.strip())
        refined = data.get("refined_keywords")
        keywords = clean_keywords(_str_list(refined, "'refined_keywords'")) if refined is not None else []
        if not keywords:
            keywords = None if final else list(fallback_keywords)
        return ValidationVerdict(Decision.REJECT, reasons.strip(), tuple(keywords) if keywords else None)

    user = load_prompt("a4_validate").render(evidence=evidence_digest(evidence), candidates=render_candidates(top))
    try:
        return ask(llm, "a4_validate", user, validate).parsed
    except AgentParseError as exc:
        log.info("validator reply unusable, treating as rejection: %s", exc)
        return ValidationVerdict(Decision.REJECT, UNPARSEABLE_VALIDATION, None if final else fallback_keywords)


# ---------------------------------------------------------------- a5

@dataclass(frozen=True)
class Aggregate:
    name: str
    origin_url: str | None
    description: str | None
    vendor_hint: str | None
    version_hint: str | None


def a5_aggregate(evidence: Evidence, accepted: RankedOrigins, verdict_history: list[ValidationVerdict], llm) -> Aggregate:
    """Package the final metadata.

    After an Accept the origin is the first ranked entry; after loop
    exhaustion no origin is reported and only hints are carried forward.
    """
    llm = tracked(llm)
    is_accepted = bool(verdict_history) and verdict_history[-1].accepted and bool(accepted.entries)
    origin = accepted.entries[0] if is_accepted else None

    def validate(data: dict):
        description = _opt_str(data.get("description"))
        if is_accepted and not description:
            raise ValueError("'description' must be a non-empty string")
        return description, _opt_str(data.get("vendor")), _opt_str(data.get("version"))

    origin_text = f"{origin.url}\nSummary: {origin.page.summary}" if origin else "none accepted"
    user = load_prompt("a5_aggregate").render(
        evidence=evidence_digest(evidence), origin=origin_text,
        vendor=accepted.vendor_hint or "null", version=accepted.version_hint or "null",
    )
    description = vendor = version = None
    try:
        description, vendor, version = ask(llm, "a5_aggregate", user, validate).parsed
    except AgentParseError as exc:
        log.info("aggregation reply unusable, assembling report without description: %s", exc)
    return Aggregate(
        name=evidence.name_hint,
        origin_url=origin.url if origin else None,
        description=description,
        vendor_hint=accepted.vendor_hint or vendor,
        version_hint=accepted.version_hint or version,
    )
