"""Evidence -> keywords -> search -> summaries -> ranking -> validation loop -> report."""

from __future__ import annotations

import hashlib
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from tplscout.agents import (
    AgentLlm,
    CallRecord,
    a1_keywords,
    a2_summarize_page,
    a3_rank_origins,
    a4_validate,
    a5_aggregate,
)
from tplscout.backends.base import MAX_CONCURRENT_FETCHES, Backends
from tplscout.elf_evidence import StringExtractionConfig, extract_so_evidence
from tplscout.errors import AgentParseError, BackendError, BudgetExceeded
from tplscout.model import (
    MAX_ITERATIONS,
    Decision,
    Evidence,
    FailureReason,
    FetchStatus,
    KeywordSet,
    LibraryReport,
    PageRecord,
    RankedOrigins,
    SearchHit,
    Status,
    ValidationVerdict,
    normalize_url,
)
from tplscout.sbom import SbomAssembler, SbomDocument
from tplscout.source_evidence import TreeDumpConfig, dump_tree, extract_source_evidence, select_tpl_candidates

log = logging.getLogger(__name__)

NO_CANDIDATES_REASON = "the search produced no rankable candidate pages"


@dataclass(frozen=True)
class PipelineConfig:
    max_feedback_loops: int = 3
    search_pages: int = 2
    validator_top_k: int = 3
    max_wall_time_s: float = 180.0
    max_tokens: int = 60_000
    fetch_concurrency: int = MAX_CONCURRENT_FETCHES

    def __post_init__(self) -> None:
        if not 1 <= self.max_feedback_loops <= MAX_ITERATIONS:
            raise ValueError(f"max_feedback_loops must be in 1..{MAX_ITERATIONS}")
        if self.search_pages < 1:
            raise ValueError("search_pages must be >= 1")
        if self.validator_top_k < 1:
            raise ValueError("validator_top_k must be >= 1")
        if self.fetch_concurrency < 1:
            raise ValueError("fetch_concurrency must be >= 1")


class SystemClock:
    def now(self) -> datetime:
        return datetime.now(timezone.utc)

    def monotonic(self) -> float:
        return time.monotonic()


@dataclass
class FixedClock:
    """Clock for reproducible runs: a frozen wall time and a frozen timer."""

    at: datetime = datetime(2024, 1, 1, tzinfo=timezone.utc)

    def now(self) -> datetime:
        return self.at

    def monotonic(self) -> float:
        return 0.0


@dataclass
class IterationTrace:
    keywords: KeywordSet
    hits: list[SearchHit] = field(default_factory=list)
    pages: list[PageRecord] = field(default_factory=list)
    ranked: RankedOrigins | None = None
    verdict: ValidationVerdict | None = None
    validated: bool = False


@dataclass
class RunTrace:
    """Intermediate products of one library run, for inspection and tests."""

    iterations: list[IterationTrace] = field(default_factory=list)
    calls: list[CallRecord] = field(default_factory=list)
    search_queries: list[str] = field(default_factory=list)
    fetched_urls: list[str] = field(default_factory=list)


def _run_id(evidence: Evidence) -> str:
    key = f"{evidence.kind.value}|{evidence.origin_artifact}|{evidence.name_hint}"
    return hashlib.sha256(key.encode("utf-8")).hexdigest()[:12]


def dedupe_hits(hits: list[SearchHit]) -> list[SearchHit]:
    seen: set[str] = set()
    out = []
    for hit in hits:
        key = normalize_url(hit.url)
        if key not in seen:
            seen.add(key)
            out.append(hit)
    return out


class _Run:
    def __init__(self, evidence: Evidence, cfg: PipelineConfig, backends: Backends, clock, trace: RunTrace):
        self.evidence = evidence
        self.cfg = cfg
        self.backends = backends
        self.clock = clock
        self.trace = trace
        self.llm = AgentLlm(backends.llm, run_id=_run_id(evidence), token_budget=cfg.max_tokens)
        self.start = clock.monotonic()
        self.vendor_hint: str | None = None
        self.version_hint: str | None = None
        self.ranked = RankedOrigins()
        self.verdicts: list[ValidationVerdict] = []
        self.ever_ranked = False
        self.iterations = 0
        self.notes: list[str] = list(evidence.skipped)

    def check_time(self) -> None:
        if self.clock.monotonic() - self.start > self.cfg.max_wall_time_s:
            raise BudgetExceeded(f"wall-time budget of {self.cfg.max_wall_time_s}s exceeded")

    def summarize(self, hit: SearchHit) -> PageRecord:
        fetched = self.backends.fetch.fetch_text(hit.url)
        return a2_summarize_page(hit, fetched, self.llm)

    def absorb_hints(self, ranked: RankedOrigins) -> None:
        self.vendor_hint = ranked.vendor_hint or self.vendor_hint
        self.version_hint = ranked.version_hint or self.version_hint

    def iterate(self, index: int, keywords: KeywordSet | None, feedback: ValidationVerdict | None) -> IterationTrace:
        final = index == self.cfg.max_feedback_loops - 1
        self.check_time()
        keywords = a1_keywords(self.evidence, feedback, self.llm, previous=keywords)
        it = IterationTrace(keywords)
        self.trace.iterations.append(it)
        self.iterations += 1
        self.check_time()
        self.trace.search_queries.append(keywords.query)
        it.hits = dedupe_hits(self.backends.search.search(keywords.query, self.cfg.search_pages))
        self.trace.fetched_urls.extend(h.url for h in it.hits)
        if it.hits:
            with ThreadPoolExecutor(max_workers=self.cfg.fetch_concurrency) as pool:
                it.pages = list(pool.map(self.summarize, it.hits))
        self.check_time()
        ranked = RankedOrigins()
        if it.pages:
            try:
                ranked = a3_rank_origins(self.evidence, keywords, it.pages, self.llm)
            except AgentParseError as exc:
                self.notes.append(f"ranking unparseable in iteration {index + 1}")
                log.info("ranking failed: %s", exc)
        it.ranked = ranked
        self.absorb_hints(ranked)
        self.ranked = RankedOrigins(ranked.entries, self.vendor_hint, self.version_hint)
        if ranked.entries:
            self.ever_ranked = True
            self.check_time()
            it.verdict = a4_validate(self.evidence, ranked.top(self.cfg.validator_top_k), self.llm, final=final)
            it.validated = True
        else:
            refined = None if final else keywords.keywords
            it.verdict = ValidationVerdict(Decision.REJECT, NO_CANDIDATES_REASON, refined)
        self.verdicts.append(it.verdict)
        return it

    def classify_failure(self) -> FailureReason:
        top = self.ranked.top(self.cfg.validator_top_k)
        if top and all(e.page.fetch_status is FetchStatus.FETCH_FAILED for e in top):
            return FailureReason.SOURCE_INACCESSIBLE
        if self.evidence.empty or not self.ever_ranked:
            return FailureReason.NO_DISTINCTIVE_EVIDENCE
        return FailureReason.AMBIGUOUS_KEYWORDS

    def report(self, status: Status, **kw) -> LibraryReport:
        self.trace.calls = list(self.llm.calls)
        elapsed = max(0.0, self.clock.monotonic() - self.start)
        kw.setdefault("vendor_hint", self.vendor_hint)
        kw.setdefault("version_hint", self.version_hint)
        return LibraryReport(
            name=self.evidence.name_hint,
            status=status,
            iterations_used=self.iterations,
            token_usage=self.llm.token_usage,
            wall_time_ms=int(elapsed * 1000),
            notes=tuple(self.notes),
            **kw,
        )

    def execute(self) -> LibraryReport:
        if self.evidence.empty and not self.evidence.name_hint.strip():
            return self.report(Status.FAILED, failure_reason=FailureReason.NO_DISTINCTIVE_EVIDENCE)
        keywords: KeywordSet | None = None
        feedback: ValidationVerdict | None = None
        try:
            for index in range(self.cfg.max_feedback_loops):
                it = self.iterate(index, keywords, feedback)
                keywords, feedback = it.keywords, it.verdict
                if it.verdict.accepted:
                    break
            self.check_time()
            agg = a5_aggregate(self.evidence, self.ranked, self.verdicts, self.llm)
        except BackendError as exc:
            log.warning("%s: network failure: %s", self.evidence.name_hint, exc)
            self.notes.append(f"network failure: {exc}")
            return self.report(Status.FAILED, failure_reason=FailureReason.NETWORK_FAILURE)
        except BudgetExceeded as exc:
            log.warning("%s: %s", self.evidence.name_hint, exc)
            self.notes.append(str(exc))
            return self.report(Status.FAILED, failure_reason=FailureReason.BUDGET_EXCEEDED)
        except AgentParseError as exc:
            log.warning("%s: keyword generation failed: %s", self.evidence.name_hint, exc)
            self.notes.append(str(exc))
            return self.report(Status.FAILED, failure_reason=FailureReason.NO_DISTINCTIVE_EVIDENCE)
        hints = {"vendor_hint": agg.vendor_hint, "version_hint": agg.version_hint}
        if agg.origin_url:
            return self.report(Status.LOCATED, origin_url=agg.origin_url, description=agg.description, **hints)
        if agg.vendor_hint or agg.version_hint:
            return self.report(Status.HINTS_ONLY, description=agg.description, **hints)
        return self.report(Status.FAILED, description=agg.description,
                           failure_reason=self.classify_failure(), **hints)


def run_library(evidence: Evidence, cfg: PipelineConfig, backends: Backends, *,
                clock=None, trace: RunTrace | None = None) -> LibraryReport:
    """Identify the origin of one library.

    Runs up to ``cfg.max_feedback_loops`` rounds of keywords, search, page
    summaries, ranking and independent validation, stopping at the first
    Accept. Backend failures become a Failed/NetworkFailure report; a
    ReplayMiss propagates.
    """
    run = _Run(evidence, cfg, backends, clock or SystemClock(), trace if trace is not None else RunTrace())
    report = run.execute()
    log.info("%s: %s after %d iteration(s), %d tokens", report.name, report.status.value,
             report.iterations_used, report.token_usage)
    return report


def analyze_so(path: str | Path, cfg: PipelineConfig, backends: Backends, *,
               string_cfg: StringExtractionConfig = StringExtractionConfig(), clock=None,
               trace: RunTrace | None = None) -> LibraryReport:
    return run_library(extract_so_evidence(path, string_cfg), cfg, backends, clock=clock, trace=trace)


def run_so(path: str | Path, cfg: PipelineConfig, backends: Backends, *,
           string_cfg: StringExtractionConfig = StringExtractionConfig(), clock=None) -> SbomDocument:
    clock = clock or SystemClock()
    report = analyze_so(path, cfg, backends, string_cfg=string_cfg, clock=clock)
    return SbomDocument.from_reports([report], clock.now())


@dataclass
class ProjectResult:
    reports: list[LibraryReport]
    selection_tokens: int = 0
    candidates: list = field(default_factory=list)

    @property
    def token_usage(self) -> int:
        return self.selection_tokens + sum(r.token_usage for r in self.reports)


def _failed(name: str, reason: FailureReason, note: str) -> LibraryReport:
    return LibraryReport(name=name, status=Status.FAILED, failure_reason=reason, notes=(note,))


def analyze_project(root: str | Path, cfg: PipelineConfig, backends: Backends, *,
                    tree_cfg: TreeDumpConfig = TreeDumpConfig(), clock=None, jobs: int | None = None,
                    traces: dict[str, RunTrace] | None = None) -> ProjectResult:
    """Find vendored libraries in a source tree and identify each one.

    Candidates run in parallel; one candidate's failure never affects the
    others, and reports come back in candidate order.
    """
    root = Path(root)
    clock = clock or SystemClock()
    tree_text = dump_tree(root, tree_cfg)
    selector = AgentLlm(backends.llm, run_id=hashlib.sha256(str(root).encode()).hexdigest()[:12])
    project_name = root.resolve().name or str(root)
    try:
        candidates = select_tpl_candidates(tree_text, selector)
    except BackendError as exc:
        return ProjectResult([_failed(project_name, FailureReason.NETWORK_FAILURE, str(exc))], selector.token_usage)
    except AgentParseError as exc:
        return ProjectResult([_failed(project_name, FailureReason.NO_DISTINCTIVE_EVIDENCE, str(exc))],
                             selector.token_usage)
    if not candidates:
        log.info("no third-party library candidates found in %s", root)
        return ProjectResult([], selector.token_usage, [])

    assembler = SbomAssembler()

    def one(index: int) -> None:
        cand = candidates[index]
        try:
            evidence = extract_source_evidence(root, cand, tree_cfg)
        except OSError as exc:
            assembler.submit(index, _failed(cand.name, FailureReason.NO_DISTINCTIVE_EVIDENCE, str(exc)))
            return
        trace = RunTrace()
        if traces is not None:
            traces[f"{index}:{cand.name}"] = trace
        assembler.submit(index, run_library(evidence, cfg, backends, clock=clock, trace=trace))

    workers = jobs or min(len(candidates), 4)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for future in [pool.submit(one, i) for i in range(len(candidates))]:
            future.result()
    return ProjectResult(assembler.reports(), selector.token_usage, candidates)


def run_project(root: str | Path, cfg: PipelineConfig, backends: Backends, *,
                tree_cfg: TreeDumpConfig = TreeDumpConfig(), clock=None, jobs: int | None = None) -> SbomDocument:
    clock = clock or SystemClock()
    result = analyze_project(root, cfg, backends, tree_cfg=tree_cfg, clock=clock, jobs=jobs)
    return SbomDocument.from_reports(result.reports, clock.now())
