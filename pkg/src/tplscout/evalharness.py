"""Run labeled cases through the pipeline and count located / correct / hinted results.

Manifest and report layouts are documented in docs/eval.md.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from tplscout.backends.base import Backends
from tplscout.elf_evidence import StringExtractionConfig
from tplscout.errors import MalformedUrl, ManifestError, ReplayMiss
from tplscout.model import FailureReason, LibraryReport, Status, normalize_url
from tplscout.pipeline import PipelineConfig, SystemClock, analyze_project, analyze_so
from tplscout.source_evidence import TreeDumpConfig

log = logging.getLogger(__name__)

KINDS = ("so", "project")
_STATUS_ORDER = {Status.LOCATED: 0, Status.HINTS_ONLY: 1, Status.FAILED: 2}


@dataclass(frozen=True)
class Case:
    id: str
    kind: str
    input_path: Path
    ground_truth_urls: tuple[str, ...]
    notes: str = ""
    library: str | None = None

    def matches(self, url: str | None) -> bool:
        if not url:
            return False
        try:
            return normalize_url(url) in {normalize_url(u) for u in self.ground_truth_urls}
        except MalformedUrl:
            return False


@dataclass(frozen=True)
class CaseManifest:
    cases: tuple[Case, ...]


def parse_manifest(data: dict, base_dir: str | Path = ".", *, check_paths: bool = True) -> CaseManifest:
    if not isinstance(data, dict) or not isinstance(data.get("cases"), list):
        raise ManifestError("manifest must be an object with a 'cases' list")
    base = Path(base_dir)
    seen: set[str] = set()
    cases = []
    for i, raw in enumerate(data["cases"]):
        where = f"case #{i}"
        if not isinstance(raw, dict):
            raise ManifestError(f"{where}: must be an object")
        cid = raw.get("id")
        if not isinstance(cid, str) or not cid:
            raise ManifestError(f"{where}: 'id' must be a non-empty string")
        if cid in seen:
            raise ManifestError(f"duplicate case id {cid!r}")
        seen.add(cid)
        kind = raw.get("kind")
        if kind not in KINDS:
            raise ManifestError(f"case {cid}: 'kind' must be one of {KINDS}")
        urls = raw.get("ground_truth_urls")
        if not isinstance(urls, list) or not urls:
            raise ManifestError(f"case {cid}: 'ground_truth_urls' must be a non-empty list")
        for url in urls:
            try:
                normalize_url(url)
            except MalformedUrl as exc:
                raise ManifestError(f"case {cid}: {exc}") from None
        raw_path = raw.get("input_path")
        if not isinstance(raw_path, str) or not raw_path:
            raise ManifestError(f"case {cid}: 'input_path' must be a non-empty string")
        path = Path(raw_path)
        if not path.is_absolute():
            path = base / path
        if check_paths and not path.exists():
            raise ManifestError(f"case {cid}: input does not exist: {path}")
        cases.append(Case(cid, kind, path, tuple(urls), str(raw.get("notes") or ""), raw.get("library")))
    return CaseManifest(tuple(cases))


def load_manifest(path: str | Path) -> CaseManifest:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON: {exc}") from None
    return parse_manifest(data, path.parent)


@dataclass(frozen=True)
class CaseRow:
    id: str
    status: Status
    matched: bool
    token_usage: int
    wall_time_ms: int
    origin_url: str | None = None
    failure_reason: FailureReason | None = None
    note: str = ""


@dataclass
class EvalReport:
    total: int = 0
    collected_url: int = 0
    correct: int = 0
    hints_found: int = 0
    rows: list[CaseRow] = field(default_factory=list)
    mean_wall_time_ms: float = 0.0
    mean_tokens: float = 0.0

    @classmethod
    def from_rows(cls, rows: list[CaseRow]) -> EvalReport:
        total = len(rows)
        return cls(
            total=total,
            collected_url=sum(r.status is Status.LOCATED for r in rows),
            correct=sum(r.status is Status.LOCATED and r.matched for r in rows),
            hints_found=sum(r.status in (Status.LOCATED, Status.HINTS_ONLY) for r in rows),
            rows=list(rows),
            mean_wall_time_ms=sum(r.wall_time_ms for r in rows) / total if total else 0.0,
            mean_tokens=sum(r.token_usage for r in rows) / total if total else 0.0,
        )

    def to_json(self) -> dict:
        rows = []
        for r in self.rows:
            row = asdict(r)
            row["status"] = r.status.value
            row["failure_reason"] = r.failure_reason.value if r.failure_reason else None
            rows.append(row)
        return {
            "total": self.total,
            "collected_url": self.collected_url,
            "correct": self.correct,
            "hints_found": self.hints_found,
            "aggregates": {"mean_wall_time_ms": self.mean_wall_time_ms, "mean_tokens": self.mean_tokens},
            "cases": rows,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2) + "\n"


def _pick(case: Case, reports: list[LibraryReport]) -> LibraryReport | None:
    if case.library:
        named = [r for r in reports if r.name.lower() == case.library.lower()]
        reports = named or reports
    if not reports:
        return None
    return min(reports, key=lambda r: (_STATUS_ORDER[r.status], not case.matches(r.origin_url)))


def _row(case: Case, report: LibraryReport | None, tokens: int, wall_ms: int, note: str = "") -> CaseRow:
    if report is None:
        return CaseRow(case.id, Status.FAILED, False, tokens, wall_ms,
                       failure_reason=FailureReason.NO_DISTINCTIVE_EVIDENCE, note=note or "no candidates found")
    return CaseRow(
        id=case.id,
        status=report.status,
        matched=report.status is Status.LOCATED and case.matches(report.origin_url),
        token_usage=tokens,
        wall_time_ms=wall_ms,
        origin_url=report.origin_url,
        failure_reason=report.failure_reason,
        note=note or "; ".join(report.notes),
    )


def run_case(case: Case, cfg: PipelineConfig, backends: Backends, *, clock=None,
             string_cfg: StringExtractionConfig = StringExtractionConfig(),
             tree_cfg: TreeDumpConfig = TreeDumpConfig()) -> CaseRow:
    clock = clock or SystemClock()
    start = clock.monotonic()
    try:
        if case.kind == "so":
            report = analyze_so(case.input_path, cfg, backends, string_cfg=string_cfg, clock=clock)
            return _row(case, report, report.token_usage, report.wall_time_ms)
        result = analyze_project(case.input_path, cfg, backends, tree_cfg=tree_cfg, clock=clock, jobs=1)
        wall_ms = int(max(0.0, clock.monotonic() - start) * 1000)
        return _row(case, _pick(case, result.reports), result.token_usage, wall_ms)
    except ReplayMiss as exc:
        log.warning("case %s: %s", case.id, exc)
        wall_ms = int(max(0.0, clock.monotonic() - start) * 1000)
        return CaseRow(case.id, Status.FAILED, False, 0, wall_ms,
                       failure_reason=FailureReason.NETWORK_FAILURE, note=f"replay miss: {exc.request_preview}")


def run_eval(manifest: CaseManifest, cfg: PipelineConfig, backends: Backends, *, clock=None, jobs: int = 1,
             string_cfg: StringExtractionConfig = StringExtractionConfig(),
             tree_cfg: TreeDumpConfig = TreeDumpConfig()) -> EvalReport:
    """Run every case; individual failures never abort the evaluation and rows keep manifest order."""
    def one(case: Case) -> CaseRow:
        return run_case(case, cfg, backends, clock=clock, string_cfg=string_cfg, tree_cfg=tree_cfg)

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        rows = list(pool.map(one, manifest.cases))
    return EvalReport.from_rows(rows)
