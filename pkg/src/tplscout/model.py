"""Domain value objects shared by every stage of the identification pipeline.

All types are frozen dataclasses that validate their invariants on
construction, so an instance that exists is an instance that is valid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from urllib.parse import urlsplit, urlunsplit

from tplscout.errors import MalformedUrl

PRINTABLE_MIN = 0x20
PRINTABLE_MAX = 0x7E

DEFAULT_MIN_STRING_LENGTH = 10
DEFAULT_EXCERPT_BYTE_CAP = 8192
MAX_KEYWORDS = 8
MAX_ITERATIONS = 3

_DEFAULT_PORTS = {"http": 80, "https": 443}


class EvidenceKind(str, Enum):
    ELF_SHARED_OBJECT = "ElfSharedObject"
    CPP_SOURCE_CLONE = "CppSourceClone"


class FetchStatus(str, Enum):
    FETCHED = "Fetched"
    FETCH_FAILED = "FetchFailed"
    SKIPPED = "Skipped"


class SummarySource(str, Enum):
    LLM_SUMMARY = "LlmSummary"
    SNIPPET_FALLBACK = "SnippetFallback"


class Decision(str, Enum):
    ACCEPT = "Accept"
    REJECT = "Reject"


class Status(str, Enum):
    LOCATED = "Located"
    HINTS_ONLY = "HintsOnly"
    FAILED = "Failed"


class FailureReason(str, Enum):
    NETWORK_FAILURE = "NetworkFailure"
    NO_DISTINCTIVE_EVIDENCE = "NoDistinctiveEvidence"
    SOURCE_INACCESSIBLE = "SourceInaccessible"
    AMBIGUOUS_KEYWORDS = "AmbiguousKeywords"
    BUDGET_EXCEEDED = "BudgetExceeded"


def is_printable(text: str) -> bool:
    return all(PRINTABLE_MIN <= ord(ch) <= PRINTABLE_MAX for ch in text)


def is_http_url(raw: str) -> bool:
    try:
        normalize_url(raw)
    except MalformedUrl:
        return False
    return True


def normalize_url(raw: str) -> str:
    """Canonicalize an absolute http(s) URL for equality comparison.

    Scheme and host are lowercased, a leading ``www.`` and default ports are
    dropped, the fragment is removed and trailing slashes are stripped from
    the path. The path itself is lowercased too: repository hosts such as
    GitHub resolve owner/repo names case-insensitively, and ground-truth
    labels rarely agree on case.

    >>> normalize_url("HTTP://WWW.Example.com:80/a/")
    'http://example.com/a'
    """
    if not isinstance(raw, str):
        raise MalformedUrl(f"not a string: {raw!r}")
    text = raw.strip()
    if any(ch.isspace() for ch in text):
        raise MalformedUrl(f"whitespace in URL: {raw!r}")
    try:
        parts = urlsplit(text)
        port = parts.port
    except ValueError as exc:
        raise MalformedUrl(f"unparseable URL {raw!r}: {exc}") from None
    scheme = parts.scheme.lower()
    host = (parts.hostname or "").lower()
    if scheme not in _DEFAULT_PORTS or not host:
        raise MalformedUrl(f"not an absolute http(s) URL: {raw!r}")
    if host.startswith("www."):
        host = host[4:]
    if not host:
        raise MalformedUrl(f"empty host: {raw!r}")
    netloc = f"[{host}]" if ":" in host else host
    if port is not None and port != _DEFAULT_PORTS[scheme]:
        netloc = f"{netloc}:{port}"
    path = parts.path.rstrip("/").lower()
    return urlunsplit((scheme, netloc, path, parts.query, ""))


@dataclass(frozen=True)
class FileExcerpt:
    path: str
    content: str
    truncated: bool = False


@dataclass(frozen=True)
class Evidence:
    kind: EvidenceKind
    name_hint: str
    strings: tuple[str, ...] = ()
    tree_text: str | None = None
    file_excerpts: tuple[FileExcerpt, ...] = ()
    origin_artifact: str = ""
    # Set when extraction produced nothing beyond the name hint.
    empty: bool = False
    skipped: tuple[str, ...] = ()
    min_string_length: int = DEFAULT_MIN_STRING_LENGTH
    excerpt_byte_cap: int = DEFAULT_EXCERPT_BYTE_CAP

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", EvidenceKind(self.kind))
        object.__setattr__(self, "strings", tuple(self.strings))
        object.__setattr__(self, "file_excerpts", tuple(self.file_excerpts))
        object.__setattr__(self, "skipped", tuple(self.skipped))
        for s in self.strings:
            if len(s) < self.min_string_length:
                raise ValueError(f"evidence string shorter than {self.min_string_length}: {s!r}")
            if not is_printable(s):
                raise ValueError(f"evidence string has non-printable characters: {s!r}")
        if len(set(self.strings)) != len(self.strings):
            raise ValueError("evidence strings contain duplicates")
        if self.kind is EvidenceKind.ELF_SHARED_OBJECT and self.tree_text is not None:
            raise ValueError("ELF evidence carries no tree text")
        if self.kind is EvidenceKind.CPP_SOURCE_CLONE and self.tree_text is None:
            raise ValueError("source-clone evidence requires tree text")
        for ex in self.file_excerpts:
            if len(ex.content.encode("utf-8")) > self.excerpt_byte_cap:
                raise ValueError(f"excerpt {ex.path} exceeds {self.excerpt_byte_cap} bytes")


@dataclass(frozen=True)
class KeywordSet:
    keywords: tuple[str, ...]
    rationale: str = ""
    generation: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "keywords", tuple(self.keywords))
        if not 1 <= len(self.keywords) <= MAX_KEYWORDS:
            raise ValueError(f"need 1..{MAX_KEYWORDS} keywords, got {len(self.keywords)}")
        for kw in self.keywords:
            if not kw or kw != kw.strip():
                raise ValueError(f"bad keyword {kw!r}")
        if self.generation < 0:
            raise ValueError("generation must be >= 0")

    @property
    def query(self) -> str:
        return " ".join(self.keywords)


@dataclass(frozen=True)
class SearchHit:
    title: str
    snippet: str
    url: str
    page_index: int = 1
    rank_on_page: int = 1

    def __post_init__(self) -> None:
        normalize_url(self.url)
        # The snippet doubles as the summary of last resort, so it is never empty.
        if not self.snippet.strip():
            object.__setattr__(self, "snippet", self.title.strip() or self.url)
        if self.page_index < 1:
            raise ValueError("page_index must be >= 1")
        if self.rank_on_page < 1:
            raise ValueError("rank_on_page must be >= 1")


@dataclass(frozen=True)
class PageRecord:
    hit: SearchHit
    fetch_status: FetchStatus
    summary: str
    summary_source: SummarySource
    extracted_text: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "fetch_status", FetchStatus(self.fetch_status))
        object.__setattr__(self, "summary_source", SummarySource(self.summary_source))
        if not self.summary:
            raise ValueError("page summary must be non-empty")
        if self.fetch_status is FetchStatus.FETCH_FAILED:
            if self.summary_source is not SummarySource.SNIPPET_FALLBACK or self.summary != self.hit.snippet:
                raise ValueError("failed fetch must fall back to the search snippet")
        if self.fetch_status is FetchStatus.FETCHED and self.extracted_text is None:
            raise ValueError("fetched page must carry extracted text")

    @property
    def url(self) -> str:
        return self.hit.url


@dataclass(frozen=True)
class RankedEntry:
    page: PageRecord
    rationale: str

    def __post_init__(self) -> None:
        if not self.rationale.strip():
            raise ValueError("ranking rationale must be non-empty")

    @property
    def url(self) -> str:
        return self.page.url


@dataclass(frozen=True)
class RankedOrigins:
    entries: tuple[RankedEntry, ...] = ()
    vendor_hint: str | None = None
    version_hint: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(self.entries))
        seen = set()
        for entry in self.entries:
            key = normalize_url(entry.url)
            if key in seen:
                raise ValueError(f"duplicate ranked URL {entry.url}")
            seen.add(key)

    def top(self, k: int) -> tuple[RankedEntry, ...]:
        return self.entries[:k]


@dataclass(frozen=True)
class ValidationVerdict:
    decision: Decision
    reasons: str
    refined_keywords: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "decision", Decision(self.decision))
        if not self.reasons.strip():
            raise ValueError("verdict reasons must be non-empty")
        if self.refined_keywords is not None:
            if self.decision is Decision.ACCEPT:
                raise ValueError("refined keywords only accompany a rejection")
            object.__setattr__(self, "refined_keywords", tuple(self.refined_keywords))

    @property
    def accepted(self) -> bool:
        return self.decision is Decision.ACCEPT


@dataclass(frozen=True)
class LibraryReport:
    name: str
    status: Status
    origin_url: str | None = None
    vendor_hint: str | None = None
    version_hint: str | None = None
    description: str | None = None
    iterations_used: int = 0
    token_usage: int = 0
    wall_time_ms: int = 0
    failure_reason: FailureReason | None = None
    notes: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        object.__setattr__(self, "status", Status(self.status))
        if self.failure_reason is not None:
            object.__setattr__(self, "failure_reason", FailureReason(self.failure_reason))
        object.__setattr__(self, "notes", tuple(self.notes))
        if not 0 <= self.iterations_used <= MAX_ITERATIONS:
            raise ValueError(f"iterations_used out of range: {self.iterations_used}")
        if self.token_usage < 0 or self.wall_time_ms < 0:
            raise ValueError("token_usage and wall_time_ms must be non-negative")
        if self.status is Status.LOCATED and not self.origin_url:
            raise ValueError("Located report requires origin_url")
        if self.status is Status.HINTS_ONLY:
            if self.origin_url:
                raise ValueError("HintsOnly report must not carry origin_url")
            if not (self.vendor_hint or self.version_hint):
                raise ValueError("HintsOnly report requires a vendor or version hint")
        if self.status is Status.FAILED and self.failure_reason is None:
            raise ValueError("Failed report requires failure_reason")

    @property
    def has_hints(self) -> bool:
        return bool(self.vendor_hint or self.version_hint)
