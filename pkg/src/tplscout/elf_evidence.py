"""Identity evidence from ELF shared objects.

The whole file is scanned for printable ASCII runs, the same way ``strings``
does it; no section parsing is attempted.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path

from tplscout.model import DEFAULT_MIN_STRING_LENGTH, Evidence, EvidenceKind

log = logging.getLogger(__name__)

_URL_MARKERS = ("http", "www.")
_VERSION_RE = re.compile(r"\d+\.\d+")
_IDENTITY_WORDS = ("version", "copyright", "library", "(c)")
_SO_SUFFIX_RE = re.compile(r"\.so(?:\.[0-9A-Za-z]+)*$")


@dataclass(frozen=True)
class StringExtractionConfig:
    min_run_length: int = 4
    min_keep_length: int = DEFAULT_MIN_STRING_LENGTH
    max_strings_to_llm: int = 500

    def __post_init__(self) -> None:
        if self.min_run_length < 1:
            raise ValueError("min_run_length must be >= 1")
        if self.min_keep_length < self.min_run_length:
            raise ValueError("min_keep_length must be >= min_run_length")
        if self.max_strings_to_llm < 1:
            raise ValueError("max_strings_to_llm must be >= 1")


def extract_printable_runs(data: bytes, cfg: StringExtractionConfig = StringExtractionConfig()) -> list[str]:
    """Return every maximal run of bytes 0x20-0x7E of at least ``min_run_length``, in file order."""
    pattern = re.compile(rb"[\x20-\x7e]{%d,}" % cfg.min_run_length)
    return [m.group().decode("ascii") for m in pattern.finditer(data)]


def priority_class(s: str) -> int:
    lowered = s.lower()
    if any(marker in lowered for marker in _URL_MARKERS):
        return 1
    if _VERSION_RE.search(s):
        return 2
    if any(word in lowered for word in _IDENTITY_WORDS):
        return 3
    return 4


def filter_and_prioritize(runs: list[str], cfg: StringExtractionConfig = StringExtractionConfig()) -> list[str]:
    """Drop short strings, dedupe, then order URL-like > version-like > keyword-bearing > rest.

    Ordering inside a class follows first occurrence. The result is capped at
    ``max_strings_to_llm`` to keep prompts within a model's context.
    """
    seen: set[str] = set()
    kept: list[str] = []
    for s in runs:
        if len(s) < cfg.min_keep_length or s in seen:
            continue
        seen.add(s)
        kept.append(s)
    kept.sort(key=priority_class)
    return kept[: cfg.max_strings_to_llm]


def so_name_hint(path: str | Path) -> str:
    name = Path(path).name
    stem = _SO_SUFFIX_RE.sub("", name)
    if stem == name:
        stem = Path(name).stem or name
    if stem.startswith("lib") and len(stem) > 3:
        stem = stem[3:]
    return stem


def extract_so_evidence(path: str | Path, cfg: StringExtractionConfig = StringExtractionConfig()) -> Evidence:
    path = Path(path)
    data = path.read_bytes()
    strings = filter_and_prioritize(extract_printable_runs(data, cfg), cfg)
    if not strings:
        log.warning("EmptyEvidence: no strings of length >= %d in %s", cfg.min_keep_length, path)
    return Evidence(
        kind=EvidenceKind.ELF_SHARED_OBJECT,
        name_hint=so_name_hint(path),
        strings=tuple(strings),
        origin_artifact=str(path),
        empty=not strings,
        min_string_length=cfg.min_keep_length,
    )
