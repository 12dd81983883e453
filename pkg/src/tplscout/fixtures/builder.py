"""Synthetic shared-object files with planted strings, for extraction tests."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

from tplscout.errors import OverlapError
from tplscout.model import is_printable

# Bytes outside 0x20-0x7E, so filler never extends or joins a planted run.
NON_PRINTABLE = bytes(b for b in range(256) if not 0x20 <= b <= 0x7E)


@dataclass(frozen=True)
class FixtureSo:
    data: bytes
    manifest: tuple[tuple[int, str], ...]

    def expected_runs(self, min_run_length: int = 4) -> list[str]:
        return [s for _, s in self.manifest if len(s) >= min_run_length]


def build_fixture_so(spec, *, size: int | None = None, seed: int = 0) -> FixtureSo:
    """Lay printable strings at the given offsets over random non-printable filler.

    Planted strings must not overlap or touch: a shared boundary would fuse two
    strings into one run.
    """
    planted = sorted((int(off), s) for off, s in spec)
    end = 0
    for i, (off, s) in enumerate(planted):
        if off < 0:
            raise OverlapError(f"negative offset {off}")
        if not s or not is_printable(s):
            raise ValueError(f"planted string must be non-empty printable ASCII: {s!r}")
        if i and off <= end:
            raise OverlapError(f"string at {off} overlaps or touches the previous one ending at {end}")
        end = off + len(s)
    total = end if size is None else size
    if total < end:
        raise ValueError(f"size {size} smaller than planted content ({end} bytes)")
    rng = random.Random(seed)
    buf = bytearray(rng.choice(NON_PRINTABLE) for _ in range(total))
    for off, s in planted:
        buf[off:off + len(s)] = s.encode("ascii")
    return FixtureSo(bytes(buf), tuple(planted))


def layout_strings(strings, *, seed: int = 0, start: int = 64, max_gap: int = 24, tail: int = 256) -> list[tuple[int, str]]:
    """Assign offsets to strings in order, separated by random gaps of 1..max_gap bytes."""
    rng = random.Random(seed)
    out = []
    pos = start
    for s in strings:
        out.append((pos, s))
        pos += len(s) + rng.randint(1, max_gap)
    return out


def write_fixture_so(path: str | Path, spec, *, size: int | None = None, seed: int = 0) -> FixtureSo:
    """Write the binary and a ``<name>.manifest.json`` listing of planted strings next to it."""
    path = Path(path)
    fixture = build_fixture_so(spec, size=size, seed=seed)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(fixture.data)
    manifest = [{"offset": off, "string": s} for off, s in fixture.manifest]
    path.with_name(path.name + ".manifest.json").write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")
    return fixture
