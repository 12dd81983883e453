"""Regenerate the shipped fixture binaries and cassettes.

    python -m tplscout.fixtures.record [--out DIR]

Any change to a prompt asset changes request digests, so cassettes must be
re-recorded after prompt edits; the test suite fails until they are.
"""

from __future__ import annotations

import argparse
import logging
from pathlib import Path

from tplscout.backends.cassette import Cassette, RecordingFetch, RecordingLlm, RecordingSearch
from tplscout.backends.base import Backends
from tplscout.fixtures import DATA_DIR, SCENARIOS
from tplscout.fixtures.builder import layout_strings, write_fixture_so
from tplscout.fixtures.world import Scenario, scripted_backends
from tplscout.pipeline import FixedClock, PipelineConfig, analyze_project, analyze_so

log = logging.getLogger(__name__)

CASSETTE_CREATED_AT = "2024-01-01T00:00:00Z"
COMBINED = "all"


def build_so(scenario: Scenario, base_dir: Path) -> Path:
    path = base_dir / scenario.input
    spec = layout_strings(scenario.so_strings, seed=scenario.so_seed)
    size = (spec[-1][0] + len(spec[-1][1]) + 256) if spec else 0
    write_fixture_so(path, spec, size=size, seed=scenario.so_seed)
    return path


def record_scenario(scenario: Scenario, input_dir: Path) -> Cassette:
    cassette = Cassette(created_at=CASSETTE_CREATED_AT)
    live = scripted_backends(scenario)
    backends = Backends(RecordingLlm(live.llm, cassette), RecordingSearch(live.search, cassette),
                        RecordingFetch(live.fetch, cassette))
    cfg = PipelineConfig()
    try:
        if scenario.kind == "so":
            analyze_so(input_dir / scenario.input, cfg, backends, clock=FixedClock())
        else:
            analyze_project(input_dir / scenario.input, cfg, backends, clock=FixedClock(), jobs=1)
    finally:
        live.close()
    return cassette


def record_all(out_dir: Path | None = None, data_dir: Path = DATA_DIR) -> dict[str, Cassette]:
    """Rebuild fixture SO files into ``data_dir`` and write cassettes into ``out_dir``."""
    out_dir = out_dir or data_dir / "cassettes"
    combined = Cassette(created_at=CASSETTE_CREATED_AT)
    result = {}
    for name in SCENARIOS:
        scenario = Scenario.load(data_dir / "scenarios" / f"{name}.json")
        if scenario.kind == "so":
            build_so(scenario, data_dir)
        cassette = record_scenario(scenario, data_dir)
        cassette.save(out_dir / f"{name}.json")
        combined.merge(cassette)
        result[name] = cassette
        log.info("recorded %s: %d interactions", name, len(cassette))
    combined.save(out_dir / f"{COMBINED}.json")
    result[COMBINED] = combined
    return result


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=None, help="cassette output directory")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    logging.getLogger("httpx").setLevel(logging.WARNING)
    record_all(args.out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
