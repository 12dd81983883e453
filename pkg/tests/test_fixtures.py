import random
import shutil
import string

import pytest

from tplscout.backends import replay_backends
from tplscout.backends.cassette import Cassette
from tplscout.elf_evidence import extract_printable_runs
from tplscout.errors import OverlapError
from tplscout.fixtures import DATA_DIR, SCENARIOS, cassette_path
from tplscout.fixtures.builder import build_fixture_so, layout_strings, write_fixture_so
from tplscout.fixtures.record import record_all
from tplscout.fixtures.world import Scenario
from tplscout.pipeline import FixedClock, PipelineConfig, analyze_project, analyze_so

from oracles import planted_runs


def test_single_planted_string():
    fixture = build_fixture_so([(0, "OpenSSL 1.1.1k")], size=64)
    assert extract_printable_runs(fixture.data) == ["OpenSSL 1.1.1k"]


def test_empty_spec_is_all_filler():
    fixture = build_fixture_so([], size=4096, seed=3)
    assert len(fixture.data) == 4096
    assert extract_printable_runs(fixture.data) == []


def test_two_hundred_random_strings_round_trip(tmp_path):
    rng = random.Random(7)
    alphabet = string.ascii_letters + string.digits + " .-_/()"
    strings = ["".join(rng.choice(alphabet) for _ in range(rng.randint(1, 40))) for _ in range(200)]
    spec = layout_strings(strings, seed=7)
    fixture = write_fixture_so(tmp_path / "librandom.so", spec, size=spec[-1][0] + len(spec[-1][1]) + 100, seed=7)
    assert (tmp_path / "librandom.so").read_bytes() == fixture.data
    assert (tmp_path / "librandom.so.manifest.json").exists()
    assert extract_printable_runs(fixture.data) == planted_runs(fixture.manifest, 4) == fixture.expected_runs()


@pytest.mark.parametrize("spec", [
    [(0, "abcdef"), (3, "xyz")],
    [(0, "abcdef"), (6, "touching")],
    [(-1, "negative")],
])
def test_overlapping_specs_are_rejected(spec):
    with pytest.raises(OverlapError):
        build_fixture_so(spec)


def test_bad_planted_strings():
    with pytest.raises(ValueError):
        build_fixture_so([(0, "tab\there")])
    with pytest.raises(ValueError):
        build_fixture_so([(0, "long enough")], size=3)


def test_rerecording_reproduces_shipped_assets(tmp_path):
    data = tmp_path / "data"
    shutil.copytree(DATA_DIR, data)
    out = tmp_path / "cassettes"
    record_all(out_dir=out, data_dir=data)
    for name in (*SCENARIOS, "all"):
        assert (out / f"{name}.json").read_bytes() == cassette_path(name).read_bytes(), name
    for so in (DATA_DIR / "so").iterdir():
        assert (data / "so" / so.name).read_bytes() == so.read_bytes(), so.name


@pytest.mark.parametrize("name", SCENARIOS)
def test_shipped_cassettes_replay_cleanly(name):
    scenario = Scenario.load(DATA_DIR / "scenarios" / f"{name}.json")
    backends = replay_backends(Cassette.load(cassette_path(name)))
    target = DATA_DIR / scenario.input
    if scenario.kind == "so":
        reports = [analyze_so(target, PipelineConfig(), backends, clock=FixedClock())]
    else:
        reports = analyze_project(target, PipelineConfig(), backends, clock=FixedClock(), jobs=1).reports
    for report in reports:
        assert not any("replay miss" in note for note in report.notes)
