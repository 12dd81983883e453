import os
import random

import pytest

from fakes import DefaultAgents, FakeLlm
from oracles import expected_listing, materialize, random_tree
from tplscout.agents import AgentLlm
from tplscout.fixtures import data_path
from tplscout.source_evidence import (
    TplCandidate,
    TreeDumpConfig,
    dump_tree,
    extract_source_evidence,
    read_head,
    select_tpl_candidates,
    tree_paths,
)

SEMVER_TREE = {"src": {"main.c": None}, "vendor": {"semver": {"semver.c": None, "semver.h": None}}}


def test_empty_directory(tmp_path):
    (tmp_path / "empty").mkdir()
    assert dump_tree(tmp_path / "empty") == "empty/"


def test_semver_fixture_tree_listing():
    lines = dump_tree(data_path("projects", "semver_demo")).splitlines()
    assert lines[1:] == ["    src/", "        main.c", "    vendor/", "        semver/",
                         "            semver.c", "            semver.h"]
    assert lines == expected_listing("semver_demo", SEMVER_TREE, max_depth=4, max_entries=2000,
                                     extensions=TreeDumpConfig().include_extensions)


def test_entry_cap(tmp_path):
    root = tmp_path / "big"
    root.mkdir()
    for i in range(5000):
        (root / f"f{i:05d}.c").touch()
    lines = dump_tree(root, TreeDumpConfig(max_entries=2000)).splitlines()
    assert len(lines) == 1 + 2000 + 1
    assert lines[-1] == "[... truncated at 2000 entries]"


def test_hidden_and_filtered_entries_are_skipped(tmp_path):
    materialize({".git": {"config.c": None}, "a.o": None, "LICENSE": None, "README": None, "x.C": None}, tmp_path / "p")
    assert dump_tree(tmp_path / "p").splitlines()[1:] == ["    LICENSE", "    README", "    x.C"]


@pytest.mark.parametrize("seed", range(20))
def test_random_trees_match_oracle(tmp_path, seed):
    rng = random.Random(seed)
    tree = random_tree(rng)
    materialize(tree, tmp_path / "root")
    cfg = TreeDumpConfig(max_depth=rng.randint(1, 5), max_entries=rng.randint(1, 60))
    assert dump_tree(tmp_path / "root", cfg).splitlines() == expected_listing(
        "root", tree, max_depth=cfg.max_depth, max_entries=cfg.max_entries, extensions=cfg.include_extensions)


def test_tree_paths_round_trip():
    files, dirs = tree_paths(dump_tree(data_path("projects", "semver_demo")))
    assert files == {"src/main.c", "vendor/semver/semver.c", "vendor/semver/semver.h"}
    assert dirs == {"src", "vendor", "vendor/semver"}


class _Selector(DefaultAgents):
    def __init__(self, candidates):
        self.candidates = candidates

    def a0_select(self, req):
        return {"candidates": self.candidates}


def _select(candidates):
    tree = dump_tree(data_path("projects", "semver_demo"))
    llm = FakeLlm(_Selector(candidates))
    return select_tpl_candidates(tree, AgentLlm(llm)), llm


def test_select_semver_candidate():
    got, _ = _select([{"name": "semver", "root": "vendor/semver",
                       "files": ["vendor/semver/semver.c", "vendor/semver/semver.h"], "rationale": "vendored"}])
    assert got == [TplCandidate("semver", "vendor/semver", ("vendor/semver/semver.c", "vendor/semver/semver.h"),
                                "vendored")]


def test_select_drops_nonexistent_paths_and_repairs_root():
    got, _ = _select([{"name": "semver", "root": "vendor/nope",
                       "files": ["vendor/semver/ghost.c", "semver.c", "vendor/semver/semver.h"]}])
    assert len(got) == 1
    assert got[0].files_to_inspect == ("vendor/semver/semver.h",)
    assert got[0].root_path == "vendor/semver"
    got, _ = _select([{"name": "semver", "root": "vendor/semver",
                       "files": ["ghost.c", "semver.c", "./semver.h"]}])
    assert got[0].files_to_inspect == ("vendor/semver/semver.c", "vendor/semver/semver.h")


def test_select_empty_reply_and_all_bogus_paths():
    assert _select([])[0] == []
    assert _select([{"name": "x", "root": "", "files": ["nowhere.c"]}])[0] == []


def test_select_caps_files_at_five(tmp_path):
    materialize({"lib": {f"f{i}.c": None for i in range(8)}}, tmp_path / "p")
    llm = FakeLlm(_Selector([{"name": "lib", "root": "lib", "files": [f"lib/f{i}.c" for i in range(8)]}]))
    got = select_tpl_candidates(dump_tree(tmp_path / "p"), llm)
    assert len(got[0].files_to_inspect) == 5


def test_select_repairs_malformed_reply_once():
    class Flaky(_Selector):
        def a0_select(self, req):
            return "not json"

    llm = FakeLlm(Flaky([{"name": "semver", "root": "vendor/semver", "files": ["vendor/semver/semver.c"]}]))
    llm.agents.a0_select_repair = lambda req: {"candidates": llm.agents.candidates}
    got = select_tpl_candidates(dump_tree(data_path("projects", "semver_demo")), llm)
    assert [c.name for c in got] == ["semver"] and len(llm.requests) == 2


def test_extract_semver_evidence():
    cand = TplCandidate("semver", "vendor/semver", ("vendor/semver/semver.c", "vendor/semver/semver.h"))
    ev = extract_source_evidence(data_path("projects", "semver_demo"), cand)
    assert len(ev.file_excerpts) == 2
    assert all(len(ex.content.encode()) <= 8192 for ex in ev.file_excerpts)
    assert "Tomas Aparicio" in ev.file_excerpts[0].content
    assert ev.tree_text.splitlines()[0] == "semver/"
    assert not ev.empty


@pytest.mark.skipif(os.geteuid() == 0, reason="root can read files without permission bits")
def test_unreadable_file_becomes_skip_note(tmp_path):
    materialize({"lib": {"a.c": None, "b.c": None, "c.c": None}}, tmp_path / "p")
    (tmp_path / "p" / "lib" / "b.c").chmod(0)
    ev = extract_source_evidence(tmp_path / "p", TplCandidate("lib", "lib", ("lib/a.c", "lib/b.c", "lib/c.c")))
    assert len(ev.file_excerpts) == 2 and len(ev.skipped) == 1


def test_missing_file_becomes_skip_note(tmp_path):
    materialize({"lib": {"a.c": None, "c.c": None}}, tmp_path / "p")
    ev = extract_source_evidence(tmp_path / "p", TplCandidate("lib", "lib", ("lib/a.c", "lib/b.c", "lib/c.c")))
    assert [ex.path for ex in ev.file_excerpts] == ["lib/a.c", "lib/c.c"]
    assert len(ev.skipped) == 1 and ev.skipped[0].startswith("lib/b.c")


def test_large_file_is_capped(tmp_path):
    path = tmp_path / "big.c"
    path.write_text("x" * 20 * 1024)
    ex = read_head(path, 8192)
    assert len(ex.content.encode()) == 8192 and ex.truncated


def test_cap_never_splits_a_character(tmp_path):
    path = tmp_path / "utf.c"
    path.write_text("é" * 5000, encoding="utf-8")
    ex = read_head(path, 8191)
    assert ex.truncated and len(ex.content.encode()) <= 8191 and set(ex.content) == {"é"}
