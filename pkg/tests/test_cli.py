import json
import subprocess
import sys

import pytest

from tplscout.cli import DEFAULTS, main
from tplscout.fixtures import cassette_path, data_path

GLAD_SO = str(data_path("so", "libglad.so"))
GLAD_CASSETTE = str(cassette_path("glad"))


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_so_replay_writes_only_json_to_stdout():
    proc = subprocess.run([sys.executable, "-m", "tplscout.cli", "so", GLAD_SO, "--backend", "replay",
                           "--cassette", GLAD_CASSETTE, "-v"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0, proc.stderr
    doc = json.loads(proc.stdout)
    assert doc["bomFormat"] == "CycloneDX" and len(doc["components"]) == 1
    assert "Located after 1 iteration" in proc.stderr


def test_flag_defaults():
    assert (DEFAULTS["backend"], DEFAULTS["max_loops"], DEFAULTS["search_pages"],
            DEFAULTS["min_string_len"], DEFAULTS["top_k"]) == ("replay", 3, 2, 10, 3)


def test_replay_without_cassette_is_a_usage_error(capsys):
    code, out, err = run(capsys, "so", GLAD_SO)
    assert code == 1 and out == "" and "--cassette" in err


def test_bad_flag_values_name_the_flag(capsys):
    code, _, err = run(capsys, "so", GLAD_SO, "--cassette", GLAD_CASSETTE, "--max-loops", "9")
    assert code == 1 and "--max-loops" in err
    code, _, err = run(capsys, "so", GLAD_SO, "--backend", "cloud")
    assert code == 1 and "--backend" in err
    code, _, err = run(capsys, "so", "/nonexistent/libz.so", "--cassette", GLAD_CASSETTE)
    assert code == 1 and "not found" in err


def test_live_without_search_key_names_it(capsys, monkeypatch, tmp_path):
    monkeypatch.setenv("LLM_API_KEY", "k")
    monkeypatch.delenv("SEARCH_API_KEY", raising=False)
    code, out, err = run(capsys, "project", str(tmp_path), "--backend", "live")
    assert code == 1 and out == "" and "SEARCH_API_KEY" in err


def test_replay_miss_exits_2(capsys):
    code, out, err = run(capsys, "so", str(data_path("so", "libcrypto.so")), "--cassette", GLAD_CASSETTE)
    assert code == 2 and out == "" and "replay miss" in err


def test_out_file_and_source_date_epoch(capsys, monkeypatch, tmp_path):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "86400")
    target = tmp_path / "nested" / "sbom.json"
    code, out, _ = run(capsys, "so", GLAD_SO, "--cassette", GLAD_CASSETTE, "--out", str(target))
    assert code == 0 and out == ""
    assert json.loads(target.read_text())["metadata"]["timestamp"] == "1970-01-02T00:00:00Z"


def test_replay_timestamp_comes_from_cassette(capsys, monkeypatch):
    monkeypatch.delenv("SOURCE_DATE_EPOCH", raising=False)
    _, first, _ = run(capsys, "so", GLAD_SO, "--cassette", GLAD_CASSETTE)
    _, second, _ = run(capsys, "so", GLAD_SO, "--cassette", GLAD_CASSETTE)
    assert first == second
    assert json.loads(first)["metadata"]["timestamp"] == "2024-01-01T00:00:00Z"


@pytest.mark.parametrize("suffix", [".toml", ".json"])
def test_config_file_sits_under_flags(capsys, tmp_path, suffix):
    cassette = cassette_path("glad")
    cfg = tmp_path / f"sca{suffix}"
    if suffix == ".toml":
        cfg.write_text(f'cassette = "{cassette}"\nmax-loops = 9\n')
    else:
        cfg.write_text(json.dumps({"cassette": str(cassette), "max_loops": 9}))
    code, _, err = run(capsys, "so", GLAD_SO, "--config", str(cfg))
    assert code == 1 and "--max-loops" in err
    code, out, _ = run(capsys, "so", GLAD_SO, "--config", str(cfg), "--max-loops", "3")
    assert code == 0 and json.loads(out)["components"]


def test_config_cassette_is_relative_to_the_file(capsys, tmp_path):
    (tmp_path / "c.json").write_bytes(cassette_path("glad").read_bytes())
    cfg = tmp_path / "sca.toml"
    cfg.write_text('cassette = "c.json"\n')
    code, _, _ = run(capsys, "so", GLAD_SO, "--config", str(cfg))
    assert code == 0


@pytest.mark.parametrize("body", ['colour = "red"\n', 'top-k = "three"\n', "not toml [", 'backend = "cloud"\n'])
def test_bad_config_files(capsys, tmp_path, body):
    cfg = tmp_path / "sca.toml"
    cfg.write_text(body)
    code, out, err = run(capsys, "so", GLAD_SO, "--config", str(cfg))
    assert code == 1 and out == "" and "--config" in err


def test_empty_project_gives_empty_sbom(capsys, caplog, tmp_path):
    code, out, _ = run(capsys, "project", str(tmp_path), "--cassette", GLAD_CASSETTE)
    assert code == 0 and json.loads(out)["components"] == []
    assert "no third-party libraries found" in caplog.text


def test_project_replay(capsys):
    code, out, _ = run(capsys, "project", str(data_path("projects", "mixed_demo")),
                       "--cassette", str(cassette_path("mixed")), "--jobs", "2")
    assert code == 0
    assert [c["name"] for c in json.loads(out)["components"]] == ["glad", "oddlib"]


def test_eval_report(capsys, tmp_path):
    report = tmp_path / "report.json"
    code, out, _ = run(capsys, "eval", "--manifest", str(data_path("eval_manifest.json")),
                       "--cassette", str(cassette_path("all")), "--report", str(report))
    assert code == 0 and out == ""
    data = json.loads(report.read_text())
    assert (data["total"], data["collected_url"], data["correct"], data["hints_found"]) == (3, 1, 1, 2)


def test_eval_bad_manifest(capsys, tmp_path):
    bad = tmp_path / "m.json"
    bad.write_text('{"cases": [{"id": "x"}]}')
    code, _, err = run(capsys, "eval", "--manifest", str(bad), "--cassette", GLAD_CASSETTE)
    assert code == 1 and err
