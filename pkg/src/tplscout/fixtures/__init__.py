"""Fixture assets: synthetic inputs, scripted services and recorded cassettes."""

from __future__ import annotations

from pathlib import Path

DATA_DIR = Path(__file__).resolve().parent.parent / "data"

SCENARIOS = ("glad", "semver", "netfail", "crypto", "mystery", "mixed")


def data_path(*parts: str) -> Path:
    return DATA_DIR.joinpath(*parts)


def cassette_path(name: str) -> Path:
    return DATA_DIR / "cassettes" / f"{name}.json"
