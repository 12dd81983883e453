"""Per-criterion verdict lines, printed in the pytest terminal summary."""

import sys
from contextlib import contextmanager

import pytest

RESULTS: dict[int, str] = {}


def _record(number: int, verdict: str, title: str, detail: str = "") -> None:
    line = f"AC-{number:02d} {verdict:4} {title}" + (f" ({detail})" if detail else "")
    RESULTS[number] = line
    print(line, file=sys.stderr)


@contextmanager
def criterion(number: int, title: str):
    """Record PASS, FAIL or SKIP for one criterion; the test body's ``info`` dict feeds the detail text."""
    info: dict = {}
    try:
        yield info
    except pytest.skip.Exception as exc:
        _record(number, "SKIP", title, str(exc))
        raise
    except BaseException as exc:
        _record(number, "FAIL", title, f"{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}")
        raise
    _record(number, "PASS", title, ", ".join(f"{k}={v}" for k, v in info.items()))
