"""Command-line entry point: ``sca so``, ``sca project`` and ``sca eval``.

Exit codes: 0 when a run completes (whatever the component statuses), 1 for
usage, configuration and I/O errors, 2 when a replay cassette lacks a request.
Only the JSON document goes to stdout; logs go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from tplscout import __version__
from tplscout.backends import MODES, build_backends, replay_backends
from tplscout.backends.cassette import Cassette
from tplscout.elf_evidence import StringExtractionConfig
from tplscout.errors import ConfigError, ReplayMiss, ScaError
from tplscout.evalharness import load_manifest, run_eval
from tplscout.model import DEFAULT_MIN_STRING_LENGTH, MAX_ITERATIONS
from tplscout.pipeline import FixedClock, PipelineConfig, SystemClock, run_project, run_so
from tplscout.sbom import dumps as sbom_dumps

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("tplscout")

EXIT_OK, EXIT_USAGE, EXIT_REPLAY_MISS = 0, 1, 2

# Flag defaults. They live here rather than in argparse so that a config file
# can sit between the built-in value and an explicit command-line flag.
DEFAULTS = {
    "backend": "replay",
    "cassette": None,
    "max_loops": MAX_ITERATIONS,
    "search_pages": 2,
    "min_string_len": DEFAULT_MIN_STRING_LENGTH,
    "top_k": 3,
    "format": "json",
    "verbose": False,
    "jobs": None,
}
_INT_KEYS = {"max_loops", "search_pages", "min_string_len", "top_k", "jobs"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _common(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("common options")
    g.add_argument("--backend", choices=MODES, default=None, help="service mode (default: replay)")
    g.add_argument("--cassette", type=Path, default=None, help="cassette file for replay or record")
    g.add_argument("--max-loops", type=int, default=None, metavar="N", help="validation iterations, 1-3 (default: 3)")
    g.add_argument("--search-pages", type=int, default=None, metavar="N", help="result pages per query (default: 2)")
    g.add_argument("--min-string-len", type=int, default=None, metavar="N",
                   help="shortest binary string kept as evidence (default: 10)")
    g.add_argument("--top-k", type=int, default=None, metavar="N", help="candidates shown to the validator (default: 3)")
    g.add_argument("--format", choices=["json"], default=None, help="output format (only json for now)")
    g.add_argument("--jobs", type=int, default=None, metavar="N", help="libraries analyzed in parallel")
    g.add_argument("--config", type=Path, default=None, help="TOML or JSON file with option defaults")
    g.add_argument("-v", "--verbose", action="store_true", default=None, help="debug logging on stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sca", description="Identify the origin of third-party native libraries.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("so", help="analyze one shared-object file")
    p.add_argument("file", type=Path)
    p.add_argument("--out", type=Path, default=None, help="write the SBOM here instead of stdout")
    _common(p)

    p = sub.add_parser("project", help="find and analyze libraries vendored in a source tree")
    p.add_argument("dir", type=Path)
    p.add_argument("--out", type=Path, default=None, help="write the SBOM here instead of stdout")
    _common(p)

    p = sub.add_parser("eval", help="run a labeled case manifest and report metrics")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--report", type=Path, default=None, help="write the report here instead of stdout")
    _common(p)
    return parser


def load_config_file(path: Path) -> dict:
    """Read option defaults; keys are flag names with or without dashes."""
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"--config: cannot read {path}: {exc.strerror or exc}") from None
    try:
        data = json.loads(raw) if path.suffix.lower() == ".json" else tomllib.loads(raw.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(f"--config: cannot parse {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"--config: {path} must hold a table of options")
    out = {}
    for key, value in data.items():
        name = key.replace("-", "_")
        if name not in DEFAULTS:
            raise ConfigError(f"--config: unknown option {key!r}")
        if name in _INT_KEYS and (isinstance(value, bool) or not isinstance(value, int)):
            raise ConfigError(f"--config: option {key!r} must be an integer")
        out[name] = value
    if out.get("backend") is not None and out["backend"] not in MODES:
        raise ConfigError(f"--config: backend must be one of {', '.join(MODES)}")
    if out.get("cassette") is not None:
        out["cassette"] = (path.parent / out["cassette"]).resolve()
    return out


def resolve_options(args: argparse.Namespace) -> dict:
    opts = dict(DEFAULTS)
    if args.config is not None:
        opts.update(load_config_file(args.config))
    for name in DEFAULTS:
        value = getattr(args, name, None)
        if value is not None:
            opts[name] = value
    return opts


def pipeline_config(opts: dict) -> PipelineConfig:
    try:
        return PipelineConfig(max_feedback_loops=opts["max_loops"], search_pages=opts["search_pages"],
                              validator_top_k=opts["top_k"])
    except ValueError as exc:
        flag = str(exc).split()[0]
        names = {"max_feedback_loops": "--max-loops", "search_pages": "--search-pages", "validator_top_k": "--top-k"}
        raise ConfigError(f"{names.get(flag, flag)}: {exc}") from None


def string_config(opts: dict) -> StringExtractionConfig:
    try:
        return StringExtractionConfig(min_keep_length=opts["min_string_len"])
    except ValueError as exc:
        raise ConfigError(f"--min-string-len: {exc}") from None


def _epoch_clock(default: datetime | None):
    """Pick the document timestamp: SOURCE_DATE_EPOCH, then the replay cassette's date, then now."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH", "").strip()
    if epoch:
        try:
            return FixedClock(datetime.fromtimestamp(int(epoch), timezone.utc))
        except ValueError:
            raise ConfigError(f"SOURCE_DATE_EPOCH must be an integer, got {epoch!r}") from None
    if default is not None:
        return _ReplayClock(default)
    return SystemClock()


class _ReplayClock(SystemClock):
    """Real timer for wall-time accounting, fixed wall-clock date for the document."""

    def __init__(self, at: datetime):
        self.at = at

    def now(self) -> datetime:
        return self.at


def _open_backends(opts: dict):
    if opts["backend"] != "replay":
        return build_backends(opts["backend"], opts["cassette"]), None
    if opts["cassette"] is None:
        raise ConfigError("--cassette is required with --backend replay")
    try:
        cassette = Cassette.load(opts["cassette"])
    except OSError as exc:
        raise ConfigError(f"--cassette: cannot read {opts['cassette']}: {exc.strerror or exc}") from None
    except ValueError as exc:
        raise ConfigError(f"--cassette: {exc}") from None
    try:
        recorded = datetime.strptime(cassette.created_at, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)
    except (TypeError, ValueError):
        recorded = None
    return replay_backends(cassette), recorded


def _write(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    log.info("wrote %s", path)


def _run(args: argparse.Namespace, opts: dict) -> None:
    cfg = pipeline_config(opts)
    string_cfg = string_config(opts)
    if args.command == "so" and not args.file.is_file():
        raise ConfigError(f"input file not found: {args.file}")
    if args.command == "project" and not args.dir.is_dir():
        raise ConfigError(f"input directory not found: {args.dir}")
    manifest = load_manifest(args.manifest) if args.command == "eval" else None
    if opts["jobs"] is not None and opts["jobs"] < 1:
        raise ConfigError("--jobs must be >= 1")

    backends, recorded = _open_backends(opts)
    clock = _epoch_clock(recorded)
    try:
        if args.command == "so":
            _write(sbom_dumps(run_so(args.file, cfg, backends, string_cfg=string_cfg, clock=clock)), args.out)
        elif args.command == "project":
            doc = run_project(args.dir, cfg, backends, clock=clock, jobs=opts["jobs"])
            if not doc.components:
                log.warning("no third-party libraries found; the SBOM is empty")
            _write(sbom_dumps(doc), args.out)
        else:
            report = run_eval(manifest, cfg, backends, clock=clock, jobs=opts["jobs"] or 1, string_cfg=string_cfg)
            _write(report.dumps(), args.report)
    finally:
        backends.close()


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        opts = resolve_options(args)
    except UsageError as exc:
        print(f"sca: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"sca: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    logging.basicConfig(level=logging.DEBUG if opts["verbose"] else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        _run(args, opts)
    except ReplayMiss as exc:
        print(f"sca: replay miss: {exc}", file=sys.stderr)
        return EXIT_REPLAY_MISS
    except ScaError as exc:
        print(f"sca: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"sca: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
