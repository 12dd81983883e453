"""Identity evidence for third-party code vendored into a C/C++ source tree."""

from __future__ import annotations

import logging
import os
import posixpath
from dataclasses import dataclass
from pathlib import Path, PurePosixPath

from tplscout.model import Evidence, EvidenceKind, FileExcerpt

log = logging.getLogger(__name__)

INDENT = "    "
MAX_FILES_TO_INSPECT = 5
DEFAULT_EXTENSIONS = frozenset({".c", ".cc", ".cpp", ".h", ".hpp", ".txt", ".md", ".cmake"})
_BARE_NAMES = ("LICENSE", "COPYING")


def truncation_marker(max_entries: int) -> str:
    return f"[... truncated at {max_entries} entries]"


@dataclass(frozen=True)
class TreeDumpConfig:
    max_depth: int = 4
    include_extensions: frozenset[str] = DEFAULT_EXTENSIONS
    max_entries: int = 2000
    per_file_byte_cap: int = 8192

    def __post_init__(self) -> None:
        object.__setattr__(self, "include_extensions", frozenset(e.lower() for e in self.include_extensions))
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.per_file_byte_cap < 256:
            raise ValueError("per_file_byte_cap must be >= 256")
        if self.max_entries < 1:
            raise ValueError("max_entries must be >= 1")

    def includes_file(self, name: str) -> bool:
        suffix = PurePosixPath(name).suffix.lower()
        if suffix:
            return suffix in self.include_extensions
        upper = name.upper()
        return upper in _BARE_NAMES or upper.startswith("README")


@dataclass(frozen=True)
class TplCandidate:
    name: str
    root_path: str
    files_to_inspect: tuple[str, ...]
    agent_rationale: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "files_to_inspect", tuple(self.files_to_inspect))
        if not 1 <= len(self.files_to_inspect) <= MAX_FILES_TO_INSPECT:
            raise ValueError(f"candidate {self.name!r} needs 1..{MAX_FILES_TO_INSPECT} files to inspect")


def _walk(directory: Path, depth: int, cfg: TreeDumpConfig):
    try:
        entries = sorted(os.scandir(directory), key=lambda e: e.name)
    except OSError as exc:
        log.warning("cannot list %s: %s", directory, exc)
        return
    for entry in entries:
        if entry.name.startswith("."):
            continue
        if entry.is_dir(follow_symlinks=False):
            yield depth, entry.name + "/"
            if depth < cfg.max_depth:
                yield from _walk(Path(entry.path), depth + 1, cfg)
        elif entry.is_file() and cfg.includes_file(entry.name):
            yield depth, entry.name


def dump_tree(project_root: str | Path, cfg: TreeDumpConfig = TreeDumpConfig()) -> str:
    """Render a sorted, indented listing of ``project_root`` in the style of ``tree``.

    The first line names the root; each following line is one entry indented
    four spaces per level. Hidden entries are skipped, only files matching the
    extension filter are listed, and listing stops after ``max_entries``
    entries with a marker line.
    """
    root = Path(project_root)
    if not root.is_dir():
        raise NotADirectoryError(f"not a directory: {root}")
    lines = [(root.resolve().name or str(root)) + "/"]
    count = 0
    for depth, label in _walk(root, 1, cfg):
        if count == cfg.max_entries:
            lines.append(truncation_marker(cfg.max_entries))
            break
        lines.append(INDENT * depth + label)
        count += 1
    return "\n".join(lines)


def tree_paths(tree_text: str) -> tuple[set[str], set[str]]:
    """Recover (files, directories) as root-relative POSIX paths from a dump_tree listing."""
    files: set[str] = set()
    dirs: set[str] = set()
    stack: list[str] = []
    for line in tree_text.splitlines()[1:]:
        stripped = line.lstrip(" ")
        if not stripped or stripped.startswith("[... truncated"):
            continue
        depth = (len(line) - len(stripped)) // len(INDENT)
        del stack[max(depth - 1, 0):]
        if stripped.endswith("/"):
            name = stripped[:-1]
            stack.append(name)
            dirs.add("/".join(stack))
        else:
            files.add("/".join(stack + [stripped]))
    return files, dirs


def _clean_rel(path: str) -> str:
    norm = posixpath.normpath(path.replace("\\", "/").strip()).lstrip("/")
    return "" if norm == "." else norm


def repair_candidate(raw_name: str, raw_root: str, raw_files: list[str], rationale: str,
                     files: set[str], dirs: set[str]) -> TplCandidate | None:
    """Keep only files that exist in the listing; drop the candidate if none survive."""
    root = _clean_rel(raw_root)
    kept: list[str] = []
    for raw in raw_files:
        rel = _clean_rel(raw)
        options = [rel]
        if root:
            options.append(posixpath.join(root, rel))
        for option in options:
            if option in files and option not in kept:
                kept.append(option)
                break
        else:
            log.info("dropping nonexistent path %r for candidate %r", raw, raw_name)
    if root not in dirs:
        root = posixpath.commonpath([posixpath.dirname(p) or "." for p in kept]) if kept else ""
        root = "" if root == "." else root
    kept = [p for p in kept if not root or p.startswith(root + "/")][:MAX_FILES_TO_INSPECT]
    if not kept:
        return None
    name = raw_name.strip() or posixpath.basename(root) or "unknown"
    return TplCandidate(name=name, root_path=root, files_to_inspect=tuple(kept), agent_rationale=rationale)


def select_tpl_candidates(tree_text: str, llm) -> list[TplCandidate]:
    from tplscout.agents import a0_select_candidates

    if not tree_text.strip():
        raise ValueError("tree_text must be non-empty")
    files, dirs = tree_paths(tree_text)
    if not files and not dirs:
        return []  # a bare root line gives the selector nothing to choose from
    reply = a0_select_candidates(tree_text, llm)
    candidates = []
    for item in reply.parsed:
        cand = repair_candidate(item["name"], item.get("root", ""), item["files"], item.get("rationale", ""),
                                files, dirs)
        if cand is not None:
            candidates.append(cand)
    return candidates


def read_head(path: Path, cap: int) -> FileExcerpt:
    """Read at most ``cap`` UTF-8 bytes from the head of a file, cut on a character boundary."""
    with open(path, "rb") as fh:
        data = fh.read(cap + 1)
    truncated = len(data) > cap
    head = data[:cap]
    if truncated:
        # Drop a partial multi-byte sequence at the cut.
        for trim in range(4):
            try:
                text = head[: len(head) - trim].decode("utf-8")
                break
            except UnicodeDecodeError:
                continue
        else:
            text = head.decode("utf-8", errors="replace")
    else:
        text = head.decode("utf-8", errors="replace")
    encoded = text.encode("utf-8")
    if len(encoded) > cap:
        text = encoded[:cap].decode("utf-8", errors="ignore")
        truncated = True
    return FileExcerpt(path=path.name, content=text, truncated=truncated)


def extract_source_evidence(project_root: str | Path, candidate: TplCandidate,
                            cfg: TreeDumpConfig = TreeDumpConfig()) -> Evidence:
    root = Path(project_root)
    sub = root / candidate.root_path if candidate.root_path else root
    tree_text = dump_tree(sub, cfg)
    excerpts: list[FileExcerpt] = []
    skipped: list[str] = []
    for rel in candidate.files_to_inspect:
        try:
            ex = read_head(root / rel, cfg.per_file_byte_cap)
        except OSError as exc:
            skipped.append(f"{rel}: {exc.strerror or exc}")
            log.warning("skipping unreadable %s: %s", rel, exc)
            continue
        excerpts.append(FileExcerpt(path=rel, content=ex.content, truncated=ex.truncated))
    if not excerpts:
        log.warning("EmptyEvidence: no readable files for candidate %s", candidate.name)
    return Evidence(
        kind=EvidenceKind.CPP_SOURCE_CLONE,
        name_hint=candidate.name,
        tree_text=tree_text,
        file_excerpts=tuple(excerpts),
        origin_artifact=str(sub),
        empty=not excerpts,
        skipped=tuple(skipped),
        excerpt_byte_cap=cfg.per_file_byte_cap,
    )
