"""Thin subprocess wrappers over the git CLI.

All repository access is read-only and goes through the porcelain/plumbing
commands the analysis is defined on: tag and branch listing, ancestry tests
(``merge-base --is-ancestor``), first-parent traversal (``rev-list
--first-parent``), tree listing, blob reads, and similarity-based rename
detection (``diff -M``).
"""

from __future__ import annotations

import subprocess
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .errors import SnapshotError


class GitError(RuntimeError):
    pass


def _run(repo: str | Path, *args: str, check: bool = True) -> str:
    proc = subprocess.run(
        ["git", "-C", str(repo), *args],
        capture_output=True,
        text=True,
    )
    if check and proc.returncode != 0:
        raise GitError(f"git {' '.join(args)} failed in {repo}: {proc.stderr.strip()}")
    return proc.stdout


@dataclass(frozen=True)
class TagInfo:
    name: str
    commit: str
    timestamp: datetime
    message: str  # annotated-tag message, empty for lightweight tags


def list_tags(repo: str | Path) -> list[TagInfo]:
    """All tags with their peeled commit, commit timestamp, and tag message."""
    fmt = "%(refname:short)%00%(objectname)%00%(*objectname)%00%(contents)%01"
    out = _run(repo, "for-each-ref", "refs/tags", f"--format={fmt}")
    tags: list[TagInfo] = []
    for chunk in out.split("\x01"):
        chunk = chunk.lstrip("\n")
        if not chunk.strip():
            continue
        name, objectname, peeled, message = chunk.split("\x00", 3)
        commit = peeled or objectname
        tags.append(TagInfo(name, commit, _commit_time(repo, commit), message.strip()))
    return sorted(tags, key=lambda t: t.name)


def _commit_time(repo: str | Path, commit: str) -> datetime:
    iso = _run(repo, "show", "-s", "--format=%cI", commit).strip().splitlines()[-1]
    return datetime.fromisoformat(iso).astimezone(timezone.utc)


def list_branches(repo: str | Path) -> list[tuple[str, str]]:
    """(branch name, tip commit) pairs, sorted by name."""
    out = _run(repo, "for-each-ref", "refs/heads", "--format=%(refname:short)%00%(objectname)")
    branches = []
    for line in out.splitlines():
        if not line.strip():
            continue
        name, tip = line.split("\x00")
        branches.append((name, tip))
    return sorted(branches)


def is_ancestor(repo: str | Path, ancestor: str, descendant: str) -> bool:
    proc = subprocess.run(
        ["git", "-C", str(repo), "merge-base", "--is-ancestor", ancestor, descendant],
        capture_output=True,
    )
    return proc.returncode == 0


def first_parent_commits(repo: str | Path, tip: str) -> list[str]:
    """First-parent history of ``tip``, oldest first."""
    out = _run(repo, "rev-list", "--first-parent", tip)
    return list(reversed(out.split()))


def list_python_files(repo: str | Path, commit: str) -> list[str]:
    try:
        out = _run(repo, "ls-tree", "-r", "--name-only", commit)
    except GitError as exc:
        raise SnapshotError(str(exc)) from exc
    return sorted(p for p in out.splitlines() if p.endswith(".py"))


def read_file(repo: str | Path, commit: str, path: str) -> bytes | None:
    """Blob bytes at a revision, or None when the path does not exist there."""
    proc = subprocess.run(
        ["git", "-C", str(repo), "show", f"{commit}:{path}"],
        capture_output=True,
    )
    if proc.returncode != 0:
        return None
    return proc.stdout


def read_text_file(repo: str | Path, commit: str, path: str) -> str | None:
    data = read_file(repo, commit, path)
    if data is None:
        return None
    return data.decode("utf-8", errors="replace")


@dataclass(frozen=True)
class FileChange:
    status: str  # "A", "D", "M", "R"
    path: str        # path on the new side ("" for deletions)
    old_path: str    # path on the old side ("" for added files)


def diff_changes(repo: str | Path, old: str, new: str) -> list[FileChange]:
    """Name-status diff with similarity-based rename detection at git defaults."""
    out = _run(repo, "diff", "--name-status", "-M", old, new)
    changes: list[FileChange] = []
    for line in out.splitlines():
        if not line.strip():
            continue
        parts = line.split("\t")
        status = parts[0]
        if status.startswith("R") and len(parts) >= 3:
            changes.append(FileChange("R", parts[2], parts[1]))
        elif status == "A":
            changes.append(FileChange("A", parts[1], ""))
        elif status == "D":
            changes.append(FileChange("D", "", parts[1]))
        else:
            changes.append(FileChange("M", parts[1], parts[1]))
    return changes


def rename_map(repo: str | Path, old: str, new: str) -> dict[str, str]:
    """old-path -> new-path for files git detects as renamed between commits."""
    return {c.old_path: c.path for c in diff_changes(repo, old, new) if c.status == "R"}


def commit_message(repo: str | Path, commit: str) -> str:
    return _run(repo, "show", "-s", "--format=%B", commit).strip()


def commit_parent(repo: str | Path, commit: str) -> str | None:
    out = _run(repo, "rev-list", "--parents", "-n", "1", commit).split()
    return out[1] if len(out) > 1 else None


def added_diff_lines(repo: str | Path, old: str, new: str, path: str) -> str:
    """Concatenated added lines of one file's diff between two commits."""
    out = _run(repo, "diff", old, new, "--", path, check=False)
    added = [
        line[1:]
        for line in out.splitlines()
        if line.startswith("+") and not line.startswith("+++")
    ]
    return "\n".join(added)
