"""Release-line reconstruction and per-release PTM snapshots.

A release line is the ordered sequence of tags that sit on one branch's
first-parent history; tags reachable only through merged side branches are
excluded from that line. Release-quality filtering removes prereleases and
rejects repositories with too few releases, irregular release intervals,
no recent release, or poor SemVer tag compliance. Snapshots aggregate the
per-file occurrence multisets at each tagged revision, with file identity
carried across renames so migration logic sees a renamed file as the same
logical file.
"""

from __future__ import annotations

import json
import re
import statistics
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import gitio
from .catalog import PtmIndex, SignatureCatalog
from .errors import AmbiguousCoverageError, NoReleasesError, SnapshotError
from .extraction import FileSnapshot, FilterConfig, apply_fp_filters, extract_occurrences

# Optional leading "v", MAJOR.MINOR.PATCH, optional -prerelease and +build.
_SEMVER_RE = re.compile(
    r"^v?(?P<major>\d+)\.(?P<minor>\d+)\.(?P<patch>\d+)"
    r"(?:-(?P<prerelease>[0-9A-Za-z.-]+))?"
    r"(?:\+(?P<build>[0-9A-Za-z.-]+))?$"
)


@dataclass(frozen=True)
class SemVer:
    major: int
    minor: int
    patch: int
    prerelease: str | None = None
    build: str | None = None


def parse_semver(tag: str) -> SemVer | None:
    m = _SEMVER_RE.match(tag)
    if not m:
        return None
    return SemVer(
        int(m.group("major")),
        int(m.group("minor")),
        int(m.group("patch")),
        m.group("prerelease"),
        m.group("build"),
    )


@dataclass(frozen=True)
class Release:
    tag: str
    commit: str
    timestamp: datetime
    semver: SemVer | None
    is_prerelease: bool
    is_draft: bool
    notes: str = ""  # annotated-tag or sidecar release text


@dataclass
class ReleaseLine:
    repo: str
    branch: str
    releases: list[Release]
    first_parent: list[str] = field(default_factory=list)  # oldest first

    @property
    def line_id(self) -> str:
        return f"{self.repo}:{self.branch}"

    def __len__(self) -> int:
        return len(self.releases)


@dataclass
class LineResult:
    lines: list[ReleaseLine]
    unassigned_tags: list[str]


def load_release_sidecar(path: str | Path) -> dict[str, dict]:
    """Release metadata sidecar: JSON-lines of tag, is_draft, is_prerelease, published_at."""
    records: dict[str, dict] = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        raw = raw.strip()
        if not raw:
            continue
        rec = json.loads(raw)
        records[rec["tag"]] = rec
    return records


def _build_release(tag: gitio.TagInfo, sidecar: dict[str, dict] | None) -> Release:
    meta = (sidecar or {}).get(tag.name, {})
    semver = parse_semver(tag.name)
    prerelease = bool(meta.get("is_prerelease", False))
    if semver is not None and semver.prerelease is not None:
        prerelease = True
    timestamp = tag.timestamp
    published = meta.get("published_at")
    if published:
        timestamp = datetime.fromisoformat(published).astimezone(timezone.utc)
    return Release(
        tag=tag.name,
        commit=tag.commit,
        timestamp=timestamp,
        semver=semver,
        is_prerelease=prerelease,
        is_draft=bool(meta.get("is_draft", False)),
        notes=meta.get("body", tag.message),
    )


def identify_release_lines(
    repo: str | Path, sidecar: dict[str, dict] | None = None
) -> LineResult:
    """Reconstruct release lines from branch first-parent histories.

    A branch is a candidate when at least one tag commit is its ancestor.
    Tags are assigned to a line by their position in the branch's
    first-parent sequence; lines with fewer than two releases are dropped,
    and tags that land on no line are reported as unassigned.
    """
    repo = Path(repo)
    tags = gitio.list_tags(repo)
    if not tags:
        raise NoReleasesError(f"{repo} has no tags")
    branches = gitio.list_branches(repo)
    tag_commits = {t.commit for t in tags}
    candidates = [
        (name, tip)
        for name, tip in branches
        if any(gitio.is_ancestor(repo, c, tip) for c in tag_commits)
    ]
    if not candidates:
        raise AmbiguousCoverageError(f"{repo}: no branch covers any tag")

    lines: list[ReleaseLine] = []
    assigned: set[str] = set()
    repo_name = repo.name
    for branch, tip in candidates:
        sequence = gitio.first_parent_commits(repo, tip)
        position = {commit: i for i, commit in enumerate(sequence)}
        on_line = [t for t in tags if t.commit in position]
        on_line.sort(key=lambda t: (position[t.commit], t.name))
        if len(on_line) < 2:
            continue
        releases = [_build_release(t, sidecar) for t in on_line]
        lines.append(ReleaseLine(repo_name, branch, releases, sequence))
        assigned.update(t.name for t in on_line)
    unassigned = sorted(t.name for t in tags if t.name not in assigned)
    return LineResult(lines, unassigned)


@dataclass(frozen=True)
class ReleasePolicy:
    """Thresholds for the release-quality screen (non-paper defaults documented)."""

    min_interval_days: float = 7.0
    max_interval_days: float = 365.0
    recency_cutoff: datetime | None = None
    semver_ratio: float = 0.8
    max_releases_per_year: float = 52.0
    min_releases_per_year: float = 1.0 / 3.0


@dataclass
class Rejection:
    subject: str  # tag name or "<repo>"
    rule: str
    detail: str


@dataclass
class FilterOutcome:
    kept: list[Release]
    rejections: list[Rejection]

    @property
    def accepted(self) -> bool:
        return bool(self.kept)


def filter_releases(releases: list[Release], policy: ReleasePolicy) -> FilterOutcome:
    """Apply the release-based exclusion rules; rejections are data, not faults.

    Drafts and prereleases are removed individually. The remaining set is
    rejected wholesale when fewer than two releases survive, the median
    inter-release interval falls outside the policy bounds, release activity
    is outside the configured rate band, nothing was released after the
    recency cutoff, or SemVer tag compliance is below the ratio threshold.
    Idempotent: re-filtering the survivors changes nothing.
    """
    rejections: list[Rejection] = []
    kept: list[Release] = []
    for rel in releases:
        prerelease = rel.is_prerelease or (
            rel.semver is not None and rel.semver.prerelease is not None
        )
        if rel.is_draft:
            rejections.append(Rejection(rel.tag, "draft", "draft release excluded"))
        elif prerelease:
            rejections.append(Rejection(rel.tag, "prerelease", "prerelease tag excluded"))
        else:
            kept.append(rel)

    def reject_all(rule: str, detail: str) -> FilterOutcome:
        rejections.append(Rejection("<repo>", rule, detail))
        return FilterOutcome([], rejections)

    if len(kept) < 2:
        return reject_all("too-few-releases", f"{len(kept)} release(s) remain after exclusions")

    times = sorted(r.timestamp for r in kept)
    intervals = [
        (b - a).total_seconds() / 86400.0 for a, b in zip(times, times[1:])
    ]
    median_interval = statistics.median(intervals)
    if not (policy.min_interval_days <= median_interval <= policy.max_interval_days):
        return reject_all(
            "median-interval",
            f"median inter-release interval {median_interval:.1f}d outside "
            f"[{policy.min_interval_days:g}, {policy.max_interval_days:g}]",
        )

    span_years = (times[-1] - times[0]).total_seconds() / (86400.0 * 365.25)
    rate = len(kept) / span_years if span_years > 0 else float("inf")
    if rate > policy.max_releases_per_year:
        return reject_all("activity-high", f"{rate:.1f} releases/year exceeds cap")
    if rate < policy.min_releases_per_year:
        return reject_all("activity-low", f"{rate:.2f} releases/year below floor")

    if policy.recency_cutoff is not None and all(
        r.timestamp < policy.recency_cutoff for r in kept
    ):
        return reject_all(
            "recency", f"no release on or after {policy.recency_cutoff.date().isoformat()}"
        )

    compliant = sum(1 for r in kept if r.semver is not None)
    ratio = compliant / len(kept)
    if ratio < policy.semver_ratio:
        return reject_all(
            "semver-ratio", f"SemVer compliance {ratio:.2f} below {policy.semver_ratio:g}"
        )
    return FilterOutcome(kept, rejections)


@dataclass
class ReleaseSnapshot:
    """Release-level PTM multiset: the count-preserving sum of file snapshots."""

    release: Release
    files: list[FileSnapshot]

    @property
    def ptms(self) -> dict[str, int]:
        totals: dict[str, int] = {}
        for snap in self.files:
            for ptm, n in snap.counts.items():
                totals[ptm] = totals.get(ptm, 0) + n
        return totals

    @property
    def total(self) -> int:
        return sum(len(f) for f in self.files)


def snapshot_release(
    repo: str | Path,
    release: Release,
    catalog: SignatureCatalog,
    index: PtmIndex,
    filter_config: FilterConfig | None = None,
) -> ReleaseSnapshot:
    """Run the extractor over every Python file at the release revision."""
    repo = Path(repo)
    files: list[FileSnapshot] = []
    try:
        paths = gitio.list_python_files(repo, release.commit)
    except gitio.GitError as exc:
        raise SnapshotError(str(exc)) from exc
    for path in paths:
        blob = gitio.read_file(repo, release.commit, path)
        if blob is None:
            continue
        snap = extract_occurrences(
            blob, file_path=path, revision=release.commit, catalog=catalog, index=index
        )
        snap = apply_fp_filters(snap, filter_config)
        if snap.occurrences or snap.diagnostics or snap.drops:
            files.append(snap)
    return ReleaseSnapshot(release, files)


def assign_logical_ids(repo: str | Path, line: ReleaseLine) -> list[dict[str, str]]:
    """Per-release maps physical-path -> logical-id along one line.

    The logical id of a file is its path at first appearance in the line;
    renames detected between consecutive releases chain the identity
    forward. Ties in rename detection are left to git's similarity matcher.
    """
    repo = Path(repo)
    maps: list[dict[str, str]] = []
    current: dict[str, str] = {}
    for i, release in enumerate(line.releases):
        paths = gitio.list_python_files(repo, release.commit)
        if i == 0:
            current = {p: p for p in paths}
        else:
            prev_commit = line.releases[i - 1].commit
            renames = gitio.rename_map(repo, prev_commit, release.commit)
            nxt: dict[str, str] = {}
            inverted = {new: old for old, new in sorted(renames.items())}
            for p in paths:
                if p in inverted:
                    old = inverted[p]
                    nxt[p] = current.get(old, old)
                elif p in current:
                    nxt[p] = current[p]
                else:
                    nxt[p] = p
            current = nxt
        maps.append(dict(current))
    return maps


def attach_logical_ids(snapshot: ReleaseSnapshot, mapping: dict[str, str]) -> None:
    for snap in snapshot.files:
        snap.logical_file = mapping.get(snap.file_path, snap.file_path)


@dataclass(frozen=True)
class CommitFileChange:
    """Per-commit, per-logical-file occurrence delta within a release pair."""

    commit: str
    logical_file: str
    added: tuple[tuple[str, int], ...]    # (ptm_id, line in new revision)
    removed: tuple[tuple[str, int], ...]  # (ptm_id, line in old revision)


def _instance_diff(
    before: list[tuple[str, int]], after: list[tuple[str, int]]
) -> tuple[list[tuple[str, int]], list[tuple[str, int]]]:
    """Match same-id occurrence lines across two revisions of one file.

    Greedy nearest-line matching per identifier; unmatched old instances are
    removals, unmatched new instances are additions.
    """
    removed: list[tuple[str, int]] = []
    added: list[tuple[str, int]] = []
    ids = {p for p, _ in before} | {p for p, _ in after}
    for ptm in sorted(ids):
        old_lines = sorted(l for p, l in before if p == ptm)
        new_lines = sorted(l for p, l in after if p == ptm)
        pairs = sorted(
            ((abs(a - b), b, a) for b in old_lines for a in new_lines),
            key=lambda t: (t[0], t[1], t[2]),
        )
        used_old: set[int] = set()
        used_new: set[int] = set()
        for _, b, a in pairs:
            if b in used_old or a in used_new:
                continue
            used_old.add(b)
            used_new.add(a)
        removed.extend((ptm, l) for l in old_lines if l not in used_old)
        added.extend((ptm, l) for l in new_lines if l not in used_new)
    return removed, added


def window_commits(line: ReleaseLine, pair_index: int) -> list[str]:
    """First-parent commits after release i up to and including release i+1."""
    start = line.releases[pair_index].commit
    end = line.releases[pair_index + 1].commit
    seq = line.first_parent
    i, j = seq.index(start), seq.index(end)
    return seq[i + 1 : j + 1]


def replay_pair_changes(
    repo: str | Path,
    line: ReleaseLine,
    pair_index: int,
    catalog: SignatureCatalog,
    index: PtmIndex,
    filter_config: FilterConfig | None,
    start_logical: dict[str, str],
) -> list[CommitFileChange]:
    """Replay the pair's commit window and localize occurrence changes.

    Walks the first-parent commits between the two releases, extracting each
    touched file before and after every commit, and returns per-commit
    instance-level additions and removals keyed by logical file id.
    """
    repo = Path(repo)
    changes: list[CommitFileChange] = []
    logical = dict(start_logical)
    prev = line.releases[pair_index].commit
    cache: dict[tuple[str, str], list[tuple[str, int]]] = {}

    def occ_lines(commit: str, path: str) -> list[tuple[str, int]]:
        key = (commit, path)
        if key not in cache:
            blob = gitio.read_file(repo, commit, path)
            if blob is None:
                cache[key] = []
            else:
                snap = extract_occurrences(
                    blob, file_path=path, revision=commit, catalog=catalog, index=index
                )
                snap = apply_fp_filters(snap, filter_config)
                cache[key] = [(o.ptm_id, o.line) for o in snap.occurrences]
        return cache[key]

    for commit in window_commits(line, pair_index):
        step_logical = dict(logical)
        for change in gitio.diff_changes(repo, prev, commit):
            new_path = change.path
            old_path = change.old_path or change.path
            if change.status == "R":
                step_logical[new_path] = logical.get(old_path, old_path)
            elif change.status == "A" and new_path not in step_logical:
                step_logical[new_path] = new_path
            if not (new_path.endswith(".py") or old_path.endswith(".py")):
                continue
            before = occ_lines(prev, old_path) if change.status != "A" else []
            after = occ_lines(commit, new_path) if change.status != "D" else []
            removed, added = _instance_diff(before, after)
            if removed or added:
                logical_id = step_logical.get(new_path or old_path,
                                              logical.get(old_path, old_path))
                changes.append(
                    CommitFileChange(commit, logical_id, tuple(added), tuple(removed))
                )
        logical = step_logical
        prev = commit
    return changes
