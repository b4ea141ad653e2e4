"""PTM change detection between consecutive releases.

The release pair delta is a per-identifier count difference over the two
snapshot multisets. Total added instances A, removed instances R, and the
migration-candidate bound U = min(A, R) follow directly. Candidates pair a
removed and an added identifier whose count changes land in the same
logical file and the same commit; they become migration events only when a
human annotation confirms them, otherwise they dissolve back into
independent addition and removal events. The analysis window of a line is
anchored at the first release with a non-empty snapshot (t1).
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

from .errors import EmptyLineResult, UnknownAnnotationWarning
from .history import CommitFileChange


class ChangeKind(str, enum.Enum):
    ADDITION = "addition"
    REMOVAL = "removal"
    MIGRATION = "migration"


@dataclass(frozen=True)
class ReleasePairDelta:
    line_id: str
    pair_index: int
    from_tag: str
    to_tag: str
    deltas: Mapping[str, int]
    A: int
    R: int
    U: int


def _counts(snapshot) -> Mapping[str, int]:
    if hasattr(snapshot, "ptms"):
        return snapshot.ptms
    return snapshot


def diff_pair(
    prev,
    nxt,
    *,
    line_id: str = "",
    pair_index: int = 0,
    from_tag: str = "",
    to_tag: str = "",
) -> ReleasePairDelta:
    """Compute the multiset delta between two adjacent release snapshots.

    Accepts ReleaseSnapshot objects or plain {ptm_id: count} mappings.
    """
    prev_counts = _counts(prev)
    next_counts = _counts(nxt)
    deltas: dict[str, int] = {}
    for ptm in sorted(set(prev_counts) | set(next_counts)):
        deltas[ptm] = next_counts.get(ptm, 0) - prev_counts.get(ptm, 0)
    added = sum(d for d in deltas.values() if d > 0)
    removed = sum(-d for d in deltas.values() if d < 0)
    return ReleasePairDelta(
        line_id=line_id,
        pair_index=pair_index,
        from_tag=getattr(getattr(prev, "release", None), "tag", from_tag),
        to_tag=getattr(getattr(nxt, "release", None), "tag", to_tag),
        deltas=deltas,
        A=added,
        R=removed,
        U=min(added, removed),
    )


@dataclass(frozen=True)
class MigrationCandidate:
    ptm_from: str
    ptm_to: str
    file: str
    commit: str
    from_line: int
    to_line: int


@dataclass(frozen=True)
class ChangeEvent:
    kind: ChangeKind
    ptm_from: str | None
    ptm_to: str | None
    file: str
    commit: str
    line_id: str
    pair_index: int
    line: int | None = None
    first_adoption: bool = False

    def __post_init__(self):
        if self.kind is ChangeKind.MIGRATION:
            if not (self.ptm_from and self.ptm_to):
                raise ValueError("migration event needs both ptm_from and ptm_to")
        elif self.kind is ChangeKind.ADDITION:
            if self.ptm_from is not None or not self.ptm_to:
                raise ValueError("addition event carries only ptm_to")
        elif self.kind is ChangeKind.REMOVAL:
            if self.ptm_to is not None or not self.ptm_from:
                raise ValueError("removal event carries only ptm_from")


@dataclass
class _Instance:
    ptm: str
    file: str
    commit: str
    line: int
    consumed: bool = False


def _eligible_instances(
    delta: ReleasePairDelta, commit_changes: Sequence[CommitFileChange]
) -> tuple[list[_Instance], list[_Instance]]:
    """Localize the pair-level instance changes via the commit replay.

    Instances are admitted in commit order while the pair-level budget for
    their identifier lasts, so intermediate edits that cancel out across the
    pair produce no instances.
    """
    add_budget = {m: d for m, d in delta.deltas.items() if d > 0}
    rem_budget = {m: -d for m, d in delta.deltas.items() if d < 0}
    additions: list[_Instance] = []
    removals: list[_Instance] = []
    for change in commit_changes:
        for ptm, line in sorted(change.added, key=lambda t: (t[1], t[0])):
            if add_budget.get(ptm, 0) > 0:
                add_budget[ptm] -= 1
                additions.append(_Instance(ptm, change.logical_file, change.commit, line))
        for ptm, line in sorted(change.removed, key=lambda t: (t[1], t[0])):
            if rem_budget.get(ptm, 0) > 0:
                rem_budget[ptm] -= 1
                removals.append(_Instance(ptm, change.logical_file, change.commit, line))
    # Budget left over means the replay could not localize an instance
    # (should not happen on consistent inputs); synthesize placeholders so
    # conservation against A and R still holds.
    for ptm, left in sorted(add_budget.items()):
        for _ in range(left):
            additions.append(_Instance(ptm, "", "", 0))
    for ptm, left in sorted(rem_budget.items()):
        for _ in range(left):
            removals.append(_Instance(ptm, "", "", 0))
    return additions, removals


def find_migration_candidates(
    delta: ReleasePairDelta, commit_changes: Sequence[CommitFileChange]
) -> list[MigrationCandidate]:
    """Pair removed and added instances co-located in one file and commit.

    When several removals and additions co-occur, instances pair by nearest
    line distance between the old and new call sites, ties broken by
    identifier order. At most U candidates can emerge per pair.
    """
    if delta.U == 0:
        return []
    additions, removals = _eligible_instances(delta, commit_changes)
    candidates: list[MigrationCandidate] = []
    by_site: dict[tuple[str, str], tuple[list[_Instance], list[_Instance]]] = {}
    for inst in removals:
        if inst.commit:
            by_site.setdefault((inst.commit, inst.file), ([], []))[0].append(inst)
    for inst in additions:
        if inst.commit:
            by_site.setdefault((inst.commit, inst.file), ([], []))[1].append(inst)

    ordered_sites = sorted(
        by_site.items(), key=lambda kv: (_commit_order(commit_changes, kv[0][0]), kv[0][1])
    )
    for (commit, file), (rems, adds) in ordered_sites:
        pairs = sorted(
            ((abs(r.line - a.line), r.ptm, a.ptm, r, a) for r in rems for a in adds),
            key=lambda t: (t[0], t[1], t[2], t[3].line, t[4].line),
        )
        for _, _, _, r, a in pairs:
            if r.consumed or a.consumed:
                continue
            r.consumed = a.consumed = True
            candidates.append(
                MigrationCandidate(r.ptm, a.ptm, file, commit, r.line, a.line)
            )
    assert len(candidates) <= delta.U
    # Reset consumption marks: confirmation decides what the candidates become.
    for inst in additions + removals:
        inst.consumed = False
    return candidates


def _commit_order(commit_changes: Sequence[CommitFileChange], commit: str) -> int:
    for i, change in enumerate(commit_changes):
        if change.commit == commit:
            return i
    return len(commit_changes)


@dataclass(frozen=True)
class MigrationAnnotation:
    line_id: str
    pair_index: int
    file: str
    commit: str  # "*" matches any commit
    ptm_from: str
    ptm_to: str
    verdict: str  # "Y" | "N"
    note: str = ""


class MigrationAnnotations:
    """Lookup table of human verdicts keyed by candidate identity."""

    def __init__(self, records: Iterable[MigrationAnnotation] = ()):
        self._records = list(records)
        self._used: set[int] = set()

    def lookup(self, line_id: str, pair_index: int, cand: MigrationCandidate) -> str | None:
        for i, rec in enumerate(self._records):
            if (
                rec.line_id == line_id
                and rec.pair_index == pair_index
                and rec.file == cand.file
                and rec.ptm_from == cand.ptm_from
                and rec.ptm_to == cand.ptm_to
                and (rec.commit == "*" or rec.commit == cand.commit)
            ):
                self._used.add(i)
                return rec.verdict
        return None

    def unmatched(self) -> list[MigrationAnnotation]:
        return [r for i, r in enumerate(self._records) if i not in self._used]

    def __len__(self) -> int:
        return len(self._records)


def confirm_migrations(
    candidates: Sequence[MigrationCandidate],
    annotations: MigrationAnnotations,
    *,
    line_id: str,
    pair_index: int,
) -> tuple[list[ChangeEvent], list[MigrationCandidate]]:
    """Apply annotation verdicts: Y confirms a migration, N or absent dissolves it.

    Returns the candidate-derived events plus the list of confirmed
    candidates (so instance accounting can exclude them downstream).
    """
    events: list[ChangeEvent] = []
    confirmed: list[MigrationCandidate] = []
    for cand in candidates:
        verdict = annotations.lookup(line_id, pair_index, cand)
        if verdict == "Y":
            confirmed.append(cand)
            events.append(
                ChangeEvent(
                    ChangeKind.MIGRATION,
                    cand.ptm_from,
                    cand.ptm_to,
                    cand.file,
                    cand.commit,
                    line_id,
                    pair_index,
                    line=cand.to_line,
                )
            )
        else:
            events.append(
                ChangeEvent(
                    ChangeKind.ADDITION, None, cand.ptm_to, cand.file, cand.commit,
                    line_id, pair_index, line=cand.to_line,
                )
            )
            events.append(
                ChangeEvent(
                    ChangeKind.REMOVAL, cand.ptm_from, None, cand.file, cand.commit,
                    line_id, pair_index, line=cand.from_line,
                )
            )
    return events, confirmed


def check_annotations(annotations: MigrationAnnotations) -> list[str]:
    """Warn about annotations that matched no detected candidate."""
    messages = []
    for rec in annotations.unmatched():
        msg = (
            f"annotation for unknown candidate {rec.ptm_from}->{rec.ptm_to} "
            f"({rec.line_id} pair {rec.pair_index}, file {rec.file})"
        )
        warnings.warn(msg, UnknownAnnotationWarning, stacklevel=2)
        messages.append(msg)
    return messages


def build_pair_events(
    delta: ReleasePairDelta,
    commit_changes: Sequence[CommitFileChange],
    annotations: MigrationAnnotations,
    *,
    first_adoption: bool = False,
) -> tuple[list[ChangeEvent], list[MigrationCandidate]]:
    """Full per-pair event construction with conservation guarantees.

    After confirmation, addition events plus migration events equal A, and
    removal events plus migration events equal R.
    """
    candidates = find_migration_candidates(delta, commit_changes)
    events, confirmed = confirm_migrations(
        candidates, annotations, line_id=delta.line_id, pair_index=delta.pair_index
    )
    additions, removals = _eligible_instances(delta, commit_changes)
    in_candidates_add = _consume_instances(additions, [(c.ptm_to, c.file, c.commit, c.to_line) for c in candidates])
    in_candidates_rem = _consume_instances(removals, [(c.ptm_from, c.file, c.commit, c.from_line) for c in candidates])
    for inst in additions:
        if id(inst) in in_candidates_add:
            continue
        events.append(
            ChangeEvent(
                ChangeKind.ADDITION, None, inst.ptm, inst.file, inst.commit,
                delta.line_id, delta.pair_index, line=inst.line or None,
            )
        )
    for inst in removals:
        if id(inst) in in_candidates_rem:
            continue
        events.append(
            ChangeEvent(
                ChangeKind.REMOVAL, inst.ptm, None, inst.file, inst.commit,
                delta.line_id, delta.pair_index, line=inst.line or None,
            )
        )
    if first_adoption:
        events = [
            replace(e, first_adoption=True) if e.kind is ChangeKind.ADDITION else e
            for e in events
        ]
    n_add = sum(1 for e in events if e.kind is ChangeKind.ADDITION)
    n_rem = sum(1 for e in events if e.kind is ChangeKind.REMOVAL)
    n_mig = sum(1 for e in events if e.kind is ChangeKind.MIGRATION)
    assert n_add + n_mig == delta.A, f"addition conservation broken: {n_add}+{n_mig} != {delta.A}"
    assert n_rem + n_mig == delta.R, f"removal conservation broken: {n_rem}+{n_mig} != {delta.R}"
    return events, candidates


def _consume_instances(
    instances: list[_Instance], keys: list[tuple[str, str, str, int]]
) -> set[int]:
    """Mark one instance per candidate key as consumed; return their ids."""
    consumed: set[int] = set()
    for ptm, file, commit, line in keys:
        for inst in instances:
            if id(inst) in consumed:
                continue
            if inst.ptm == ptm and inst.file == file and inst.commit == commit and inst.line == line:
                consumed.add(id(inst))
                break
    return consumed


@dataclass(frozen=True)
class AnalysisWindow:
    """Release pairs of one line from first PTM adoption onward."""

    line_id: str
    t1_index: int
    pair_indices: tuple[tuple[int, int], ...]
    n_window_releases: int


def anchor_t1(line_id: str, release_counts: Sequence[int]) -> AnalysisWindow:
    """Anchor the analysis window at the first release with any PTM.

    Pairs before t1 are dropped, as are pairs where both sides are empty.
    A line whose releases never contain a PTM raises EmptyLineResult.
    """
    t1 = next((i for i, n in enumerate(release_counts) if n > 0), None)
    if t1 is None:
        raise EmptyLineResult(f"{line_id}: no release contains a PTM")
    pairs = tuple(
        (i, i + 1)
        for i in range(t1, len(release_counts) - 1)
        if release_counts[i] > 0 or release_counts[i + 1] > 0
    )
    return AnalysisWindow(line_id, t1, pairs, len(release_counts) - t1)
