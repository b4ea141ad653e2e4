import random
from collections import Counter

import pytest

from ptmtrace.changes import (
    ChangeKind,
    MigrationAnnotation,
    MigrationAnnotations,
    anchor_t1,
    build_pair_events,
    check_annotations,
    confirm_migrations,
    diff_pair,
    find_migration_candidates,
)
from ptmtrace.errors import EmptyLineResult, UnknownAnnotationWarning
from ptmtrace.history import CommitFileChange


def brute_force_delta(prev: dict, nxt: dict) -> tuple[int, int, int]:
    """Independent oracle: expand multisets to instance lists and pair them
    greedily one instance at a time."""
    prev_items = sorted(m for m, n in prev.items() for _ in range(n))
    next_items = sorted(m for m, n in nxt.items() for _ in range(n))
    remaining = list(prev_items)
    added = 0
    for item in next_items:
        if item in remaining:
            remaining.remove(item)
        else:
            added += 1
    removed = len(remaining)
    return added, removed, min(added, removed)


class TestDiffPair:
    def test_worked_example(self):
        delta = diff_pair({"A": 2, "B": 1, "C": 1}, {"A": 1, "B": 1, "D": 1, "E": 1})
        assert delta.deltas == {"A": -1, "B": 0, "C": -1, "D": 1, "E": 1}
        assert (delta.A, delta.R, delta.U) == (2, 2, 2)

    def test_identical_snapshots(self):
        delta = diff_pair({"A": 3, "B": 1}, {"A": 3, "B": 1})
        assert all(d == 0 for d in delta.deltas.values())
        assert (delta.A, delta.R, delta.U) == (0, 0, 0)

    def test_pure_adoption(self):
        delta = diff_pair({}, {"X": 3})
        assert (delta.A, delta.R, delta.U) == (3, 0, 0)

    def test_randomized_pairs_match_instance_counting_oracle(self):
        rng = random.Random(20240401)
        alphabet = ["m1", "m2", "m3", "m4", "m5", "m6"]
        for _ in range(1000):
            prev = {m: rng.randint(0, 4) for m in alphabet}
            nxt = {m: rng.randint(0, 4) for m in alphabet}
            prev = {m: n for m, n in prev.items() if n}
            nxt = {m: n for m, n in nxt.items() if n}
            delta = diff_pair(prev, nxt)
            assert (delta.A, delta.R, delta.U) == brute_force_delta(prev, nxt)

    def test_triangle_identity_on_random_triples(self):
        rng = random.Random(77)
        alphabet = ["m1", "m2", "m3", "m4", "m5", "m6"]
        for _ in range(200):
            s1, s2, s3 = (
                {m: rng.randint(0, 4) for m in alphabet} for _ in range(3)
            )
            d12 = diff_pair(s1, s2).deltas
            d23 = diff_pair(s2, s3).deltas
            d13 = diff_pair(s1, s3).deltas
            for m in alphabet:
                assert d13.get(m, 0) == d12.get(m, 0) + d23.get(m, 0)

    def test_antisymmetry(self):
        rng = random.Random(3)
        for _ in range(100):
            s1 = {m: rng.randint(0, 3) for m in "abcd"}
            s2 = {m: rng.randint(0, 3) for m in "abcd"}
            fwd = diff_pair(s1, s2)
            bwd = diff_pair(s2, s1)
            assert fwd.A == bwd.R and fwd.R == bwd.A and fwd.U == bwd.U


def fig4_commit_changes():
    """A->E co-change in one file+commit; C removed and D added elsewhere."""
    return [
        CommitFileChange("c1", "src/app.py", added=(("E", 12),), removed=(("A", 10),)),
        CommitFileChange("c2", "src/other.py", added=(), removed=(("C", 3),)),
        CommitFileChange("c3", "src/app.py", added=(("D", 30),), removed=()),
    ]


class TestMigrationCandidates:
    def test_worked_example_candidate(self):
        delta = diff_pair(
            {"A": 2, "B": 1, "C": 1}, {"A": 1, "B": 1, "D": 1, "E": 1},
            line_id="r:main", pair_index=1,
        )
        candidates = find_migration_candidates(delta, fig4_commit_changes())
        assert len(candidates) == 1
        cand = candidates[0]
        assert (cand.ptm_from, cand.ptm_to) == ("A", "E")
        assert cand.file == "src/app.py" and cand.commit == "c1"

    def test_file_mismatch_yields_no_candidate(self):
        delta = diff_pair({"A": 1}, {"B": 1})
        changes = [
            CommitFileChange("c1", "f1.py", added=(("B", 5),), removed=()),
            CommitFileChange("c1", "f2.py", added=(), removed=(("A", 5),)),
        ]
        assert find_migration_candidates(delta, changes) == []

    def test_commit_mismatch_yields_no_candidate(self):
        delta = diff_pair({"A": 1}, {"B": 1})
        changes = [
            CommitFileChange("c1", "f.py", added=(("B", 5),), removed=()),
            CommitFileChange("c2", "f.py", added=(), removed=(("A", 5),)),
        ]
        assert find_migration_candidates(delta, changes) == []

    def test_candidates_bounded_by_u(self):
        rng = random.Random(11)
        for _ in range(200):
            prev = {m: rng.randint(0, 3) for m in "abcd"}
            nxt = {m: rng.randint(0, 3) for m in "abcd"}
            delta = diff_pair(prev, nxt)
            added = tuple(
                (m, rng.randint(1, 40)) for m, d in delta.deltas.items() if d > 0
                for _ in range(d)
            )
            removed = tuple(
                (m, rng.randint(1, 40)) for m, d in delta.deltas.items() if d < 0
                for _ in range(-d)
            )
            changes = [CommitFileChange("c1", "f.py", added=added, removed=removed)]
            assert len(find_migration_candidates(delta, changes)) <= delta.U

    def test_nearest_line_pairing(self):
        # Two removals and two additions in one commit+file: pairing is by
        # line distance, ties by identifier order.
        delta = diff_pair({"A": 1, "B": 1}, {"X": 1, "Y": 1})
        changes = [
            CommitFileChange(
                "c1", "f.py",
                added=(("X", 11), ("Y", 50)),
                removed=(("A", 10), ("B", 52)),
            )
        ]
        candidates = find_migration_candidates(delta, changes)
        pairs = {(c.ptm_from, c.ptm_to) for c in candidates}
        assert pairs == {("A", "X"), ("B", "Y")}

    def test_net_zero_intermediate_changes_are_ignored(self):
        # X added then removed inside the window nets out at pair level.
        delta = diff_pair({"A": 1}, {"B": 1})
        changes = [
            CommitFileChange("c1", "f.py", added=(("X", 5), ("B", 7)), removed=(("A", 6),)),
            CommitFileChange("c2", "f.py", added=(), removed=(("X", 5),)),
        ]
        candidates = find_migration_candidates(delta, changes)
        assert {(c.ptm_from, c.ptm_to) for c in candidates} == {("A", "B")}


def annotations_for(verdict: str):
    return MigrationAnnotations(
        [
            MigrationAnnotation(
                line_id="r:main", pair_index=1, file="src/app.py", commit="*",
                ptm_from="A", ptm_to="E", verdict=verdict,
            )
        ]
    )


class TestConfirmMigrations:
    def _candidates(self):
        delta = diff_pair(
            {"A": 2, "B": 1, "C": 1}, {"A": 1, "B": 1, "D": 1, "E": 1},
            line_id="r:main", pair_index=1,
        )
        return delta, find_migration_candidates(delta, fig4_commit_changes())

    def test_confirmed_candidate_becomes_migration(self):
        _, candidates = self._candidates()
        events, confirmed = confirm_migrations(
            candidates, annotations_for("Y"), line_id="r:main", pair_index=1
        )
        assert [e.kind for e in events] == [ChangeKind.MIGRATION]
        assert confirmed == candidates

    def test_absent_annotation_dissolves_candidate(self):
        _, candidates = self._candidates()
        events, confirmed = confirm_migrations(
            candidates, MigrationAnnotations(), line_id="r:main", pair_index=1
        )
        assert sorted(e.kind.value for e in events) == ["addition", "removal"]
        assert not confirmed

    def test_unknown_annotation_warns_without_event(self):
        annotations = MigrationAnnotations(
            [
                MigrationAnnotation(
                    line_id="r:main", pair_index=9, file="ghost.py", commit="*",
                    ptm_from="Q", ptm_to="Z", verdict="Y",
                )
            ]
        )
        with pytest.warns(UnknownAnnotationWarning):
            messages = check_annotations(annotations)
        assert len(messages) == 1

    def test_full_event_set_conserves_a_and_r(self):
        delta, _ = self._candidates()
        events, candidates = build_pair_events(
            delta, fig4_commit_changes(), annotations_for("Y")
        )
        kinds = Counter(e.kind.value for e in events)
        assert kinds == {"migration": 1, "addition": 1, "removal": 1}
        assert kinds["addition"] + kinds["migration"] == delta.A
        assert kinds["removal"] + kinds["migration"] == delta.R
        independent = {(e.kind.value, e.ptm_from or e.ptm_to) for e in events}
        assert ("addition", "D") in independent
        assert ("removal", "C") in independent

    def test_rename_keeps_candidate(self):
        # The co-change is keyed by logical file id, so a rename between the
        # releases must not break candidate detection.
        delta = diff_pair({"A": 1}, {"B": 1}, line_id="r:main", pair_index=0)
        changes = [
            CommitFileChange("c1", "src/orig.py", added=(("B", 4),), removed=(("A", 4),)),
        ]
        candidates = find_migration_candidates(delta, changes)
        assert candidates[0].file == "src/orig.py"


class TestAnchorT1:
    def test_t1_at_first_nonempty(self):
        window = anchor_t1("l", [0, 0, 2, 2, 3])
        assert window.t1_index == 2
        assert window.pair_indices == ((2, 3), (3, 4))
        assert window.n_window_releases == 3

    def test_gap_pairs_dropped_when_both_sides_empty(self):
        window = anchor_t1("l", [1, 0, 0, 1])
        assert window.t1_index == 0
        assert window.pair_indices == ((0, 1), (2, 3))

    def test_all_empty_line_raises(self):
        with pytest.raises(EmptyLineResult):
            anchor_t1("l", [0, 0, 0])
