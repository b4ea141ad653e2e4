from datetime import datetime, timedelta, timezone

import pytest

from ptmtrace.errors import AmbiguousCoverageError, NoReleasesError
from ptmtrace.history import (
    Release,
    ReleasePolicy,
    assign_logical_ids,
    filter_releases,
    identify_release_lines,
    parse_semver,
    snapshot_release,
)

from conftest import GitFixture, build_release_line_repo


class TestSemVer:
    @pytest.mark.parametrize(
        "tag, expected",
        [
            ("1.2.3", (1, 2, 3, None, None)),
            ("v1.2.3", (1, 2, 3, None, None)),
            ("v1.2.0-rc1", (1, 2, 0, "rc1", None)),
            ("2.0.0+build.5", (2, 0, 0, None, "build.5")),
            ("v1.2", None),
            ("release-1", None),
            ("v1.2.3.4", None),
        ],
    )
    def test_grammar(self, tag, expected):
        parsed = parse_semver(tag)
        if expected is None:
            assert parsed is None
        else:
            assert (
                parsed.major, parsed.minor, parsed.patch, parsed.prerelease, parsed.build
            ) == expected


def release(tag, day, prerelease=False, draft=False):
    return Release(
        tag=tag,
        commit=f"c-{tag}",
        timestamp=datetime(2024, 1, 1, tzinfo=timezone.utc) + timedelta(days=day),
        semver=parse_semver(tag),
        is_prerelease=prerelease,
        is_draft=draft,
    )


POLICY = ReleasePolicy()


class TestFilterReleases:
    def test_healthy_set_kept(self):
        cutoff = datetime(2024, 4, 10, tzinfo=timezone.utc)
        releases = [release("1.0.0", 0), release("1.1.0", 30), release("2.0.0", 90)]
        outcome = filter_releases(
            releases, ReleasePolicy(recency_cutoff=cutoff - timedelta(days=10))
        )
        assert [r.tag for r in outcome.kept] == ["1.0.0", "1.1.0", "2.0.0"]

    def test_prerelease_tag_excluded(self):
        releases = [release("v1.2.0-rc1", 0), release("1.0.0", 10), release("1.1.0", 40)]
        outcome = filter_releases(releases, POLICY)
        assert [r.tag for r in outcome.kept] == ["1.0.0", "1.1.0"]
        assert any(r.rule == "prerelease" for r in outcome.rejections)

    def test_draft_excluded_via_sidecar_flag(self):
        releases = [release("1.0.0", 0, draft=True), release("1.1.0", 10), release("1.2.0", 40)]
        outcome = filter_releases(releases, POLICY)
        assert "1.0.0" not in [r.tag for r in outcome.kept]

    def test_fewer_than_two_releases_rejected(self):
        outcome = filter_releases([release("1.0.0", 0)], POLICY)
        assert not outcome.accepted
        assert outcome.rejections[-1].rule == "too-few-releases"

    def test_median_interval_too_long_rejected(self):
        releases = [release("1.0.0", 0), release("1.1.0", 400), release("1.2.0", 800)]
        outcome = filter_releases(releases, POLICY)
        assert not outcome.accepted
        assert outcome.rejections[-1].rule == "median-interval"

    def test_median_interval_too_short_rejected(self):
        releases = [release("1.0.0", 0), release("1.1.0", 1), release("1.2.0", 2)]
        outcome = filter_releases(releases, POLICY)
        assert outcome.rejections[-1].rule in ("median-interval", "activity-high")

    def test_recency_rejection(self):
        cutoff = datetime(2025, 1, 1, tzinfo=timezone.utc)
        releases = [release("1.0.0", 0), release("1.1.0", 60)]
        outcome = filter_releases(releases, ReleasePolicy(recency_cutoff=cutoff))
        assert not outcome.accepted
        assert outcome.rejections[-1].rule == "recency"

    def test_semver_ratio_rejection(self):
        releases = [
            release("weekly-drop", 0),
            release("snapshot-b", 40),
            release("1.0.0", 80),
        ]
        outcome = filter_releases(releases, POLICY)
        assert not outcome.accepted
        assert outcome.rejections[-1].rule == "semver-ratio"

    def test_idempotent(self):
        releases = [
            release("v1.2.0-rc1", 0),
            release("1.0.0", 5),
            release("1.1.0", 35),
            release("1.2.0", 65),
        ]
        once = filter_releases(releases, POLICY)
        twice = filter_releases(once.kept, POLICY)
        assert [r.tag for r in twice.kept] == [r.tag for r in once.kept]


class TestReleaseLines:
    def test_linear_history_single_line(self, tmp_path):
        fx = GitFixture(tmp_path / "linear")
        fx.write("a.py", "x = 1\n")
        fx.commit("one", days=0)
        fx.tag("v1.0.0")
        fx.write("a.py", "x = 2\n")
        fx.commit("two", days=30)
        fx.tag("v1.1.0")
        fx.write("a.py", "x = 3\n")
        fx.commit("three", days=30)
        fx.tag("v2.0.0")
        result = identify_release_lines(fx.path)
        assert len(result.lines) == 1
        assert [r.tag for r in result.lines[0].releases] == ["v1.0.0", "v1.1.0", "v2.0.0"]
        assert result.unassigned_tags == []

    def test_merged_side_branch_tag_excluded(self, tmp_path):
        fx, _ = build_release_line_repo(tmp_path / "branchy")
        result = identify_release_lines(fx.path)
        by_branch = {line.branch: line for line in result.lines}
        assert set(by_branch) == {"main", "release-2.x"}
        assert [r.tag for r in by_branch["main"].releases] == [
            "v1.0.0", "v1.1.0", "v1.2.0", "v1.3.0",
        ]
        # The release branch forked from main, so it shares the early tags
        # and then carries its own two.
        assert [r.tag for r in by_branch["release-2.x"].releases] == [
            "v1.0.0", "v1.1.0", "v2.0.0", "v2.1.0",
        ]
        assert result.unassigned_tags == ["v1.1.5"]

    def test_release_order_follows_first_parent_positions(self, tmp_path):
        fx, _ = build_release_line_repo(tmp_path / "branchy2")
        result = identify_release_lines(fx.path)
        for line in result.lines:
            positions = [line.first_parent.index(r.commit) for r in line.releases]
            assert positions == sorted(positions)

    def test_rerun_is_deterministic(self, tmp_path):
        fx, _ = build_release_line_repo(tmp_path / "branchy3")
        first = identify_release_lines(fx.path)
        second = identify_release_lines(fx.path)
        assert [(l.branch, [r.tag for r in l.releases]) for l in first.lines] == [
            (l.branch, [r.tag for r in l.releases]) for l in second.lines
        ]

    def test_no_tags_raises(self, tmp_path):
        fx = GitFixture(tmp_path / "untagged")
        fx.write("a.py", "x = 1\n")
        fx.commit("one", days=0)
        with pytest.raises(NoReleasesError):
            identify_release_lines(fx.path)

    def test_unreachable_tags_raise_ambiguous_coverage(self, tmp_path):
        fx = GitFixture(tmp_path / "orphan")
        fx.write("a.py", "x = 1\n")
        fx.commit("one", days=0)
        fx.tag("v1.0.0")
        fx.run("checkout", "-q", "--orphan", "detached")
        fx.write("b.py", "y = 1\n")
        fx.commit("orphan work", days=1)
        fx.run("branch", "-q", "-D", "main")
        with pytest.raises(AmbiguousCoverageError):
            identify_release_lines(fx.path)


class TestSnapshots:
    def _tagged_repo(self, tmp_path):
        fx = GitFixture(tmp_path / "snap")
        fx.write(
            "src/app.py",
            'import spacy\na = spacy.load("org/model-a")\nb = spacy.load("org/model-a")\n',
        )
        fx.write("src/other.py", 'import spacy\nc = spacy.load("org/model-b")\n')
        fx.commit("code", days=0)
        fx.tag("v1.0.0")
        return fx

    def test_release_multiset_aggregates_files(self, tmp_path, test_catalog, test_index):
        fx = self._tagged_repo(tmp_path)
        from ptmtrace.history import Release as R
        from ptmtrace import gitio as g

        tag = g.list_tags(fx.path)[0]
        rel = R(tag.name, tag.commit, tag.timestamp, parse_semver(tag.name), False, False)
        snapshot = snapshot_release(fx.path, rel, test_catalog, test_index)
        assert snapshot.ptms == {"org/model-a": 2, "org/model-b": 1}
        # Aggregation equals the per-file sum for every identifier.
        for ptm, count in snapshot.ptms.items():
            assert count == sum(f.counts.get(ptm, 0) for f in snapshot.files)

    def test_zero_matching_files_gives_empty_multiset(self, tmp_path, test_catalog, test_index):
        fx = GitFixture(tmp_path / "empty")
        fx.write("src/app.py", "VALUE = 1\n")
        fx.commit("code", days=0)
        fx.tag("v1.0.0")
        from ptmtrace import gitio as g
        from ptmtrace.history import Release as R

        tag = g.list_tags(fx.path)[0]
        rel = R(tag.name, tag.commit, tag.timestamp, parse_semver(tag.name), False, False)
        snapshot = snapshot_release(fx.path, rel, test_catalog, test_index)
        assert snapshot.ptms == {}

    def test_rename_preserves_logical_identity(self, tmp_path, test_catalog, test_index):
        fx = GitFixture(tmp_path / "rename")
        content = 'import spacy\nnlp = spacy.load("org/model-a")\n'
        fx.write("src/old_name.py", content)
        fx.commit("one", days=0)
        fx.tag("v1.0.0")
        fx.run("mv", "src/old_name.py", "src/new_name.py")
        fx.commit("rename only", days=30)
        fx.tag("v1.1.0")
        result = identify_release_lines(fx.path)
        line = result.lines[0]
        maps = assign_logical_ids(fx.path, line)
        assert maps[0]["src/old_name.py"] == "src/old_name.py"
        assert maps[1]["src/new_name.py"] == "src/old_name.py"
