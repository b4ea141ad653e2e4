import pytest

from ptmtrace.errors import ManifestParseError
from ptmtrace.manifests import (
    ManifestCommitChange,
    annotation_validator,
    diff_manifests,
    identify_manifest_kind,
    load_analogous_pairs,
    normalize_name,
    parse_manifest,
)

# Names sampled from real distributions, checked against the ecosystem
# normalization rule (lowercase, separator runs collapse to "-").
NORMALIZATION_SAMPLES = [
    ("Typing_Extensions", "typing-extensions"),
    ("PyYAML", "pyyaml"),
    ("scikit-learn", "scikit-learn"),
    ("ruamel.yaml", "ruamel-yaml"),
    ("Django", "django"),
    ("python_dateutil", "python-dateutil"),
    ("zope.interface", "zope-interface"),
    ("backports.zoneinfo", "backports-zoneinfo"),
    ("Pillow", "pillow"),
    ("A.B--C_D", "a-b-c-d"),
    ("requests", "requests"),
    ("Flask-SQLAlchemy", "flask-sqlalchemy"),
    ("jaraco.context", "jaraco-context"),
    ("PyNaCl", "pynacl"),
    ("google_api_python_client", "google-api-python-client"),
]


class TestNormalization:
    @pytest.mark.parametrize("raw, expected", NORMALIZATION_SAMPLES)
    def test_samples(self, raw, expected):
        assert normalize_name(raw) == expected

    def test_cross_check_against_packaging(self):
        packaging_utils = pytest.importorskip("packaging.utils")
        for raw, _ in NORMALIZATION_SAMPLES:
            assert normalize_name(raw) == packaging_utils.canonicalize_name(raw)

    def test_idempotent(self):
        for raw, _ in NORMALIZATION_SAMPLES:
            once = normalize_name(raw)
            assert normalize_name(once) == once


class TestKindDetection:
    @pytest.mark.parametrize(
        "path, kind",
        [
            ("requirements.txt", "requirements"),
            ("deploy/requirements-dev.txt", "requirements"),
            ("environment.yml", "environment"),
            ("environment.yaml", "environment"),
            ("Pipfile", "pipfile"),
            ("pyproject.toml", "pyproject"),
            ("setup.py", None),
            ("poetry.lock", None),
        ],
    )
    def test_kinds(self, path, kind):
        assert identify_manifest_kind(path) == kind


class TestParseRequirements:
    def test_spec_preserved(self):
        entries, _ = parse_manifest(b"torch>=2.1,<3\n", "requirements", "requirements.txt")
        assert len(entries) == 1
        assert entries[0].name == "torch"
        assert entries[0].version_spec == ">=2.1,<3"

    def test_name_normalized(self):
        entries, _ = parse_manifest(
            b"Typing_Extensions==4.8.0\n", "requirements", "requirements.txt"
        )
        assert entries[0].name == "typing-extensions"

    def test_comment_only_file_is_empty(self):
        entries, diags = parse_manifest(b"# nothing here\n\n", "requirements", "r.txt")
        assert entries == [] and diags == []

    def test_editable_include_and_urls_skipped_with_diagnostics(self):
        data = b"-e .\n-r other.txt\ngit+https://example.invalid/x.git\n./local\nrequests\n"
        entries, diags = parse_manifest(data, "requirements", "r.txt")
        assert [e.name for e in entries] == ["requests"]
        assert len(diags) == 4

    def test_markers_and_extras_preserved(self):
        entries, _ = parse_manifest(
            b'uvicorn[standard]>=0.2 ; python_version > "3.8"\n', "requirements", "r.txt"
        )
        entry = entries[0]
        assert entry.name == "uvicorn"
        assert entry.version_spec == ">=0.2"
        assert "[standard]" in entry.extras_markers

    def test_duplicate_keeps_last_with_diagnostic(self):
        entries, diags = parse_manifest(
            b"requests==1.0\nrequests==2.0\n", "requirements", "r.txt"
        )
        assert len(entries) == 1
        assert entries[0].version_spec == "==2.0"
        assert any(d.reason == "duplicate" for d in diags)

    def test_round_trip(self):
        data = b"torch>=2.1,<3\nTyping_Extensions==4.8.0\nplain\n"
        entries, _ = parse_manifest(data, "requirements", "r.txt")
        serialized = "\n".join(e.serialize() for e in entries).encode()
        reparsed, _ = parse_manifest(serialized, "requirements", "r.txt")
        assert reparsed == entries


class TestParseOtherKinds:
    def test_environment_yaml_top_level_and_pip(self):
        data = b"""name: demo
dependencies:
  - python=3.10
  - numpy=1.24
  - pip:
      - torch>=2.0
      - Typing_Extensions
"""
        entries, _ = parse_manifest(data, "environment", "environment.yml")
        names = {e.name: e.version_spec for e in entries}
        assert names == {
            "python": "=3.10",
            "numpy": "=1.24",
            "torch": ">=2.0",
            "typing-extensions": "",
        }

    def test_environment_malformed_raises(self):
        with pytest.raises(ManifestParseError):
            parse_manifest(b"dependencies: [unclosed\n", "environment", "environment.yml")

    def test_pipfile_sections(self):
        data = b"""[packages]
requests = "==2.31"
rich = "*"
local = {path = ".", editable = true}

[dev-packages]
pytest = {version = ">=7", extras = ["cov"]}
"""
        entries, diags = parse_manifest(data, "pipfile", "Pipfile")
        by_name = {e.name: e for e in entries}
        assert by_name["requests"].version_spec == "==2.31"
        assert by_name["rich"].version_spec == ""
        assert by_name["pytest"].version_spec == ">=7"
        assert "local" not in by_name
        assert any(d.reason == "skipped" for d in diags)

    def test_pyproject_project_and_optional(self):
        data = b"""[project]
dependencies = ["click>=8.0", "PyYAML"]

[project.optional-dependencies]
test = ["pytest>=7"]

[tool.poetry.dependencies]
python = "^3.10"
loguru = "^0.7"
"""
        entries, _ = parse_manifest(data, "pyproject", "pyproject.toml")
        names = {e.name for e in entries}
        assert names == {"click", "pyyaml", "pytest", "loguru"}

    def test_pyproject_malformed_raises(self):
        with pytest.raises(ManifestParseError):
            parse_manifest(b"[project\n", "pyproject", "pyproject.toml")


def entry(name, spec="", file="requirements.txt"):
    from ptmtrace.manifests import DependencyEntry

    return DependencyEntry(normalize_name(name), spec, file, "requirements")


class TestDiffManifests:
    def test_identical_lists_empty(self):
        entries = [entry("requests", "==2.31")]
        assert diff_manifests(entries, entries) == []

    def test_spec_change_is_update(self):
        changes = diff_manifests([entry("requests", "==2.31")], [entry("requests", "==2.32")])
        assert [c.kind for c in changes] == ["update"]
        change = changes[0]
        assert change.name_from == change.name_to == "requests"
        assert (change.spec_from, change.spec_to) == ("==2.31", "==2.32")

    def test_curated_pair_migration(self):
        curated, _ = load_analogous_pairs_text("requests,httpx\n")
        commit_changes = [
            ManifestCommitChange(
                "c9", "requirements.txt",
                added={"httpx": ""}, removed={"requests": "==2.31"}, updated={},
            )
        ]
        changes = diff_manifests(
            [entry("requests", "==2.31")], [entry("httpx", "")],
            commit_changes, curated,
        )
        assert [c.kind for c in changes] == ["migration"]
        assert (changes[0].name_from, changes[0].name_to) == ("requests", "httpx")

    def test_split_commits_stay_independent(self):
        commit_changes = [
            ManifestCommitChange("c1", "requirements.txt", {}, {"flask": ""}, {}),
            ManifestCommitChange("c2", "requirements.txt", {"fastapi": ""}, {}, {}),
        ]
        changes = diff_manifests(
            [entry("flask")], [entry("fastapi")],
            commit_changes, frozenset({("flask", "fastapi"), ("fastapi", "flask")}),
        )
        assert sorted(c.kind for c in changes) == ["addition", "removal"]

    def test_validator_confirms_unlisted_pair(self):
        commit_changes = [
            ManifestCommitChange(
                "c1", "requirements.txt", {"numpy": ""}, {"torch": ">=2.0"}, {},
            )
        ]
        validator = annotation_validator({("torch", "numpy"): "Y"})
        changes = diff_manifests(
            [entry("torch", ">=2.0")], [entry("numpy")],
            commit_changes, frozenset(), validator,
        )
        assert [c.kind for c in changes] == ["migration"]

    def test_migration_conserves_one_addition_and_one_removal(self):
        commit_changes = [
            ManifestCommitChange(
                "c1", "requirements.txt",
                {"httpx": "", "rich": ""}, {"requests": ""}, {},
            )
        ]
        curated = frozenset({("requests", "httpx"), ("httpx", "requests")})
        changes = diff_manifests(
            [entry("requests")], [entry("httpx"), entry("rich")],
            commit_changes, curated,
        )
        kinds = sorted(c.kind for c in changes)
        assert kinds == ["addition", "migration"]


def load_analogous_pairs_text(text):
    import tempfile
    from pathlib import Path

    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "pairs.csv"
        path.write_text(text)
        return load_analogous_pairs(path)


class TestAnalogousPairs:
    def test_symmetric_closure(self):
        pairs, _ = load_analogous_pairs_text("requests,httpx\n")
        assert ("requests", "httpx") in pairs
        assert ("httpx", "requests") in pairs

    def test_duplicates_collapse(self):
        pairs, _ = load_analogous_pairs_text("a,b\na,b\nb,a\n")
        assert len(pairs) == 2

    def test_malformed_line_skipped_with_diagnostic(self):
        pairs, diags = load_analogous_pairs_text("a,\nb,c\n")
        assert ("b", "c") in pairs
        assert len(diags) == 1
