"""Shared fixtures: deterministic git repository builders and test catalogs."""

from __future__ import annotations

import json
import subprocess
from datetime import datetime, timedelta, timezone
from pathlib import Path

import pytest

from ptmtrace.catalog import load_catalog, load_ptm_index

DATA_DIR = Path(__file__).parent / "data"
FP_CORPUS = DATA_DIR / "fp_corpus"

CATALOG_TEXT = """\
# library, call, kind, arg
transformers, from_pretrained, classmethod, 0
transformers, pipeline, function, model
spacy, load, function, 0
"""

INDEX_TEXT = """\
org/model-a
org/model-b
org/model-c
org/model-d
org/model-e
bert-base-uncased
FacebookAI/roberta-base
en_core_web_sm
da_core_news_sm
"""


@pytest.fixture(scope="session")
def test_catalog(tmp_path_factory):
    path = tmp_path_factory.mktemp("catalog") / "signatures.csv"
    path.write_text(CATALOG_TEXT)
    return load_catalog(path)


@pytest.fixture(scope="session")
def test_index(tmp_path_factory):
    path = tmp_path_factory.mktemp("catalog") / "index.txt"
    path.write_text(INDEX_TEXT)
    return load_ptm_index(path)


class GitFixture:
    """Scripted git repository with deterministic commit metadata."""

    def __init__(self, path: Path, start: datetime | None = None):
        self.path = Path(path)
        self.path.mkdir(parents=True, exist_ok=True)
        self.clock = start or datetime(2024, 1, 1, 12, 0, tzinfo=timezone.utc)
        self.run("init", "-q", "-b", "main")
        self.run("config", "user.name", "Fixture")
        self.run("config", "user.email", "fixture@example.invalid")
        self.run("config", "commit.gpgsign", "false")
        self.run("config", "tag.gpgsign", "false")

    def run(self, *args: str) -> str:
        proc = subprocess.run(
            ["git", "-C", str(self.path), *args],
            capture_output=True,
            text=True,
            env=self._env(),
        )
        if proc.returncode != 0:
            raise RuntimeError(f"git {' '.join(args)}: {proc.stderr}")
        return proc.stdout

    def _env(self) -> dict:
        import os

        stamp = self.clock.strftime("%Y-%m-%dT%H:%M:%S+00:00")
        env = dict(os.environ)
        env["GIT_AUTHOR_DATE"] = stamp
        env["GIT_COMMITTER_DATE"] = stamp
        return env

    def advance(self, days: float) -> None:
        self.clock += timedelta(days=days)

    def write(self, relpath: str, content: str) -> None:
        target = self.path / relpath
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(content)

    def remove(self, relpath: str) -> None:
        (self.path / relpath).unlink()

    def commit(self, message: str, days: float = 1.0) -> str:
        self.advance(days)
        self.run("add", "-A")
        self.run("commit", "-q", "-m", message)
        return self.sha()

    def tag(self, name: str, message: str | None = None) -> None:
        if message is None:
            self.run("tag", name)
        else:
            self.run("tag", "-a", name, "-m", message)

    def branch(self, name: str, start: str | None = None) -> None:
        if start:
            self.run("branch", name, start)
        else:
            self.run("branch", name)

    def checkout(self, ref: str) -> None:
        self.run("checkout", "-q", ref)

    def merge(self, branch: str, message: str, days: float = 1.0) -> str:
        self.advance(days)
        self.run("merge", "--no-ff", "-q", "-m", message, branch)
        return self.sha()

    def sha(self, ref: str = "HEAD") -> str:
        return self.run("rev-parse", ref).strip()


@pytest.fixture
def git_repo(tmp_path):
    return GitFixture(tmp_path / "repo")


def build_release_line_repo(path: Path) -> tuple[GitFixture, dict]:
    """Main line with 4 tags, a merged side-branch tag, a release branch with 2 tags."""
    fx = GitFixture(path)
    fx.write("app.py", "VALUE = 1\n")
    fx.commit("initial", days=0)
    fx.tag("v1.0.0", "first release")
    fx.write("app.py", "VALUE = 2\n")
    m2 = fx.commit("second", days=20)
    fx.tag("v1.1.0", "second release")

    fx.write("app.py", "VALUE = 3\n")
    m3 = fx.commit("third", days=20)

    # Side branch merged back through a merge commit; its tag must stay off
    # the main line's first-parent path.
    fx.branch("side", m2)
    fx.checkout("side")
    fx.write("side.py", "SIDE = 1\n")
    side_sha = fx.commit("side work", days=1)
    fx.tag("v1.1.5", "side release")
    fx.checkout("main")
    fx.merge("side", "merge side work", days=1)
    fx.run("branch", "-q", "-D", "side")

    fx.write("app.py", "VALUE = 4\n")
    fx.commit("fourth", days=18)
    fx.tag("v1.2.0", "third release")
    fx.write("app.py", "VALUE = 5\n")
    fx.commit("fifth", days=20)
    fx.tag("v1.3.0", "fourth release")

    # Parallel release branch forked before the merge.
    fx.branch("release-2.x", m3)
    fx.checkout("release-2.x")
    fx.write("app.py", "VALUE = 20\n")
    fx.commit("two-oh", days=25)
    fx.tag("v2.0.0", "two release")
    fx.write("app.py", "VALUE = 21\n")
    fx.commit("two-one", days=20)
    fx.tag("v2.1.0", "two one release")
    fx.checkout("main")
    return fx, {"side_sha": side_sha}


E2E_APP_V1 = '''from transformers import AutoModelForMaskedLM, AutoModel

first = AutoModelForMaskedLM.from_pretrained("org/model-a")
second = AutoModel.from_pretrained("org/model-a")
encoder = AutoModel.from_pretrained("org/model-b")
'''

# One model-a call swapped for model-e in the same file and commit.
E2E_APP_V2 = '''from transformers import AutoModelForMaskedLM, AutoModel

first = AutoModelForMaskedLM.from_pretrained("org/model-a")
# lighter encoder for constrained deployments
second = AutoModel.from_pretrained("org/model-e")
encoder = AutoModel.from_pretrained("org/model-b")
'''

E2E_APP_V2_D = E2E_APP_V2 + '''reranker = AutoModel.from_pretrained("org/model-d")
'''

E2E_APP_V3 = E2E_APP_V2_D + '''query_encoder = AutoModel.from_pretrained("org/model-b")
'''

E2E_OTHER = '''import spacy

nlp = spacy.load("org/model-c")
'''


def build_e2e_repo(path: Path) -> tuple[GitFixture, dict]:
    """Scripted repository with known PTM and manifest edits for one line."""
    fx = GitFixture(path)
    shas: dict[str, str] = {}

    fx.write("README.md", "# demo project\n")
    fx.write("src/app.py", "GREETING = 'hi'\n")
    fx.write("requirements.txt", "requests==2.31.0\n")
    shas["c0"] = fx.commit("initial scaffolding", days=0)
    fx.tag("v1.0.0", "Release v1.0.0: first cut")

    fx.write("src/app.py", E2E_APP_V1)
    fx.write("src/other.py", E2E_OTHER)
    fx.write("requirements.txt", "requests==2.31.0\ntorch>=2.0\n")
    shas["c1"] = fx.commit("Add org/model-a, org/model-b and org/model-c pipelines", days=15)
    fx.tag("v1.1.0", "Release v1.1.0: model integrations landed")

    fx.write("src/app.py", E2E_APP_V2)
    shas["c2"] = fx.commit(
        "Switch org/model-a encoder to org/model-e to cut memory use", days=5
    )
    fx.remove("src/other.py")
    shas["c3"] = fx.commit("Remove org/model-c pipeline", days=2)
    fx.write("src/app.py", E2E_APP_V2_D)
    shas["c4"] = fx.commit("Add org/model-d reranker to improve search", days=3)
    fx.write("requirements.txt", "requests==2.32.0\nnumpy\n")
    shas["c5"] = fx.commit("Bump requests, swap torch for numpy", days=3)
    fx.tag("v1.2.0", "Release v1.2.0: reranker added, legacy pipeline removed")

    fx.write("src/app.py", E2E_APP_V3)
    fx.write("CHANGELOG.md", "## v1.3.0\n- Added another org/model-b call site for query encoding\n")
    shas["c6"] = fx.commit("Add second org/model-b usage for query encoding", days=10)
    fx.write("requirements.txt", "numpy\nhttpx\n")
    shas["c7"] = fx.commit("Migrate from requests to httpx to get async support", days=2)
    fx.tag("v1.3.0", "Release v1.3.0: broader query encoding coverage")
    return fx, shas


E2E_CATALOG = """\
transformers, from_pretrained, classmethod, 0
spacy, load, function, 0
"""

E2E_INDEX = """\
org/model-a
org/model-b
org/model-c
org/model-d
org/model-e
"""


def write_e2e_inputs(root: Path, repo_path: Path, shas: dict) -> Path:
    """Config plus catalog/index/annotation files for the end-to-end repo."""
    root.mkdir(parents=True, exist_ok=True)
    (root / "signatures.csv").write_text(E2E_CATALOG)
    (root / "index.txt").write_text(E2E_INDEX)
    line_id = f"{repo_path.name}:main"
    (root / "migration_annotations.jsonl").write_text(
        json.dumps(
            {
                "line_id": line_id,
                "pair_index": 1,
                "file": "src/app.py",
                "commit": shas["c2"],
                "ptm_from": "org/model-a",
                "ptm_to": "org/model-e",
                "verdict": "Y",
                "note": "memory pressure",
            }
        )
        + "\n"
    )
    (root / "library_migration_annotations.jsonl").write_text(
        json.dumps(
            {
                "line_id": line_id,
                "pair_index": 1,
                "file": "requirements.txt",
                "ptm_from": "torch",
                "ptm_to": "numpy",
                "verdict": "N",
            }
        )
        + "\n"
    )
    (root / "curated_pairs.csv").write_text("requests,httpx\nflask,fastapi\n")
    config = {
        "repos": [str(repo_path)],
        "catalog": str(root / "signatures.csv"),
        "index": str(root / "index.txt"),
        "out": str(root / "out"),
        "migration_annotations": str(root / "migration_annotations.jsonl"),
        "library_migration_annotations": str(root / "library_migration_annotations.jsonl"),
        "curated_pairs": str(root / "curated_pairs.csv"),
    }
    config_path = root / "config.json"
    config_path.write_text(json.dumps(config, indent=2))
    return config_path
