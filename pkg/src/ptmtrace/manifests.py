"""Library-dependency baseline over Python manifest files.

Mirrors the PTM change detection on traditional dependencies declared in
requirements.txt, environment.yml, Pipfile, and pyproject.toml. Changes
between adjacent releases classify as additions, removals, version updates
(same name, different specifier), and migrations (a removal and an addition
co-located in the same file and commit, validated first against a curated
list of analogous package pairs and then through a pluggable validator
whose default consults an annotation file).
"""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass
from pathlib import PurePosixPath
from typing import Callable, Iterable, Mapping, Sequence

import yaml

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ManifestParseError

MANIFEST_KINDS = ("requirements", "environment", "pipfile", "pyproject")


def identify_manifest_kind(path: str) -> str | None:
    name = PurePosixPath(path).name.lower()
    if name.endswith(".txt") and "requirements" in name:
        return "requirements"
    if name in ("environment.yml", "environment.yaml"):
        return "environment"
    if name == "pipfile":
        return "pipfile"
    if name == "pyproject.toml":
        return "pyproject"
    return None


def normalize_name(name: str) -> str:
    """Lowercase and collapse runs of ``.``, ``-``, ``_`` to a single dash."""
    return re.sub(r"[._-]+", "-", name.lower())


@dataclass(frozen=True)
class DependencyEntry:
    name: str            # normalized
    version_spec: str    # raw specifier with whitespace stripped, may be ""
    source_file: str
    kind: str
    extras_markers: str | None = None

    def serialize(self) -> str:
        spec = self.version_spec
        marker = f"; {self.extras_markers}" if self.extras_markers else ""
        return f"{self.name}{spec}{marker}"


@dataclass(frozen=True)
class ManifestDiagnostic:
    source_file: str
    line: int
    reason: str
    detail: str = ""


_REQ_LINE = re.compile(
    r"^(?P<name>[A-Za-z0-9][A-Za-z0-9._-]*)"
    r"(?P<extras>\[[^\]]*\])?"
    r"\s*(?P<spec>[^;]*)"
    r"(?:;(?P<marker>.*))?$"
)

_SKIP_PREFIXES = ("-", ".", "/", "git+", "hg+", "svn+", "bzr+")


def _parse_requirement_line(
    raw: str, lineno: int, source_file: str, kind: str
) -> tuple[DependencyEntry | None, ManifestDiagnostic | None]:
    line = raw.split("#", 1)[0].strip()
    if not line:
        return None, None
    if line.startswith(_SKIP_PREFIXES) or "://" in line:
        return None, ManifestDiagnostic(
            source_file, lineno, "skipped", f"non-requirement line {line[:40]!r}"
        )
    m = _REQ_LINE.match(line)
    if not m:
        return None, ManifestDiagnostic(source_file, lineno, "unparseable", line[:60])
    spec = re.sub(r"\s+", "", m.group("spec") or "")
    extras = m.group("extras") or ""
    marker = (m.group("marker") or "").strip()
    extras_markers = (extras + (" " if extras and marker else "") + marker) or None
    entry = DependencyEntry(
        name=normalize_name(m.group("name")),
        version_spec=spec,
        source_file=source_file,
        kind=kind,
        extras_markers=extras_markers,
    )
    return entry, None


def _dedupe(
    entries: list[DependencyEntry], diagnostics: list[ManifestDiagnostic], source_file: str
) -> list[DependencyEntry]:
    # Duplicate names within one manifest: the last occurrence wins.
    by_name: dict[str, DependencyEntry] = {}
    for entry in entries:
        if entry.name in by_name:
            diagnostics.append(
                ManifestDiagnostic(source_file, 0, "duplicate", f"{entry.name} redefined; keeping last")
            )
        by_name[entry.name] = entry
    order: list[str] = []
    for entry in entries:
        if entry.name not in order:
            order.append(entry.name)
    return [by_name[n] for n in order]


def parse_manifest(
    data: bytes, kind: str, source_file: str
) -> tuple[list[DependencyEntry], list[ManifestDiagnostic]]:
    """Parse one manifest file into normalized dependency entries.

    Comment lines, editable or local-path installs, and include directives
    are skipped with diagnostics. Environment files contribute both their
    top-level conda entries and the pip subsection.
    """
    diagnostics: list[ManifestDiagnostic] = []
    entries: list[DependencyEntry] = []
    text = data.decode("utf-8", errors="replace")

    if kind == "requirements":
        for lineno, raw in enumerate(text.splitlines(), start=1):
            entry, diag = _parse_requirement_line(raw, lineno, source_file, kind)
            if diag:
                diagnostics.append(diag)
            if entry:
                entries.append(entry)
    elif kind == "environment":
        try:
            doc = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ManifestParseError(f"{source_file}: invalid YAML: {exc}") from exc
        if not isinstance(doc, dict):
            raise ManifestParseError(f"{source_file}: environment file is not a mapping")
        for item in doc.get("dependencies") or []:
            if isinstance(item, str):
                m = re.match(r"^(?P<name>[A-Za-z0-9._-]+)(?P<spec>[=<>!~].*)?$", item.strip())
                if not m:
                    diagnostics.append(ManifestDiagnostic(source_file, 0, "unparseable", item))
                    continue
                entries.append(
                    DependencyEntry(
                        normalize_name(m.group("name")),
                        re.sub(r"\s+", "", m.group("spec") or ""),
                        source_file,
                        kind,
                    )
                )
            elif isinstance(item, dict) and "pip" in item:
                for lineno, raw in enumerate(item["pip"] or [], start=1):
                    entry, diag = _parse_requirement_line(str(raw), lineno, source_file, kind)
                    if diag:
                        diagnostics.append(diag)
                    if entry:
                        entries.append(entry)
    elif kind == "pipfile":
        try:
            doc = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ManifestParseError(f"{source_file}: invalid TOML: {exc}") from exc
        for section in ("packages", "dev-packages"):
            for name, value in (doc.get(section) or {}).items():
                if isinstance(value, str):
                    spec = "" if value == "*" else re.sub(r"\s+", "", value)
                    extras = None
                elif isinstance(value, dict):
                    version = value.get("version", "*")
                    spec = "" if version == "*" else re.sub(r"\s+", "", str(version))
                    extras = ",".join(value.get("extras", [])) or None
                    if value.get("path") or value.get("editable"):
                        diagnostics.append(
                            ManifestDiagnostic(source_file, 0, "skipped", f"local install {name}")
                        )
                        continue
                else:
                    diagnostics.append(ManifestDiagnostic(source_file, 0, "unparseable", name))
                    continue
                entries.append(
                    DependencyEntry(normalize_name(name), spec, source_file, kind, extras)
                )
    elif kind == "pyproject":
        try:
            doc = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ManifestParseError(f"{source_file}: invalid TOML: {exc}") from exc
        project = doc.get("project") or {}
        dep_lines: list[str] = list(project.get("dependencies") or [])
        for group in sorted((project.get("optional-dependencies") or {})):
            dep_lines.extend(project["optional-dependencies"][group] or [])
        for lineno, raw in enumerate(dep_lines, start=1):
            entry, diag = _parse_requirement_line(str(raw), lineno, source_file, kind)
            if diag:
                diagnostics.append(diag)
            if entry:
                entries.append(entry)
        poetry = ((doc.get("tool") or {}).get("poetry") or {}).get("dependencies") or {}
        for name, value in poetry.items():
            if normalize_name(name) == "python":
                continue
            if isinstance(value, str):
                spec = "" if value == "*" else re.sub(r"\s+", "", value)
                entries.append(DependencyEntry(normalize_name(name), spec, source_file, kind))
            else:
                diagnostics.append(ManifestDiagnostic(source_file, 0, "skipped", f"table dep {name}"))
    else:
        raise ManifestParseError(f"{source_file}: unknown manifest kind {kind!r}")

    return _dedupe(entries, diagnostics, source_file), diagnostics


@dataclass(frozen=True)
class ManifestChange:
    kind: str  # addition | removal | update | migration
    name_from: str | None
    name_to: str | None
    spec_from: str | None
    spec_to: str | None
    file: str
    commit: str
    line_id: str = ""
    pair_index: int = 0


@dataclass(frozen=True)
class ManifestCommitChange:
    """Per-commit dependency delta for one manifest file."""

    commit: str
    file: str
    added: Mapping[str, str]    # name -> spec
    removed: Mapping[str, str]
    updated: Mapping[str, tuple[str, str]]


def load_analogous_pairs(path) -> tuple[frozenset[tuple[str, str]], list[ManifestDiagnostic]]:
    """Curated analogous-package pairs (CSV name_a,name_b), symmetric closure."""
    pairs: set[tuple[str, str]] = set()
    diagnostics: list[ManifestDiagnostic] = []
    from pathlib import Path

    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [normalize_name(p.strip()) for p in line.split(",")]
        if len(parts) != 2 or not all(parts):
            diagnostics.append(
                ManifestDiagnostic(str(path), lineno, "malformed-pair", raw.strip())
            )
            continue
        a, b = parts
        pairs.add((a, b))
        pairs.add((b, a))
    return frozenset(pairs), diagnostics


# A validator answers whether a co-located (removed, added) pair is a real
# migration. The default consults an annotation mapping; the GPT step the
# curated list originally backed up is out of scope and pluggable here.
MigrationValidator = Callable[[str, str, str, str], bool]


def annotation_validator(verdicts: Mapping[tuple[str, str], str]) -> MigrationValidator:
    def validate(name_from: str, name_to: str, file: str, commit: str) -> bool:
        return verdicts.get((name_from, name_to)) == "Y"

    return validate


def diff_manifests(
    prev_entries: Sequence[DependencyEntry],
    next_entries: Sequence[DependencyEntry],
    commit_changes: Sequence[ManifestCommitChange] = (),
    curated_pairs: frozenset[tuple[str, str]] = frozenset(),
    validator: MigrationValidator | None = None,
    *,
    line_id: str = "",
    pair_index: int = 0,
) -> list[ManifestChange]:
    """Classify dependency changes between two releases of one line.

    Same-name specifier changes are updates; names present on only one side
    are additions or removals. A removal and addition co-located in the same
    file and commit become a migration when the curated-pairs list contains
    them or the validator confirms them; otherwise they stay independent.
    """
    prev_map = {(e.source_file, e.name): e for e in prev_entries}
    next_map = {(e.source_file, e.name): e for e in next_entries}

    changes: list[ManifestChange] = []
    added_keys = sorted(set(next_map) - set(prev_map))
    removed_keys = sorted(set(prev_map) - set(next_map))

    commit_of_add: dict[tuple[str, str], str] = {}
    commit_of_rem: dict[tuple[str, str], str] = {}
    commit_of_update: dict[tuple[str, str], str] = {}
    cochanged: dict[tuple[str, str], tuple[set[str], set[str]]] = {}
    for cc in commit_changes:
        for name in cc.added:
            commit_of_add.setdefault((cc.file, name), cc.commit)
        for name in cc.removed:
            commit_of_rem.setdefault((cc.file, name), cc.commit)
        for name in cc.updated:
            commit_of_update.setdefault((cc.file, name), cc.commit)
        site = cochanged.setdefault((cc.commit, cc.file), (set(), set()))
        site[0].update(cc.removed)
        site[1].update(cc.added)

    for key in sorted(set(prev_map) & set(next_map)):
        prev_e, next_e = prev_map[key], next_map[key]
        if prev_e.version_spec != next_e.version_spec:
            changes.append(
                ManifestChange(
                    "update", prev_e.name, next_e.name, prev_e.version_spec,
                    next_e.version_spec, key[0], commit_of_update.get(key, ""),
                    line_id, pair_index,
                )
            )

    migrated_pairs: list[tuple[tuple[str, str], tuple[str, str], str]] = []
    consumed_add: set[tuple[str, str]] = set()
    consumed_rem: set[tuple[str, str]] = set()
    for (commit, file), (rem_names, add_names) in sorted(cochanged.items()):
        rems = sorted(
            n for n in rem_names if (file, n) in set(removed_keys) and (file, n) not in consumed_rem
        )
        adds = sorted(
            n for n in add_names if (file, n) in set(added_keys) and (file, n) not in consumed_add
        )
        # Curated matches first, then validator-confirmed pairs.
        for r in list(rems):
            for a in list(adds):
                if r == a:
                    continue
                is_migration = (r, a) in curated_pairs or (
                    validator is not None and validator(r, a, file, commit)
                )
                if is_migration:
                    migrated_pairs.append(((file, r), (file, a), commit))
                    consumed_rem.add((file, r))
                    consumed_add.add((file, a))
                    rems.remove(r)
                    adds.remove(a)
                    break

    for (file, name_from), (_, name_to), commit in migrated_pairs:
        changes.append(
            ManifestChange(
                "migration", name_from, name_to,
                prev_map[(file, name_from)].version_spec,
                next_map[(file, name_to)].version_spec,
                file, commit, line_id, pair_index,
            )
        )
    for key in added_keys:
        if key in consumed_add:
            continue
        entry = next_map[key]
        changes.append(
            ManifestChange(
                "addition", None, entry.name, None, entry.version_spec,
                key[0], commit_of_add.get(key, ""), line_id, pair_index,
            )
        )
    for key in removed_keys:
        if key in consumed_rem:
            continue
        entry = prev_map[key]
        changes.append(
            ManifestChange(
                "removal", entry.name, None, entry.version_spec, None,
                key[0], commit_of_rem.get(key, ""), line_id, pair_index,
            )
        )
    return changes
