"""Documentation artifact gathering and annotation storage.

For each release pair with detected changes, candidate artifacts come from
commit messages touching changed files, PR/issue bodies referenced from
those messages (read from a local sidecar, never a forge API), release-note
text of the target release, Markdown files changed in the window, and code
comments near changed call sites. Keyword screening ranks artifacts by hits
on the event's identifiers and a change-verb lexicon; humans do the actual
labeling through an annotation sheet the tool exports and re-loads.
"""

from __future__ import annotations

import csv
import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .changes import ChangeEvent
from .errors import AnnotationSchemaError, DegenerateAgreementError

ARTIFACT_KINDS = (
    "commit_message",
    "pr_description",
    "issue",
    "release_note",
    "markdown_file",
    "code_comment",
)

CHANGE_VERBS = (
    "add", "added", "remove", "removed", "drop", "migrate", "migrated",
    "replace", "replaced", "switch", "update", "upgrade",
)

_MIN_FRAGMENT_LEN = 4


@dataclass(frozen=True)
class DocArtifact:
    artifact_id: str
    kind: str
    text: str
    source: str
    event_ids: tuple[str, ...]

    def __post_init__(self):
        if self.kind not in ARTIFACT_KINDS:
            raise ValueError(f"unknown artifact kind {self.kind!r}")
        if not self.event_ids:
            raise ValueError("artifact must link to at least one change event")


def _artifact_id(kind: str, source: str, text: str) -> str:
    digest = hashlib.sha1(f"{kind}\x00{source}\x00{text}".encode("utf-8")).hexdigest()
    return f"{kind[:2]}-{digest[:12]}"


def make_artifact(kind: str, text: str, source: str, event_ids: Iterable[str]) -> DocArtifact:
    return DocArtifact(_artifact_id(kind, source, text), kind, text, source, tuple(event_ids))


@dataclass(frozen=True)
class CommitInfo:
    sha: str
    message: str
    touched_files: tuple[str, ...]  # logical file ids


@dataclass(frozen=True)
class SidecarRef:
    number: int
    title: str
    body: str
    kind: str = "pr_description"  # or "issue"


@dataclass(frozen=True)
class HarvestContext:
    """Plain-data inputs for one release pair, assembled by the pipeline."""

    line_id: str
    pair_index: int
    events: tuple[tuple[str, ChangeEvent], ...]  # (event_id, event)
    commits: tuple[CommitInfo, ...] = ()
    release_note: str = ""
    release_tag: str = ""
    markdown_changes: tuple[tuple[str, str], ...] = ()  # (path, added text)
    comment_windows: tuple[tuple[str, str], ...] = ()   # (event_id, nearby comment text)
    refs: Mapping[int, SidecarRef] = field(default_factory=dict)


_REF_RE = re.compile(r"#(\d+)")


def harvest(ctx: HarvestContext) -> list[DocArtifact]:
    """Collect candidate documentation artifacts for one release pair.

    Missing sources simply yield fewer artifacts; every returned artifact
    links to at least one change event of the pair.
    """
    artifacts: list[DocArtifact] = []
    all_event_ids = tuple(eid for eid, _ in ctx.events)
    if not all_event_ids:
        return artifacts

    events_by_file: dict[str, list[str]] = {}
    for eid, event in ctx.events:
        if event.file:
            events_by_file.setdefault(event.file, []).append(eid)

    referenced: dict[int, list[str]] = {}
    for commit in ctx.commits:
        touched_event_ids: list[str] = []
        for path in commit.touched_files:
            touched_event_ids.extend(events_by_file.get(path, []))
        if not touched_event_ids:
            continue
        artifacts.append(
            make_artifact("commit_message", commit.message, commit.sha, dict.fromkeys(touched_event_ids))
        )
        for num in _REF_RE.findall(commit.message):
            referenced.setdefault(int(num), []).extend(touched_event_ids)

    if ctx.release_note:
        artifacts.append(
            make_artifact("release_note", ctx.release_note, ctx.release_tag, all_event_ids)
        )
        for num in _REF_RE.findall(ctx.release_note):
            referenced.setdefault(int(num), []).extend(all_event_ids)

    for number in sorted(referenced):
        ref = ctx.refs.get(number)
        if ref is None:
            continue
        text = f"{ref.title}\n{ref.body}".strip()
        artifacts.append(
            make_artifact(ref.kind, text, f"#{number}", dict.fromkeys(referenced[number]))
        )

    for path, added_text in ctx.markdown_changes:
        if added_text.strip():
            artifacts.append(make_artifact("markdown_file", added_text, path, all_event_ids))

    for event_id, comment_text in ctx.comment_windows:
        if comment_text.strip():
            event = dict(ctx.events)[event_id]
            artifacts.append(
                make_artifact("code_comment", comment_text, f"{event.file}:{event.line}", (event_id,))
            )
    return artifacts


def _ptm_terms(event: ChangeEvent) -> list[str]:
    terms: list[str] = []
    for ptm in (event.ptm_from, event.ptm_to):
        if not ptm:
            continue
        full = ptm.lower()
        basename = full.rsplit("/", 1)[-1]
        terms.extend([full, basename])
        terms.extend(
            frag for frag in re.split(r"[-_.]", basename) if len(frag) >= _MIN_FRAGMENT_LEN
        )
    return terms


def keyword_screen(artifact: DocArtifact, event: ChangeEvent) -> list[str]:
    """Case-insensitive relevance hits of one artifact against one event.

    Terms are the event's PTM identifiers (full id, basename, and basename
    fragments) plus the change-verb lexicon, matched on alphanumeric
    boundaries so "add" does not fire inside "address".
    """
    text = artifact.text.lower()
    hits: list[str] = []
    for term in list(dict.fromkeys(_ptm_terms(event))) + list(CHANGE_VERBS):
        pattern = r"(?<![a-z0-9])" + re.escape(term) + r"(?![a-z0-9])"
        if re.search(pattern, text):
            hits.append(term)
    return sorted(set(hits))


def screen_artifact(artifact: DocArtifact, events: Mapping[str, ChangeEvent]) -> list[str]:
    """Union of keyword hits over every event the artifact links to."""
    hits: set[str] = set()
    for eid in artifact.event_ids:
        event = events.get(eid)
        if event is not None:
            hits.update(keyword_screen(artifact, event))
    return sorted(hits)


@dataclass(frozen=True)
class CodeLabel:
    code: str
    sub_theme: str
    theme: str


@dataclass(frozen=True)
class Annotation:
    artifact_id: str
    documented: bool
    rationale: bool
    keypoints: tuple[str, ...] = ()
    codes: tuple[CodeLabel, ...] = ()

    def __post_init__(self):
        if self.rationale and not self.documented:
            raise ValueError("rationale implies documented")
        if self.codes and not self.rationale:
            raise ValueError("codes require rationale")


SHEET_COLUMNS = (
    "artifact_id", "kind", "excerpt", "hits",
    "documented", "rationale", "keypoints", "code", "sub_theme", "theme",
)


def export_annotation_sheet(
    artifacts: Sequence[DocArtifact],
    events: Mapping[str, ChangeEvent],
    path: str | Path,
    annotations: Mapping[str, Annotation] | None = None,
) -> None:
    """Write the coder-facing CSV sheet, one row per artifact.

    Rows are ranked by keyword-hit count (most relevant first) to keep the
    manual screening pass short; the tool never auto-labels. Label columns
    are blank for unannotated rows; re-exporting a loaded store round-trips
    every labeled field.
    """
    annotations = annotations or {}
    ranked = sorted(
        artifacts,
        key=lambda a: (-len(screen_artifact(a, events)), a.artifact_id),
    )
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SHEET_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for artifact in ranked:
            excerpt = " ".join(artifact.text.split())[:160]
            ann = annotations.get(artifact.artifact_id)
            row = {
                "artifact_id": artifact.artifact_id,
                "kind": artifact.kind,
                "excerpt": excerpt,
                "hits": ";".join(screen_artifact(artifact, events)),
                "documented": "",
                "rationale": "",
                "keypoints": "",
                "code": "",
                "sub_theme": "",
                "theme": "",
            }
            if ann is not None:
                row["documented"] = "yes" if ann.documented else "no"
                row["rationale"] = "yes" if ann.rationale else "no"
                row["keypoints"] = ";".join(ann.keypoints)
                row["code"] = ";".join(c.code for c in ann.codes)
                row["sub_theme"] = ";".join(c.sub_theme for c in ann.codes)
                row["theme"] = ";".join(c.theme for c in ann.codes)
            writer.writerow(row)


_TRUTHY = {"yes", "y", "true", "1"}
_FALSY = {"no", "n", "false", "0"}


def _parse_flag(raw: str, row: int, column: str) -> bool | None:
    value = raw.strip().lower()
    if not value:
        return None
    if value in _TRUTHY:
        return True
    if value in _FALSY:
        return False
    raise AnnotationSchemaError(f"column {column!r} has non-boolean value {raw!r}", row=row)


def load_annotations(path: str | Path) -> dict[str, Annotation]:
    """Load the labeled annotation sheet, enforcing the label invariants.

    Rows with a blank ``documented`` column are unlabeled and skipped; a row
    claiming rationale without documentation (or codes without rationale)
    names the offending row in the raised error.
    """
    annotations: dict[str, Annotation] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for i, row in enumerate(reader, start=2):  # header is row 1
            documented = _parse_flag(row.get("documented", ""), i, "documented")
            rationale = _parse_flag(row.get("rationale", ""), i, "rationale")
            if documented is None and rationale is None:
                continue
            documented = bool(documented)
            rationale = bool(rationale)
            if rationale and not documented:
                raise AnnotationSchemaError("rationale implies documented", row=i)
            keypoints = tuple(p for p in (row.get("keypoints") or "").split(";") if p)
            codes_raw = [p for p in (row.get("code") or "").split(";") if p]
            subs = [p for p in (row.get("sub_theme") or "").split(";")]
            themes = [p for p in (row.get("theme") or "").split(";")]
            codes = tuple(
                CodeLabel(
                    code,
                    subs[j] if j < len(subs) else "",
                    themes[j] if j < len(themes) else "",
                )
                for j, code in enumerate(codes_raw)
            )
            if codes and not rationale:
                raise AnnotationSchemaError("codes require rationale", row=i)
            annotations[row["artifact_id"]] = Annotation(
                row["artifact_id"], documented, rationale, keypoints, codes
            )
    return annotations


def load_ref_sidecar(path: str | Path) -> dict[int, SidecarRef]:
    """PR/issue sidecar: JSON-lines of number, title, body, optional kind."""
    refs: dict[int, SidecarRef] = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        raw = raw.strip()
        if not raw:
            continue
        rec = json.loads(raw)
        kind = rec.get("kind", "pr")
        refs[int(rec["number"])] = SidecarRef(
            int(rec["number"]),
            rec.get("title", ""),
            rec.get("body", ""),
            "issue" if kind == "issue" else "pr_description",
        )
    return refs


def interrater_agreement(labels_a: Sequence[bool], labels_b: Sequence[bool]) -> float:
    """Cohen's kappa for two binary label vectors over the same artifacts."""
    if len(labels_a) != len(labels_b) or not labels_a:
        raise ValueError("label vectors must be non-empty and equally long")
    n = len(labels_a)
    p_o = sum(1 for a, b in zip(labels_a, labels_b) if a == b) / n
    pa_true = sum(labels_a) / n
    pb_true = sum(labels_b) / n
    p_e = pa_true * pb_true + (1 - pa_true) * (1 - pb_true)
    if p_e == 1.0:
        raise DegenerateAgreementError("both raters are constant and equal")
    return (p_o - p_e) / (1 - p_e)


def extract_nearby_comments(source_text: str, line: int, radius: int = 3) -> str:
    """Comment text within ``radius`` lines of a call site (1-based line)."""
    lines = source_text.splitlines()
    lo = max(0, line - 1 - radius)
    hi = min(len(lines), line + radius)
    comments: list[str] = []
    for raw in lines[lo:hi]:
        stripped = raw.strip()
        if stripped.startswith("#"):
            comments.append(stripped.lstrip("# ").rstrip())
        elif "#" in raw:
            # Trailing comment: ignore # inside string literals heuristically
            # by requiring whitespace before it.
            m = re.search(r"\s#\s?(.*)$", raw)
            if m:
                comments.append(m.group(1).rstrip())
    return "\n".join(c for c in comments if c)
