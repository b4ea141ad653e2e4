"""End-to-end pipeline: catalog -> lines -> snapshots -> diff -> baseline
-> harvest -> metrics -> stats, persisted stage by stage in the run store.

Stages are resumable: each records a content hash of its inputs (files,
repository ref state, config slice, and the upstream stage hash); re-running
with unchanged inputs skips the stage. Any stage failure surfaces as a
StageError naming the stage and the offending record.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import gitio
from .catalog import PtmIndex, SignatureCatalog, load_catalog, load_ptm_index
from .changes import (
    ChangeEvent,
    ChangeKind,
    MigrationAnnotation,
    MigrationAnnotations,
    anchor_t1,
    build_pair_events,
    check_annotations,
    diff_pair,
)
from .errors import ConfigError, EmptyLineResult, PtmTraceError, StageError
from .extraction import FilterConfig
from .harvest import (
    CommitInfo,
    HarvestContext,
    extract_nearby_comments,
    harvest,
    load_annotations,
    load_ref_sidecar,
    make_artifact,
    screen_artifact,
    export_annotation_sheet,
)
from .history import (
    Release,
    ReleaseLine,
    ReleasePolicy,
    ReleaseSnapshot,
    assign_logical_ids,
    attach_logical_ids,
    filter_releases,
    identify_release_lines,
    load_release_sidecar,
    parse_semver,
    replay_pair_changes,
    snapshot_release,
    window_commits,
)
from .manifests import (
    ManifestCommitChange,
    annotation_validator,
    diff_manifests,
    identify_manifest_kind,
    load_analogous_pairs,
    parse_manifest,
)
from .metrics import (
    EventDocInput,
    LineActivity,
    cadence,
    change_frequency,
    doc_metrics,
    growth,
    lifecycle_stages,
)
from .stats import DegenerateSampleError, apply_bonferroni, mann_whitney_u, wilcoxon_signed_rank
from .store import RunStore, STAGES, content_hash, hash_file

STAT_KINDS = ("overall", "addition", "removal", "migration")


@dataclass
class RunConfig:
    repos: list[str]
    catalog: str
    index: str
    out: str
    jobs: int = 1
    policy: ReleasePolicy = field(default_factory=ReleasePolicy)
    filters: FilterConfig = field(default_factory=FilterConfig)
    migration_annotations: str | None = None
    curated_pairs: str | None = None
    library_migration_annotations: str | None = None
    ptm_annotation_sheet: str | None = None
    library_annotation_sheet: str | None = None
    release_sidecars: dict[str, str] = field(default_factory=dict)
    ref_sidecars: dict[str, str] = field(default_factory=dict)
    alpha: float = 0.05
    stats_families: int = 4

    @classmethod
    def from_json(cls, path: str | Path) -> "RunConfig":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        policy_doc = doc.get("policy", {})
        cutoff = policy_doc.get("recency_cutoff")
        policy = ReleasePolicy(
            min_interval_days=float(policy_doc.get("min_interval_days", 7)),
            max_interval_days=float(policy_doc.get("max_interval_days", 365)),
            recency_cutoff=(
                datetime.fromisoformat(cutoff).replace(tzinfo=timezone.utc)
                if cutoff
                else None
            ),
            semver_ratio=float(policy_doc.get("semver_ratio", 0.8)),
            max_releases_per_year=float(policy_doc.get("max_releases_per_year", 52)),
            min_releases_per_year=float(policy_doc.get("min_releases_per_year", 1 / 3)),
        )
        filt = doc.get("filters", {})
        filters = FilterConfig(
            example_segments=frozenset(
                filt.get("example_segments", FilterConfig.example_segments)
            ),
            vendored_segments=frozenset(
                filt.get("vendored_segments", FilterConfig.vendored_segments)
            ),
        )
        try:
            return cls(
                repos=list(doc["repos"]),
                catalog=doc["catalog"],
                index=doc["index"],
                out=doc["out"],
                jobs=int(doc.get("jobs", 1)),
                policy=policy,
                filters=filters,
                migration_annotations=doc.get("migration_annotations"),
                curated_pairs=doc.get("curated_pairs"),
                library_migration_annotations=doc.get("library_migration_annotations"),
                ptm_annotation_sheet=doc.get("ptm_annotation_sheet"),
                library_annotation_sheet=doc.get("library_annotation_sheet"),
                release_sidecars=dict(doc.get("release_sidecars", {})),
                ref_sidecars=dict(doc.get("ref_sidecars", {})),
                alpha=float(doc.get("alpha", 0.05)),
                stats_families=int(doc.get("stats_families", 4)),
            )
        except KeyError as exc:
            raise ConfigError(f"config missing required key {exc}") from exc

    def validate(self) -> None:
        problems = []
        if not self.repos:
            problems.append("no repositories configured")
        for repo in self.repos:
            if not Path(repo, ".git").exists() and not Path(repo, "HEAD").exists():
                problems.append(f"repository path {repo} is not a git repository")
        for label, path in (
            ("catalog", self.catalog),
            ("index", self.index),
            ("migration_annotations", self.migration_annotations),
            ("curated_pairs", self.curated_pairs),
            ("library_migration_annotations", self.library_migration_annotations),
            ("ptm_annotation_sheet", self.ptm_annotation_sheet),
            ("library_annotation_sheet", self.library_annotation_sheet),
        ):
            if path is not None and not Path(path).is_file():
                problems.append(f"{label} path {path} does not exist")
        for mapping in (self.release_sidecars, self.ref_sidecars):
            for path in mapping.values():
                if not Path(path).is_file():
                    problems.append(f"sidecar path {path} does not exist")
        if self.policy.min_interval_days <= 0 or self.policy.max_interval_days <= 0:
            problems.append("interval bounds must be positive")
        if not (0 <= self.policy.semver_ratio <= 1):
            problems.append("semver_ratio must be within [0, 1]")
        if self.jobs < 1:
            problems.append("jobs must be >= 1")
        if problems:
            raise ConfigError("; ".join(problems))


@dataclass
class PipelineResult:
    store: RunStore
    executed: list[str]
    skipped: list[str]


def _repo_state_hash(repo: str) -> str:
    refs = gitio._run(repo, "for-each-ref", "--format=%(refname)%00%(objectname)")
    return content_hash(str(repo), refs)


def _optional_hash(path: str | None) -> str:
    return hash_file(path) if path else "-"


# --------------------------------------------------------------------------
# stage implementations
# --------------------------------------------------------------------------


def _stage_catalog(cfg: RunConfig, store: RunStore) -> None:
    catalog = load_catalog(cfg.catalog)
    index = load_ptm_index(cfg.index)
    records = [
        {
            "library": s.library_name,
            "call": s.call_pattern,
            "kind": s.call_kind.value,
            "arg": s.ptm_arg_position,
        }
        for s in catalog.signatures
    ]
    store.write_stream("catalog", records)
    store.write_json(
        "catalog_meta",
        {
            "n_signatures": len(catalog),
            "n_index_entries": len(index),
            "warnings": list(catalog.warnings),
        },
    )


def _load_line(record: dict) -> ReleaseLine:
    releases = [
        Release(
            tag=tag,
            commit=commit,
            timestamp=datetime.fromisoformat(ts),
            semver=parse_semver(tag),
            is_prerelease=False,
            is_draft=False,
            notes=notes,
        )
        for tag, commit, ts, notes in zip(
            record["tags"], record["commits"], record["timestamps"], record["notes"]
        )
    ]
    line = ReleaseLine(record["repo"], record["branch"], releases)
    line.first_parent = gitio.first_parent_commits(record["repo_path"], record["tip"])
    return line


def _stage_lines(cfg: RunConfig, store: RunStore) -> None:
    line_records = []
    rejections = []
    labels: dict[str, str] = {}
    for repo in cfg.repos:
        name = Path(repo).name
        label = name
        k = 1
        while label in labels and labels[label] != str(repo):
            k += 1
            label = f"{name}~{k}"
        labels[label] = str(repo)
        sidecar = None
        if repo in cfg.release_sidecars:
            sidecar = load_release_sidecar(cfg.release_sidecars[repo])
        try:
            result = identify_release_lines(repo, sidecar)
        except PtmTraceError as exc:
            rejections.append(
                {"subject": label, "rule": type(exc).__name__, "detail": str(exc)}
            )
            continue
        for tag in result.unassigned_tags:
            rejections.append(
                {"subject": f"{label}:{tag}", "rule": "unreachable-tag",
                 "detail": "tag not on any candidate branch's first-parent path"}
            )
        for line in result.lines:
            line.repo = label
            outcome = filter_releases(line.releases, cfg.policy)
            for rej in outcome.rejections:
                rejections.append(
                    {"subject": f"{line.line_id}:{rej.subject}", "rule": rej.rule,
                     "detail": rej.detail}
                )
            if not outcome.accepted or len(outcome.kept) < 2:
                continue
            line.releases = outcome.kept
            tip = line.first_parent[-1]
            line_records.append(
                {
                    "line_id": line.line_id,
                    "repo": line.repo,
                    "repo_path": str(repo),
                    "branch": line.branch,
                    "tip": tip,
                    "tags": [r.tag for r in line.releases],
                    "commits": [r.commit for r in line.releases],
                    "timestamps": [r.timestamp.isoformat() for r in line.releases],
                    "notes": [r.notes for r in line.releases],
                }
            )
    store.write_stream("lines", line_records)
    store.write_stream("rejections", rejections)
    if not line_records:
        raise StageError("lines", "no release line survived filtering")


def _stage_snapshot(
    cfg: RunConfig, store: RunStore, catalog: SignatureCatalog, index: PtmIndex
) -> None:
    records = []
    for record in store.read_stream("lines"):
        line = _load_line(record)
        repo_path = record["repo_path"]
        logical_maps = assign_logical_ids(repo_path, line)

        def snap_one(args) -> ReleaseSnapshot:
            i, release = args
            snapshot = snapshot_release(repo_path, release, catalog, index, cfg.filters)
            attach_logical_ids(snapshot, logical_maps[i])
            return snapshot

        items = list(enumerate(line.releases))
        if cfg.jobs > 1:
            with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
                snapshots = list(pool.map(snap_one, items))
        else:
            snapshots = [snap_one(item) for item in items]

        for i, snapshot in enumerate(snapshots):
            records.append(
                {
                    "line_id": record["line_id"],
                    "release_index": i,
                    "tag": snapshot.release.tag,
                    "commit": snapshot.release.commit,
                    "total": snapshot.total,
                    "counts": dict(sorted(snapshot.ptms.items())),
                    "files": [
                        {
                            "path": f.file_path,
                            "logical": f.logical_file,
                            "counts": dict(sorted(f.counts.items())),
                            "occurrences": [
                                [o.ptm_id, o.line, o.resolution.value, o.indexed]
                                for o in f.occurrences
                            ],
                        }
                        for f in snapshot.files
                        if f.occurrences
                    ],
                    "logical_map": logical_maps[i],
                }
            )
    store.write_stream("snapshots", records)


def _load_migration_annotations(path: str | None) -> MigrationAnnotations:
    if not path:
        return MigrationAnnotations()
    records = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        raw = raw.strip()
        if not raw or raw.startswith("#"):
            continue
        doc = json.loads(raw)
        records.append(
            MigrationAnnotation(
                line_id=doc["line_id"],
                pair_index=int(doc["pair_index"]),
                file=doc["file"],
                commit=doc.get("commit", "*"),
                ptm_from=doc["ptm_from"],
                ptm_to=doc["ptm_to"],
                verdict=doc["verdict"],
                note=doc.get("note", ""),
            )
        )
    return MigrationAnnotations(records)


def _stage_diff(
    cfg: RunConfig, store: RunStore, catalog: SignatureCatalog, index: PtmIndex
) -> None:
    annotations = _load_migration_annotations(cfg.migration_annotations)
    snapshots_by_line: dict[str, list[dict]] = {}
    for record in store.read_stream("snapshots"):
        snapshots_by_line.setdefault(record["line_id"], []).append(record)
    pair_records = []
    event_records = []
    candidate_records = []
    diagnostics = []

    for line_record in store.read_stream("lines"):
        line_id = line_record["line_id"]
        line = _load_line(line_record)
        snaps = sorted(snapshots_by_line.get(line_id, []), key=lambda r: r["release_index"])
        counts = [s["total"] for s in snaps]
        try:
            window = anchor_t1(line_id, counts)
        except EmptyLineResult as exc:
            diagnostics.append({"line_id": line_id, "reason": "empty-line", "detail": str(exc)})
            continue

        pair_set = [(i, j, True) for i, j in window.pair_indices]
        if window.t1_index > 0:
            # The adoption pair targets t1; its additions carry the
            # first-adoption flag but stay outside the metrics window.
            pair_set = [(window.t1_index - 1, window.t1_index, False)] + pair_set

        for i, j, in_window in pair_set:
            delta = diff_pair(
                snaps[i]["counts"],
                snaps[j]["counts"],
                line_id=line_id,
                pair_index=i,
                from_tag=snaps[i]["tag"],
                to_tag=snaps[j]["tag"],
            )
            commit_changes = replay_pair_changes(
                line_record["repo_path"], line, i, catalog, index, cfg.filters,
                snaps[i]["logical_map"],
            )
            events, candidates = build_pair_events(
                delta, commit_changes, annotations, first_adoption=not in_window
            )
            pair_records.append(
                {
                    "line_id": line_id,
                    "pair_index": i,
                    "from_tag": delta.from_tag,
                    "to_tag": delta.to_tag,
                    "deltas": dict(sorted(delta.deltas.items())),
                    "A": delta.A,
                    "R": delta.R,
                    "U": delta.U,
                    "t1_index": window.t1_index,
                    "n_window_releases": window.n_window_releases,
                    "in_window": in_window,
                }
            )
            confirmed = {
                (e.ptm_from, e.ptm_to, e.file, e.commit)
                for e in events
                if e.kind is ChangeKind.MIGRATION
            }
            for cand in candidates:
                candidate_records.append(
                    {
                        "line_id": line_id,
                        "pair_index": i,
                        "ptm_from": cand.ptm_from,
                        "ptm_to": cand.ptm_to,
                        "file": cand.file,
                        "commit": cand.commit,
                        "from_line": cand.from_line,
                        "to_line": cand.to_line,
                        "confirmed": (cand.ptm_from, cand.ptm_to, cand.file, cand.commit)
                        in confirmed,
                    }
                )
            for seq, event in enumerate(events):
                event_records.append(
                    {
                        "event_id": f"{line_id}#p{i}#e{seq}",
                        "line_id": line_id,
                        "pair_index": i,
                        "kind": event.kind.value,
                        "ptm_from": event.ptm_from,
                        "ptm_to": event.ptm_to,
                        "file": event.file,
                        "commit": event.commit,
                        "line": event.line,
                        "first_adoption": event.first_adoption,
                        "in_window": in_window,
                    }
                )

    for message in check_annotations(annotations):
        diagnostics.append({"reason": "unknown-annotation", "detail": message})
    store.write_stream("pairs", pair_records)
    store.write_stream("events", event_records)
    store.write_stream("candidates", candidate_records)
    store.write_stream("diagnostics_diff", diagnostics)


def _manifest_entries(repo: str, commit: str) -> dict[str, list]:
    entries: dict[str, list] = {}
    try:
        paths = gitio._run(repo, "ls-tree", "-r", "--name-only", commit).splitlines()
    except gitio.GitError:
        return entries
    for path in sorted(paths):
        kind = identify_manifest_kind(path)
        if kind is None:
            continue
        blob = gitio.read_file(repo, commit, path)
        if blob is None:
            continue
        try:
            parsed, _ = parse_manifest(blob, kind, path)
        except PtmTraceError:
            continue
        entries[path] = parsed
    return entries


def _library_validator(records: list[dict], line_id: str, pair_index: int):
    verdicts = {
        (r["ptm_from"], r["ptm_to"]): r["verdict"]
        for r in records
        if r["line_id"] in (line_id, "*") and int(r.get("pair_index", -1)) in (pair_index, -1)
    }
    return annotation_validator(verdicts)


def _stage_baseline(cfg: RunConfig, store: RunStore) -> None:
    curated = frozenset()
    if cfg.curated_pairs:
        curated, _ = load_analogous_pairs(cfg.curated_pairs)
    lib_annotations: list[dict] = []
    if cfg.library_migration_annotations:
        for raw in Path(cfg.library_migration_annotations).read_text(encoding="utf-8").splitlines():
            raw = raw.strip()
            if raw and not raw.startswith("#"):
                lib_annotations.append(json.loads(raw))

    pairs_by_line: dict[str, list[dict]] = {}
    for record in store.read_stream("pairs"):
        if record["in_window"]:
            pairs_by_line.setdefault(record["line_id"], []).append(record)

    baseline_records = []
    count_records = []
    for line_record in store.read_stream("lines"):
        line_id = line_record["line_id"]
        repo_path = line_record["repo_path"]
        line = _load_line(line_record)
        entries_per_release = [
            _manifest_entries(repo_path, commit) for commit in line_record["commits"]
        ]
        for i, per_file in enumerate(entries_per_release):
            count_records.append(
                {
                    "line_id": line_id,
                    "release_index": i,
                    "tag": line_record["tags"][i],
                    "n_entries": sum(len(v) for v in per_file.values()),
                }
            )
        for pair in sorted(pairs_by_line.get(line_id, []), key=lambda r: r["pair_index"]):
            i = pair["pair_index"]
            prev_entries = [e for lst in entries_per_release[i].values() for e in lst]
            next_entries = [e for lst in entries_per_release[i + 1].values() for e in lst]
            commit_changes = _manifest_replay(repo_path, line, i)
            validator = _library_validator(lib_annotations, line_id, i)
            changes = diff_manifests(
                prev_entries,
                next_entries,
                commit_changes,
                curated,
                validator,
                line_id=line_id,
                pair_index=i,
            )
            for seq, change in enumerate(changes):
                baseline_records.append(
                    {
                        "event_id": f"lib:{line_id}#p{i}#e{seq}",
                        "line_id": line_id,
                        "pair_index": i,
                        "kind": change.kind,
                        "name_from": change.name_from,
                        "name_to": change.name_to,
                        "spec_from": change.spec_from,
                        "spec_to": change.spec_to,
                        "file": change.file,
                        "commit": change.commit,
                    }
                )
    store.write_stream("baseline_events", baseline_records)
    store.write_stream("baseline_counts", count_records)


def _manifest_replay(repo: str, line: ReleaseLine, pair_index: int) -> list[ManifestCommitChange]:
    changes: list[ManifestCommitChange] = []
    prev = line.releases[pair_index].commit
    for commit in window_commits(line, pair_index):
        for change in gitio.diff_changes(repo, prev, commit):
            path = change.path or change.old_path
            kind = identify_manifest_kind(path)
            if kind is None:
                continue

            def parse_at(rev: str, p: str) -> dict[str, str]:
                blob = gitio.read_file(repo, rev, p)
                if blob is None:
                    return {}
                try:
                    entries, _ = parse_manifest(blob, kind, p)
                except PtmTraceError:
                    return {}
                return {e.name: e.version_spec for e in entries}

            before = parse_at(prev, change.old_path or path)
            after = parse_at(commit, change.path or path)
            added = {n: s for n, s in after.items() if n not in before}
            removed = {n: s for n, s in before.items() if n not in after}
            updated = {
                n: (before[n], after[n])
                for n in before
                if n in after and before[n] != after[n]
            }
            if added or removed or updated:
                changes.append(ManifestCommitChange(commit, path, added, removed, updated))
        prev = commit
    return changes


def _stage_harvest(cfg: RunConfig, store: RunStore) -> None:
    lines_by_id = {r["line_id"]: r for r in store.read_stream("lines")}
    snaps_by_line: dict[str, list[dict]] = {}
    for record in store.read_stream("snapshots"):
        snaps_by_line.setdefault(record["line_id"], []).append(record)
    events_by_pair: dict[tuple[str, int], list[dict]] = {}
    for record in store.read_stream("events"):
        if record["in_window"]:
            events_by_pair.setdefault((record["line_id"], record["pair_index"]), []).append(record)
    lib_events_by_pair: dict[tuple[str, int], list[dict]] = {}
    for record in store.read_stream("baseline_events"):
        lib_events_by_pair.setdefault(
            (record["line_id"], record["pair_index"]), []
        ).append(record)

    artifact_records = []
    ptm_event_objs: dict[str, ChangeEvent] = {}

    for (line_id, pair_index), event_recs in sorted(events_by_pair.items()):
        line_record = lines_by_id[line_id]
        repo_path = line_record["repo_path"]
        line = _load_line(line_record)
        refs = {}
        if repo_path in cfg.ref_sidecars:
            refs = load_ref_sidecar(cfg.ref_sidecars[repo_path])
        snaps = sorted(snaps_by_line[line_id], key=lambda r: r["release_index"])
        logical_maps = [s["logical_map"] for s in snaps]

        events: list[tuple[str, ChangeEvent]] = []
        for rec in event_recs:
            event = ChangeEvent(
                ChangeKind(rec["kind"]), rec["ptm_from"], rec["ptm_to"], rec["file"],
                rec["commit"], line_id, pair_index, line=rec["line"],
                first_adoption=rec["first_adoption"],
            )
            events.append((rec["event_id"], event))
            ptm_event_objs[rec["event_id"]] = event

        commits = _window_commit_infos(repo_path, line, pair_index, logical_maps[pair_index])
        markdown = _markdown_changes(repo_path, line, pair_index)
        comment_windows = _comment_windows(repo_path, line, pair_index, events, logical_maps)
        target = line.releases[pair_index + 1]
        ctx = HarvestContext(
            line_id=line_id,
            pair_index=pair_index,
            events=tuple(events),
            commits=tuple(commits),
            release_note=target.notes,
            release_tag=target.tag,
            markdown_changes=tuple(markdown),
            comment_windows=tuple(comment_windows),
            refs=refs,
        )
        for artifact in harvest(ctx):
            artifact_records.append(
                {
                    "artifact_id": artifact.artifact_id,
                    "kind": artifact.kind,
                    "text": artifact.text,
                    "source": artifact.source,
                    "event_ids": list(artifact.event_ids),
                    "domain": "ptm",
                    "hits": screen_artifact(artifact, dict(events)),
                }
            )

    # Library domain: commit messages touching manifests, release notes,
    # markdown edits; no call-site comments.
    for (line_id, pair_index), event_recs in sorted(lib_events_by_pair.items()):
        line_record = lines_by_id[line_id]
        repo_path = line_record["repo_path"]
        line = _load_line(line_record)
        manifest_events_by_file: dict[str, list[str]] = {}
        for rec in event_recs:
            manifest_events_by_file.setdefault(rec["file"], []).append(rec["event_id"])
        all_ids = [r["event_id"] for r in event_recs]
        prev = line.releases[pair_index].commit
        for commit in window_commits(line, pair_index):
            touched = [c.path or c.old_path for c in gitio.diff_changes(repo_path, prev, commit)]
            linked = []
            for path in touched:
                linked.extend(manifest_events_by_file.get(path, []))
            if linked:
                artifact = make_artifact(
                    "commit_message", gitio.commit_message(repo_path, commit), commit,
                    dict.fromkeys(linked),
                )
                artifact_records.append(
                    {
                        "artifact_id": artifact.artifact_id,
                        "kind": artifact.kind,
                        "text": artifact.text,
                        "source": artifact.source,
                        "event_ids": list(artifact.event_ids),
                        "domain": "library",
                        "hits": [],
                    }
                )
            prev = commit
        target = line.releases[pair_index + 1]
        if target.notes:
            artifact = make_artifact("release_note", target.notes, target.tag, all_ids)
            artifact_records.append(
                {
                    "artifact_id": artifact.artifact_id,
                    "kind": artifact.kind,
                    "text": artifact.text,
                    "source": artifact.source,
                    "event_ids": list(artifact.event_ids),
                    "domain": "library",
                    "hits": [],
                }
            )

    # Deduplicate artifacts that arise for several pairs (same id): merge links.
    merged: dict[tuple[str, str], dict] = {}
    for record in artifact_records:
        key = (record["artifact_id"], record["domain"])
        if key in merged:
            ids = dict.fromkeys(merged[key]["event_ids"] + record["event_ids"])
            merged[key]["event_ids"] = list(ids)
            merged[key]["hits"] = sorted(set(merged[key]["hits"]) | set(record["hits"]))
        else:
            merged[key] = record
    final_records = [merged[k] for k in sorted(merged)]
    store.write_stream("artifacts", final_records)

    # Blank sheets for human coders, one row per artifact.
    for domain, filename, event_objs in (
        ("ptm", "ptm_sheet_template.csv", ptm_event_objs),
        ("library", "library_sheet_template.csv", {}),
    ):
        domain_artifacts = [
            make_artifact(r["kind"], r["text"], r["source"], r["event_ids"])
            for r in final_records
            if r["domain"] == domain
        ]
        export_annotation_sheet(domain_artifacts, event_objs, store.root / filename)


def _window_commit_infos(repo, line, pair_index, start_logical) -> list[CommitInfo]:
    infos = []
    logical = dict(start_logical)
    prev = line.releases[pair_index].commit
    for commit in window_commits(line, pair_index):
        touched = []
        step = dict(logical)
        for change in gitio.diff_changes(repo, prev, commit):
            if change.status == "R":
                step[change.path] = logical.get(change.old_path, change.old_path)
            path = change.path or change.old_path
            touched.append(step.get(path, logical.get(path, path)))
        infos.append(
            CommitInfo(commit, gitio.commit_message(repo, commit), tuple(sorted(set(touched))))
        )
        logical = step
        prev = commit
    return infos


def _markdown_changes(repo, line, pair_index) -> list[tuple[str, str]]:
    prev = line.releases[pair_index].commit
    nxt = line.releases[pair_index + 1].commit
    changes = []
    for change in gitio.diff_changes(repo, prev, nxt):
        path = change.path or change.old_path
        if not path.lower().endswith(".md"):
            continue
        added = gitio.added_diff_lines(repo, prev, nxt, path)
        if added.strip():
            changes.append((path, added))
    return sorted(changes)


def _comment_windows(repo, line, pair_index, events, logical_maps) -> list[tuple[str, str]]:
    windows = []
    for event_id, event in events:
        if not event.file or event.line is None:
            continue
        # Removals read the source release; additions/migrations the target.
        rel_index = pair_index if event.kind is ChangeKind.REMOVAL else pair_index + 1
        inverse = {v: k for k, v in logical_maps[rel_index].items()}
        physical = inverse.get(event.file, event.file)
        text = gitio.read_text_file(repo, line.releases[rel_index].commit, physical)
        if text is None:
            continue
        comments = extract_nearby_comments(text, event.line)
        if comments:
            windows.append((event_id, comments))
    return windows


# --------------------------------------------------------------------------
# metrics + stats stages
# --------------------------------------------------------------------------


def _line_activities(store: RunStore, domain: str) -> list[LineActivity]:
    lines = store.read_stream("lines")
    pairs = [r for r in store.read_stream("pairs") if r["in_window"]]
    pairs_by_line: dict[str, list[dict]] = {}
    for record in pairs:
        pairs_by_line.setdefault(record["line_id"], []).append(record)

    if domain == "ptm":
        events = [r for r in store.read_stream("events") if r["in_window"]]
    else:
        events = store.read_stream("baseline_events")
    events_by_line: dict[str, list[dict]] = {}
    for record in events:
        events_by_line.setdefault(record["line_id"], []).append(record)

    if domain == "ptm":
        counts_by_line: dict[str, dict[int, int]] = {}
        for record in store.read_stream("snapshots"):
            counts_by_line.setdefault(record["line_id"], {})[record["release_index"]] = record[
                "total"
            ]
    else:
        counts_by_line = {}
        for record in store.read_stream("baseline_counts"):
            counts_by_line.setdefault(record["line_id"], {})[record["release_index"]] = record[
                "n_entries"
            ]

    activities = []
    for line_record in lines:
        line_id = line_record["line_id"]
        line_pairs = pairs_by_line.get(line_id)
        if not line_pairs:
            continue
        t1 = line_pairs[0]["t1_index"]
        n_line = len(line_record["tags"])
        line_events = events_by_line.get(line_id, [])
        by_kind: dict[str, int] = {}
        addition_targets = []
        for event in line_events:
            by_kind[event["kind"]] = by_kind.get(event["kind"], 0) + 1
            if event["kind"] == "addition":
                addition_targets.append(event["pair_index"] + 1)
        counts = counts_by_line.get(line_id, {})
        activities.append(
            LineActivity(
                line_id=line_id,
                n_window_releases=n_line - t1,
                n_line_releases=n_line,
                events_by_kind=by_kind,
                count_t1=counts.get(t1, 0),
                count_end=counts.get(n_line - 1, 0),
                addition_target_indices=tuple(sorted(addition_targets)),
            )
        )
    return activities


def _domain_metrics(store: RunStore, domain: str, sheet: str | None) -> dict | None:
    pairs = [r for r in store.read_stream("pairs") if r["in_window"]]
    if domain == "library" and not store.read_stream("baseline_counts"):
        return None
    if domain == "ptm":
        events = [r for r in store.read_stream("events") if r["in_window"]]
    else:
        events = store.read_stream("baseline_events")

    events_per_pair: dict[tuple[str, int], int] = {
        (r["line_id"], r["pair_index"]): 0 for r in pairs
    }
    for record in events:
        key = (record["line_id"], record["pair_index"])
        if key in events_per_pair:
            events_per_pair[key] += 1
    frequency = change_frequency(list(events_per_pair.values()))

    activities = _line_activities(store, domain)
    n_lines = len(activities)
    kinds = ("addition", "removal", "update", "migration") if domain == "library" else (
        "addition", "removal", "migration"
    )
    by_kind_totals = {k: sum(a.events_by_kind.get(k, 0) for a in activities) for k in kinds}
    total_events = sum(by_kind_totals.values())

    cadence_block = {}
    for kind in ("overall",) + kinds:
        records, median = cadence(activities, kind)
        cadence_block[kind] = {"n_lines": len(records), "median": median}

    line_rates = {
        kind: {
            "n": sum(1 for a in activities if a.events_by_kind.get(kind, 0) >= 1),
            "den": n_lines,
        }
        for kind in kinds
    }
    line_rates["overall"] = {
        "n": sum(1 for a in activities if a.events(None) >= 1),
        "den": n_lines,
    }

    changed_lines = [a for a in activities if a.events(None) >= 1]
    growth_summary = growth(changed_lines)
    histogram, excluded = lifecycle_stages(activities)

    docs = None
    if sheet:
        annotations = load_annotations(sheet)
        artifacts = [r for r in store.read_stream("artifacts") if r["domain"] == domain]
        event_links: dict[str, list[str]] = {}
        for record in artifacts:
            for eid in record["event_ids"]:
                event_links.setdefault(eid, []).append(record["artifact_id"])
        doc_inputs = []
        for record in events:
            eid = record["event_id"]
            linked = event_links.get(eid, [])
            documented = any(
                annotations.get(a) and annotations[a].documented for a in linked
            )
            rationale = any(
                annotations.get(a) and annotations[a].rationale for a in linked
            )
            doc_inputs.append(
                EventDocInput(
                    eid,
                    record["kind"],
                    f"{record['line_id']}#p{record['pair_index']}",
                    documented,
                    rationale,
                )
            )
        annotated = [annotations.get(r["artifact_id"]) for r in artifacts]
        n_documented_artifacts = sum(1 for a in annotated if a and a.documented)
        n_rationale_artifacts = sum(1 for a in annotated if a and a.rationale)
        dm = doc_metrics(doc_inputs, n_documented_artifacts, n_rationale_artifacts)
        docs = {
            "documentation_rate": dm.documentation_rate,
            "pair_documentation_rate": dm.pair_documentation_rate,
            "rationale_rate": dm.rationale_rate,
            "rationale_rate_documented": dm.rationale_rate_documented,
            "rationale_rate_artifacts": dm.rationale_rate_artifacts,
            "by_kind": {k: dict(v) for k, v in dm.by_kind.items()},
            "n_events": dm.n_events,
            "n_artifacts": dm.n_artifacts,
        }

    return {
        "n_lines": n_lines,
        "n_pairs": len(pairs),
        "frequency": {
            "changed_pairs": frequency.changed_pairs,
            "total_pairs": frequency.total_pairs,
            "proportion": frequency.proportion,
        },
        "events_total": total_events,
        "events_by_kind": by_kind_totals,
        "line_rates": line_rates,
        "cadence": cadence_block,
        "growth": {
            "n_changed_lines": len(changed_lines),
            "net_growth_lines": sum(1 for r in growth_summary.records if r.factor > 1),
            "net_growth_share": growth_summary.net_growth_share,
            "addition_only_share": growth_summary.addition_only_share,
            "median_factor": growth_summary.median_factor,
        },
        "lifecycle": {"histogram": histogram, "excluded_lines": excluded},
        "docs": docs,
    }


def _stage_metrics(cfg: RunConfig, store: RunStore) -> None:
    lines = store.read_stream("lines")
    pairs = [r for r in store.read_stream("pairs") if r["in_window"]]
    window_releases = sum({r["line_id"]: r["n_window_releases"] for r in pairs}.values())
    overview = {
        "repos": len({r["repo"] for r in lines}),
        "lines": len({r["line_id"] for r in pairs}),
        "releases_analyzed": window_releases,
        "pairs": len(pairs),
    }
    metrics_doc = {
        "overview": overview,
        "ptm": _domain_metrics(store, "ptm", cfg.ptm_annotation_sheet),
        "library": _domain_metrics(store, "library", cfg.library_annotation_sheet),
    }
    store.write_json("metrics", metrics_doc)

    line_metric_records = []
    for domain in ("ptm", "library"):
        if domain == "library" and not store.read_stream("baseline_counts"):
            continue
        for activity in _line_activities(store, domain):
            overall = activity.events(None)
            line_metric_records.append(
                {
                    "line_id": activity.line_id,
                    "domain": domain,
                    "n_window_releases": activity.n_window_releases,
                    "n_line_releases": activity.n_line_releases,
                    "events_by_kind": dict(sorted(activity.events_by_kind.items())),
                    "events_total": overall,
                    "cadence_overall": (
                        activity.n_window_releases / overall if overall else None
                    ),
                    "count_t1": activity.count_t1,
                    "count_end": activity.count_end,
                    "growth_factor": (
                        activity.count_end / activity.count_t1 if activity.count_t1 else None
                    ),
                }
            )
    store.write_stream("line_metrics", line_metric_records)


def _stage_stats(cfg: RunConfig, store: RunStore) -> None:
    records = store.read_stream("line_metrics")
    ptm = {r["line_id"]: r for r in records if r["domain"] == "ptm"}
    lib = {r["line_id"]: r for r in records if r["domain"] == "library"}

    def line_cadence(record: dict, kind: str) -> float | None:
        n = (
            record["events_total"]
            if kind == "overall"
            else record["events_by_kind"].get(kind, 0)
        )
        return record["n_window_releases"] / n if n else None

    wilcoxon_rows = []
    mwu_rows = []
    for kind in STAT_KINDS:
        paired_a, paired_b = [], []
        for line_id in sorted(set(ptm) & set(lib)):
            a = line_cadence(ptm[line_id], kind)
            b = line_cadence(lib[line_id], kind)
            if a is not None and b is not None:
                paired_a.append(a)
                paired_b.append(b)
        row = {"kind": kind, "n_a": len(paired_a), "n_b": len(paired_b),
               "median_a": _median(paired_a), "median_b": _median(paired_b)}
        try:
            result = wilcoxon_signed_rank(paired_a, paired_b)
            row.update(
                statistic=result.statistic, p_value=result.p_value,
                effect_name=result.effect_name, effect=result.effect,
                exact=result.exact, degenerate=False,
            )
        except (DegenerateSampleError, ValueError) as exc:
            row.update(statistic=None, p_value=None, effect_name="rank_biserial_r",
                       effect=None, exact=None, degenerate=True, note=str(exc))
        wilcoxon_rows.append(row)

        pop_a = [c for c in (line_cadence(r, kind) for r in ptm.values()) if c is not None]
        pop_b = [c for c in (line_cadence(r, kind) for r in lib.values()) if c is not None]
        row = {"kind": kind, "n_a": len(pop_a), "n_b": len(pop_b),
               "median_a": _median(pop_a), "median_b": _median(pop_b)}
        try:
            result = mann_whitney_u(sorted(pop_a), sorted(pop_b))
            row.update(
                statistic=result.statistic, p_value=result.p_value,
                effect_name=result.effect_name, effect=result.effect,
                exact=result.exact, degenerate=False,
            )
        except DegenerateSampleError as exc:
            row.update(statistic=None, p_value=None, effect_name="cliffs_delta",
                       effect=None, exact=None, degenerate=True, note=str(exc))
        mwu_rows.append(row)

    corrected = cfg.alpha / cfg.stats_families
    for rows in (wilcoxon_rows, mwu_rows):
        for row in rows:
            row["alpha_corrected"] = corrected
            row["significant"] = (
                bool(row["p_value"] < corrected) if row.get("p_value") is not None else None
            )
    store.write_json(
        "stats",
        {
            "alpha": cfg.alpha,
            "families": cfg.stats_families,
            "alpha_corrected": corrected,
            "wilcoxon_signed_rank": wilcoxon_rows,
            "mann_whitney_u": mwu_rows,
        },
    )


def _median(values: list[float]) -> float | None:
    if not values:
        return None
    import statistics

    return statistics.median(values)


# --------------------------------------------------------------------------
# orchestration
# --------------------------------------------------------------------------


def run_pipeline(cfg: RunConfig, through: str = "stats", force: bool = False) -> PipelineResult:
    """Execute pipeline stages in order up to and including ``through``.

    Stages whose recorded input hash matches are skipped unless ``force``.
    """
    cfg.validate()
    if through not in STAGES:
        raise ConfigError(f"unknown stage {through!r}")
    store = RunStore(cfg.out)
    executed: list[str] = []
    skipped: list[str] = []

    catalog_hash = content_hash(hash_file(cfg.catalog), hash_file(cfg.index))
    repo_hash = content_hash(*[_repo_state_hash(r) for r in cfg.repos])
    policy_blob = json.dumps(
        {
            "interval": [cfg.policy.min_interval_days, cfg.policy.max_interval_days],
            "cutoff": cfg.policy.recency_cutoff.isoformat() if cfg.policy.recency_cutoff else None,
            "semver_ratio": cfg.policy.semver_ratio,
            "activity": [cfg.policy.min_releases_per_year, cfg.policy.max_releases_per_year],
            "sidecars": sorted(cfg.release_sidecars.items()),
        },
        sort_keys=True,
    )
    filters_blob = json.dumps(
        {
            "example": sorted(cfg.filters.example_segments),
            "vendored": sorted(cfg.filters.vendored_segments),
        },
        sort_keys=True,
    )

    hashes = {"catalog": catalog_hash}
    hashes["lines"] = content_hash(hashes["catalog"], repo_hash, policy_blob)
    hashes["snapshot"] = content_hash(hashes["lines"], filters_blob)
    hashes["diff"] = content_hash(hashes["snapshot"], _optional_hash(cfg.migration_annotations))
    hashes["baseline"] = content_hash(
        hashes["diff"],
        _optional_hash(cfg.curated_pairs),
        _optional_hash(cfg.library_migration_annotations),
    )
    hashes["harvest"] = content_hash(
        hashes["baseline"], json.dumps(sorted(cfg.ref_sidecars.items()))
    )
    hashes["metrics"] = content_hash(
        hashes["harvest"],
        _optional_hash(cfg.ptm_annotation_sheet),
        _optional_hash(cfg.library_annotation_sheet),
    )
    hashes["stats"] = content_hash(hashes["metrics"], str(cfg.alpha), str(cfg.stats_families))

    catalog = load_catalog(cfg.catalog)
    index = load_ptm_index(cfg.index)

    runners = {
        "catalog": lambda: _stage_catalog(cfg, store),
        "lines": lambda: _stage_lines(cfg, store),
        "snapshot": lambda: _stage_snapshot(cfg, store, catalog, index),
        "diff": lambda: _stage_diff(cfg, store, catalog, index),
        "baseline": lambda: _stage_baseline(cfg, store),
        "harvest": lambda: _stage_harvest(cfg, store),
        "metrics": lambda: _stage_metrics(cfg, store),
        "stats": lambda: _stage_stats(cfg, store),
    }

    for stage in STAGES:
        if not force and store.stage_complete(stage, hashes[stage]):
            skipped.append(stage)
        else:
            try:
                runners[stage]()
            except StageError:
                raise
            except PtmTraceError as exc:
                raise StageError(stage, str(exc)) from exc
            store.mark_stage(stage, hashes[stage])
            executed.append(stage)
        if stage == through:
            break
    return PipelineResult(store, executed, skipped)
