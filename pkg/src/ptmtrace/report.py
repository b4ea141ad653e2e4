"""Report emission: comparison tables as JSON and CSV plus rendered figures.

Four report files come out of a completed store: the cross-domain summary
(metric rows for the PTM and library domains), per-line cadence/growth
tables, the statistical comparison table, and the documentation-coverage
metrics. Output is byte-stable: fixed row ordering, sorted JSON keys, and
deterministic figure rendering. A store missing the baseline stage still
reports, with explicit nulls in the library column.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .errors import ReportPrereqError
from .store import RunStore

REPORT_FILES = ("summary", "lines", "stats", "docs")


def _dump_json(path: Path, obj) -> None:
    path.write_text(
        json.dumps(obj, sort_keys=True, ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )


def _dump_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else v for v in row])


def _fmt_share(numerator: int | None, denominator: int | None) -> float | None:
    if not denominator or numerator is None:
        return None
    return numerator / denominator


def _summary_rows(metrics: dict) -> list[dict]:
    ptm = metrics.get("ptm") or {}
    lib = metrics.get("library")
    overview = metrics.get("overview", {})

    def pick(domain: dict | None, *keys):
        node = domain
        for key in keys:
            if node is None:
                return None
            node = node.get(key)
        return node

    rows: list[dict] = []

    def add(section: str, metric: str, ptm_value, lib_value):
        rows.append(
            {"section": section, "metric": metric, "ptm": ptm_value, "library": lib_value}
        )

    add("overview", "repositories", overview.get("repos"), overview.get("repos"))
    add("overview", "release_lines", overview.get("lines"), overview.get("lines"))
    add("overview", "releases_analyzed", overview.get("releases_analyzed"),
        overview.get("releases_analyzed"))
    add("overview", "release_pairs", overview.get("pairs"), overview.get("pairs"))

    add("frequency", "pairs_with_changes",
        pick(ptm, "frequency", "proportion"), pick(lib, "frequency", "proportion"))
    add("frequency", "pairs_with_changes_n",
        pick(ptm, "frequency", "changed_pairs"), pick(lib, "frequency", "changed_pairs"))
    add("frequency", "total_events", pick(ptm, "events_total"), pick(lib, "events_total"))
    for kind in ("addition", "removal", "migration", "update"):
        ptm_events = pick(ptm, "events_by_kind", kind)
        lib_events = pick(lib, "events_by_kind", kind)
        ptm_total = pick(ptm, "events_total")
        lib_total = pick(lib, "events_total")
        add("frequency", f"{kind}_share",
            _fmt_share(ptm_events, ptm_total) if ptm_events is not None else None,
            _fmt_share(lib_events, lib_total) if lib_events is not None else None)
    for kind in ("overall", "addition", "removal", "migration", "update"):
        ptm_rate = pick(ptm, "line_rates", kind)
        lib_rate = pick(lib, "line_rates", kind)
        add("line_rates", f"lines_with_{kind}",
            _fmt_share(ptm_rate and ptm_rate["n"], ptm_rate and ptm_rate["den"]),
            _fmt_share(lib_rate and lib_rate["n"], lib_rate and lib_rate["den"]))
    for kind in ("overall", "addition", "removal", "migration", "update"):
        add("cadence", f"median_{kind}_cadence",
            pick(ptm, "cadence", kind, "median"), pick(lib, "cadence", kind, "median"))
    add("growth", "net_growth_share",
        pick(ptm, "growth", "net_growth_share"), pick(lib, "growth", "net_growth_share"))
    add("growth", "addition_only_share",
        pick(ptm, "growth", "addition_only_share"), pick(lib, "growth", "addition_only_share"))
    add("growth", "median_growth_factor",
        pick(ptm, "growth", "median_factor"), pick(lib, "growth", "median_factor"))
    for i in range(6):
        ptm_hist = pick(ptm, "lifecycle", "histogram")
        lib_hist = pick(lib, "lifecycle", "histogram")
        add("lifecycle", f"stage_{i}_additions",
            ptm_hist[i] if ptm_hist else None, lib_hist[i] if lib_hist else None)
    add("docs", "events_analyzed", pick(ptm, "docs", "n_events"), pick(lib, "docs", "n_events"))
    add("docs", "artifacts_identified",
        pick(ptm, "docs", "n_artifacts"), pick(lib, "docs", "n_artifacts"))
    for metric in (
        "documentation_rate",
        "pair_documentation_rate",
        "rationale_rate",
        "rationale_rate_documented",
        "rationale_rate_artifacts",
    ):
        add("docs", metric, pick(ptm, "docs", metric), pick(lib, "docs", metric))
    return rows


def emit_report(
    store: RunStore,
    out_dir: str | Path | None = None,
    formats: tuple[str, ...] = ("json", "csv"),
    figures: bool = True,
) -> list[Path]:
    """Write the report files; returns the paths written.

    Requires the metrics and stats stages; raises ReportPrereqError naming
    whatever is missing. Re-emitting over an unchanged store writes
    byte-identical files.
    """
    metrics = store.read_json("metrics")
    stats = store.read_json("stats")
    missing = [name for name, doc in (("metrics", metrics), ("stats", stats)) if doc is None]
    if missing:
        raise ReportPrereqError(missing)

    out = Path(out_dir) if out_dir else store.root / "report"
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    summary_rows = _summary_rows(metrics)
    line_rows = sorted(
        store.read_stream("line_metrics"), key=lambda r: (r["domain"], r["line_id"])
    )
    stats_rows = []
    for family in ("wilcoxon_signed_rank", "mann_whitney_u"):
        for row in stats.get(family, []):
            stats_rows.append({"test": family, **row})
    docs_rows = []
    for domain in ("ptm", "library"):
        block = (metrics.get(domain) or {}).get("docs")
        if not block:
            continue
        for metric in (
            "documentation_rate",
            "pair_documentation_rate",
            "rationale_rate",
            "rationale_rate_documented",
            "rationale_rate_artifacts",
        ):
            docs_rows.append(
                {"domain": domain, "kind": "all", "metric": metric, "value": block[metric]}
            )
        for kind in sorted(block.get("by_kind", {})):
            for metric, value in sorted(block["by_kind"][kind].items()):
                docs_rows.append(
                    {"domain": domain, "kind": kind, "metric": metric, "value": value}
                )

    if "json" in formats:
        _dump_json(out / "summary.json", summary_rows)
        _dump_json(out / "lines.json", line_rows)
        _dump_json(out / "stats.json", stats_rows)
        _dump_json(out / "docs.json", docs_rows)
        written += [out / f"{name}.json" for name in REPORT_FILES]
    if "csv" in formats:
        _dump_csv(
            out / "summary.csv",
            ["section", "metric", "ptm", "library"],
            [[r["section"], r["metric"], r["ptm"], r["library"]] for r in summary_rows],
        )
        line_header = [
            "domain", "line_id", "n_line_releases", "n_window_releases", "events_total",
            "additions", "removals", "migrations", "updates", "cadence_overall",
            "count_t1", "count_end", "growth_factor",
        ]
        _dump_csv(
            out / "lines.csv",
            line_header,
            [
                [
                    r["domain"], r["line_id"], r["n_line_releases"], r["n_window_releases"],
                    r["events_total"],
                    r["events_by_kind"].get("addition", 0),
                    r["events_by_kind"].get("removal", 0),
                    r["events_by_kind"].get("migration", 0),
                    r["events_by_kind"].get("update", 0),
                    r["cadence_overall"], r["count_t1"], r["count_end"], r["growth_factor"],
                ]
                for r in line_rows
            ],
        )
        stats_header = [
            "test", "kind", "n_a", "n_b", "median_a", "median_b", "statistic",
            "p_value", "effect_name", "effect", "alpha_corrected", "significant", "degenerate",
        ]
        _dump_csv(
            out / "stats.csv",
            stats_header,
            [[row.get(col) for col in stats_header] for row in stats_rows],
        )
        _dump_csv(
            out / "docs.csv",
            ["domain", "kind", "metric", "value"],
            [[r["domain"], r["kind"], r["metric"], r["value"]] for r in docs_rows],
        )
        written += [out / f"{name}.csv" for name in REPORT_FILES]

    if figures:
        from . import figures as figure_mod

        written += figure_mod.render_all(metrics, line_rows, out)
    return written
