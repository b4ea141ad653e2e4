"""Figure rendering for the report path (PNG files next to the tables)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

_META = {"Software": "ptmtrace"}  # fixed metadata keeps PNG output byte-stable

_KIND_COLORS = {
    "addition": "#4c9f70",
    "removal": "#c0504d",
    "migration": "#4f81bd",
    "update": "#bf9000",
}


def _save(fig, path: Path) -> Path:
    fig.savefig(path, metadata=_META, dpi=120)
    plt.close(fig)
    return path


def render_change_types(metrics: dict, out: Path) -> Path | None:
    domains = [(d, metrics.get(d)) for d in ("ptm", "library") if metrics.get(d)]
    domains = [(d, m) for d, m in domains if m.get("events_total")]
    if not domains:
        return None
    fig, axes = plt.subplots(1, len(domains), figsize=(4.5 * len(domains), 3.6))
    if len(domains) == 1:
        axes = [axes]
    for ax, (domain, m) in zip(axes, domains):
        kinds = [k for k, n in sorted(m["events_by_kind"].items()) if n > 0]
        values = [m["events_by_kind"][k] for k in kinds]
        ax.pie(
            values,
            labels=kinds,
            colors=[_KIND_COLORS.get(k, "#999999") for k in kinds],
            autopct="%1.1f%%",
            startangle=90,
            counterclock=False,
        )
        ax.set_title(f"{domain} change types (n={m['events_total']})")
    fig.tight_layout()
    return _save(fig, out / "change_types.png")


def render_cadence(line_rows: list[dict], out: Path) -> Path | None:
    kinds = ("addition", "removal", "migration")
    data, labels = [], []
    for domain in ("ptm", "library"):
        for kind in kinds:
            values = [
                r["n_window_releases"] / r["events_by_kind"][kind]
                for r in line_rows
                if r["domain"] == domain and r["events_by_kind"].get(kind)
            ]
            if values:
                data.append(values)
                labels.append(f"{domain}\n{kind}")
    if not data:
        return None
    fig, ax = plt.subplots(figsize=(1.4 * len(data) + 2, 3.6))
    ax.boxplot(data)
    ax.set_xticks(range(1, len(labels) + 1))
    ax.set_xticklabels(labels)
    ax.set_ylabel("releases per change event")
    ax.set_title("Change cadence by type")
    fig.tight_layout()
    return _save(fig, out / "cadence.png")


def render_lifecycle(metrics: dict, out: Path) -> Path | None:
    blocks = [
        (d, metrics[d]["lifecycle"]["histogram"])
        for d in ("ptm", "library")
        if metrics.get(d) and sum(metrics[d]["lifecycle"]["histogram"])
    ]
    if not blocks:
        return None
    stages = [f"{i}" for i in range(6)]
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    width = 0.8 / len(blocks)
    for j, (domain, hist) in enumerate(blocks):
        total = sum(hist)
        shares = [v / total for v in hist]
        xs = [i + j * width for i in range(6)]
        ax.bar(xs, shares, width=width, label=domain)
    ax.set_xticks([i + width * (len(blocks) - 1) / 2 for i in range(6)])
    ax.set_xticklabels(stages)
    ax.set_xlabel("lifecycle stage")
    ax.set_ylabel("share of addition events")
    ax.set_title("Addition events across the release-line lifecycle")
    ax.legend()
    fig.tight_layout()
    return _save(fig, out / "lifecycle.png")


def render_doc_coverage(metrics: dict, out: Path) -> Path | None:
    metric_names = (
        "documentation_rate",
        "pair_documentation_rate",
        "rationale_rate",
        "rationale_rate_documented",
        "rationale_rate_artifacts",
    )
    blocks = [
        (d, metrics[d]["docs"])
        for d in ("ptm", "library")
        if metrics.get(d) and metrics[d].get("docs")
    ]
    if not blocks:
        return None
    fig, ax = plt.subplots(figsize=(7.2, 3.6))
    width = 0.8 / len(blocks)
    for j, (domain, docs) in enumerate(blocks):
        values = [docs.get(name) or 0.0 for name in metric_names]
        xs = [i + j * width for i in range(len(metric_names))]
        ax.bar(xs, values, width=width, label=domain)
    ax.set_xticks([i + width * (len(blocks) - 1) / 2 for i in range(len(metric_names))])
    ax.set_xticklabels([f"m{i + 1}" for i in range(len(metric_names))])
    ax.set_ylim(0, 1)
    ax.set_ylabel("rate")
    ax.set_title("Documentation and rationale coverage (metrics 1-5)")
    ax.legend()
    fig.tight_layout()
    return _save(fig, out / "doc_coverage.png")


def render_all(metrics: dict, line_rows: list[dict], out: Path) -> list[Path]:
    rendered = [
        render_change_types(metrics, out),
        render_cadence(line_rows, out),
        render_lifecycle(metrics, out),
        render_doc_coverage(metrics, out),
    ]
    return [p for p in rendered if p is not None]
