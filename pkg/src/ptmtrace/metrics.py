"""Evolution metrics over release lines: frequency, cadence, growth,
lifecycle staging, and documentation-coverage ratios."""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence


@dataclass(frozen=True)
class FrequencyResult:
    changed_pairs: int
    total_pairs: int

    @property
    def proportion(self) -> float:
        return self.changed_pairs / self.total_pairs if self.total_pairs else 0.0


def change_frequency(pair_event_counts: Sequence[int]) -> FrequencyResult:
    """Share of analyzed release pairs that carry at least one change event."""
    changed = sum(1 for n in pair_event_counts if n > 0)
    return FrequencyResult(changed, len(pair_event_counts))


@dataclass(frozen=True)
class LineActivity:
    """Per-line inputs for cadence/growth: the analysis window plus its events."""

    line_id: str
    n_window_releases: int          # releases from t1 onward, inclusive
    n_line_releases: int            # all releases in the line
    events_by_kind: Mapping[str, int]
    count_t1: int = 0
    count_end: int = 0
    addition_target_indices: tuple[int, ...] = ()  # 0-based release indices in the line

    def events(self, kind: str | None) -> int:
        if kind is None or kind == "overall":
            return sum(self.events_by_kind.values())
        return self.events_by_kind.get(kind, 0)


@dataclass(frozen=True)
class CadenceRecord:
    line_id: str
    kind: str
    n_releases: int
    n_events: int

    @property
    def cadence(self) -> float:
        return self.n_releases / self.n_events


def cadence(
    lines: Iterable[LineActivity], kind: str | None
) -> tuple[list[CadenceRecord], float | None]:
    """Releases per change event, per line, plus the median over lines.

    Only lines with at least one event of the kind are defined; the
    denominator window is the line's releases from t1 onward.
    """
    records = [
        CadenceRecord(line.line_id, kind or "overall", line.n_window_releases, line.events(kind))
        for line in lines
        if line.events(kind) >= 1
    ]
    median = statistics.median([r.cadence for r in records]) if records else None
    return records, median


def lifecycle_stages(
    lines: Iterable[LineActivity], n_stages: int = 6, min_releases: int = 6
) -> tuple[list[int], int]:
    """Histogram of addition events over equal lifecycle stages of each line.

    An event at 0-based release index p of an N-release line falls in stage
    floor(n_stages * p / (N - 1)), clamped to the final stage; lines with
    fewer than ``min_releases`` releases are excluded. Returns the histogram
    and the number of excluded lines.
    """
    histogram = [0] * n_stages
    excluded = 0
    for line in lines:
        n = line.n_line_releases
        if n < min_releases:
            excluded += 1
            continue
        for p in line.addition_target_indices:
            stage = min(n_stages * p // (n - 1), n_stages - 1)
            histogram[stage] += 1
    return histogram, excluded


@dataclass(frozen=True)
class GrowthRecord:
    line_id: str
    count_t1: int
    count_end: int
    addition_only: bool

    @property
    def factor(self) -> float:
        return self.count_end / self.count_t1


@dataclass(frozen=True)
class GrowthSummary:
    records: tuple[GrowthRecord, ...]
    net_growth_share: float | None
    addition_only_share: float | None  # over net-growth lines only
    median_factor: float | None        # over net-growth lines only


def growth(lines: Iterable[LineActivity]) -> GrowthSummary:
    """Post-adoption growth per line: end-of-line count over the t1 count.

    A line is addition-only when it has at least one addition and no
    removals or migrations. The addition-only share and the median factor
    are computed over lines with net growth (factor > 1).
    """
    records = []
    for line in lines:
        if line.count_t1 < 1:
            continue
        addition_only = (
            line.events_by_kind.get("addition", 0) >= 1
            and line.events_by_kind.get("removal", 0) == 0
            and line.events_by_kind.get("migration", 0) == 0
        )
        records.append(GrowthRecord(line.line_id, line.count_t1, line.count_end, addition_only))
    growing = [r for r in records if r.factor > 1.0]
    n = len(records)
    return GrowthSummary(
        records=tuple(records),
        net_growth_share=(len(growing) / n) if n else None,
        addition_only_share=(
            sum(1 for r in growing if r.addition_only) / len(growing) if growing else None
        ),
        median_factor=(statistics.median(r.factor for r in growing) if growing else None),
    )


@dataclass(frozen=True)
class EventDocInput:
    """Documentation status of one change event, resolved through its artifacts."""

    event_id: str
    kind: str
    pair_id: str
    documented: bool
    rationale: bool


@dataclass(frozen=True)
class DocMetrics:
    """The five documentation/rationale coverage ratios, each in [0, 1]."""

    documentation_rate: float | None
    pair_documentation_rate: float | None
    rationale_rate: float | None
    rationale_rate_documented: float | None
    rationale_rate_artifacts: float | None
    by_kind: Mapping[str, Mapping[str, float | None]] = field(default_factory=dict)
    n_events: int = 0
    n_artifacts: int = 0


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def doc_metrics(
    events: Sequence[EventDocInput],
    n_artifacts: int,
    n_rationale_artifacts: int,
) -> DocMetrics:
    """Compute the five coverage metrics plus per-change-kind breakdowns.

    Documentation rate and rationale rate are over all change events; the
    pair rate is over release pairs that have changes; the documented-change
    rationale rate conditions on documented events; the artifact rate is
    over collected artifacts. Rationale implies documented, so the rationale
    rate never exceeds the documentation rate.
    """
    n_events = len(events)
    documented = [e for e in events if e.documented]
    rationale = [e for e in events if e.rationale]
    pairs = sorted({e.pair_id for e in events})
    documented_pairs = sorted({e.pair_id for e in documented})

    by_kind: dict[str, dict[str, float | None]] = {}
    for kind in sorted({e.kind for e in events}):
        of_kind = [e for e in events if e.kind == kind]
        doc_k = [e for e in of_kind if e.documented]
        rat_k = [e for e in of_kind if e.rationale]
        by_kind[kind] = {
            "documentation_rate": _ratio(len(doc_k), len(of_kind)),
            "rationale_rate": _ratio(len(rat_k), len(of_kind)),
            "rationale_rate_documented": _ratio(len(rat_k), len(doc_k)),
            "n_events": len(of_kind),
        }

    return DocMetrics(
        documentation_rate=_ratio(len(documented), n_events),
        pair_documentation_rate=_ratio(len(documented_pairs), len(pairs)),
        rationale_rate=_ratio(len(rationale), n_events),
        rationale_rate_documented=_ratio(len(rationale), len(documented)),
        rationale_rate_artifacts=_ratio(n_rationale_artifacts, n_artifacts),
        by_kind=by_kind,
        n_events=n_events,
        n_artifacts=n_artifacts,
    )
