"""ptmtrace: mining pre-trained-model dependency changes across releases.

Detects PTM reuse in version-controlled source trees via import-aware
static analysis, reconstructs release lines from first-parent history,
computes change events (additions, removals, migrations) with a multiset
delta algebra, mirrors the detection over dependency manifests as a
baseline, and emits evolution metrics, documentation-coverage metrics,
and non-parametric statistical comparisons.
"""

from .catalog import (
    CallKind,
    PtmIndex,
    ReuseSignature,
    SignatureCatalog,
    has_version_token,
    load_catalog,
    load_ptm_index,
)
from .changes import (
    AnalysisWindow,
    ChangeEvent,
    ChangeKind,
    MigrationCandidate,
    ReleasePairDelta,
    anchor_t1,
    confirm_migrations,
    diff_pair,
    find_migration_candidates,
)
from .extraction import (
    FileSnapshot,
    FilterConfig,
    PtmOccurrence,
    Resolution,
    apply_fp_filters,
    extract_occurrences,
    match_imports,
)
from .history import (
    Release,
    ReleaseLine,
    ReleasePolicy,
    ReleaseSnapshot,
    filter_releases,
    identify_release_lines,
    parse_semver,
    snapshot_release,
)
from .manifests import (
    DependencyEntry,
    ManifestChange,
    diff_manifests,
    load_analogous_pairs,
    normalize_name,
    parse_manifest,
)
from .metrics import (
    CadenceRecord,
    GrowthRecord,
    LineActivity,
    cadence,
    change_frequency,
    doc_metrics,
    growth,
    lifecycle_stages,
)
from .stats import (
    StatResult,
    apply_bonferroni,
    bonferroni,
    cliffs_delta,
    cohens_d,
    mann_whitney_u,
    wilcoxon_signed_rank,
)
from .harvest import (
    Annotation,
    DocArtifact,
    harvest,
    interrater_agreement,
    keyword_screen,
    load_annotations,
)
from .pipeline import RunConfig, run_pipeline
from .report import emit_report
from .store import RunStore

__version__ = "0.1.0"
