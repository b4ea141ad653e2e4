"""Exception and warning types shared across the package."""


class PtmTraceError(Exception):
    """Base class for all errors raised by ptmtrace."""


class CatalogFormatError(PtmTraceError):
    """A signature catalog file is malformed.

    Carries the offending line number and field name when known.
    """

    def __init__(self, message: str, *, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if field is not None:
            loc.append(f"field {field!r}")
        suffix = f" ({', '.join(loc)})" if loc else ""
        super().__init__(message + suffix)


class CatalogEmptyError(PtmTraceError):
    """The signature catalog contains no usable records."""


class IndexLoadError(PtmTraceError):
    """The PTM-name index file could not be read."""


class NoReleasesError(PtmTraceError):
    """The repository has no tags resolvable to commits."""


class AmbiguousCoverageError(PtmTraceError):
    """No branch covers any release tag, so no release line can be built."""


class SnapshotError(PtmTraceError):
    """A release revision could not be read from the repository."""


class EmptyLineResult(PtmTraceError):
    """No release in the line contains any PTM; the line is excluded from PTM metrics."""


class ManifestParseError(PtmTraceError):
    """A dependency manifest could not be parsed."""


class DegenerateSampleError(PtmTraceError):
    """The input sample admits no test statistic (e.g. all paired differences are zero)."""


class DegenerateAgreementError(PtmTraceError):
    """Chance agreement is 1, so Cohen's kappa is undefined."""


class AnnotationSchemaError(PtmTraceError):
    """An annotation file violates the annotation invariants.

    Names the offending row so the coder can fix it.
    """

    def __init__(self, message: str, *, row: int | None = None):
        self.row = row
        suffix = f" (row {row})" if row is not None else ""
        super().__init__(message + suffix)


class ConfigError(PtmTraceError):
    """The run configuration is invalid; nothing was executed."""


class StageError(PtmTraceError):
    """A pipeline stage failed; carries the stage name and offending record id."""

    def __init__(self, stage: str, message: str, *, record: str | None = None):
        self.stage = stage
        self.record = record
        suffix = f" [record {record}]" if record else ""
        super().__init__(f"stage {stage}: {message}{suffix}")


class ReportPrereqError(PtmTraceError):
    """Reports were requested before required pipeline stages completed."""

    def __init__(self, missing: list[str]):
        self.missing = list(missing)
        super().__init__("missing stages: " + ", ".join(self.missing))


class StoreIntegrityError(PtmTraceError):
    """The run store contains dangling references between record streams."""


class UnknownAnnotationWarning(UserWarning):
    """A migration annotation references a candidate that was never detected."""
