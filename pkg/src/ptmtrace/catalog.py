"""Reuse-signature catalog and PTM-name index.

A reuse signature pairs an importable library with the call that loads a
model by identifier (e.g. ``transformers`` + ``from_pretrained``). The
catalog file is plain structured text, one comma-separated record per
signature::

    # library, call, kind, arg
    transformers, from_pretrained, classmethod, 0
    spacy, load, function, 0

``kind`` is one of ``function``, ``method``, ``classmethod``; ``arg`` is a
0-based positional index or a keyword-parameter name that carries the PTM
identifier. The index file lists one PTM identifier per line, with ``#``
comment lines allowed. The shipped catalog subset is not exhaustive.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import CatalogEmptyError, CatalogFormatError, IndexLoadError

_VALID_KINDS = ("function", "method", "classmethod")


class CallKind(str, enum.Enum):
    FUNCTION = "function"
    METHOD = "method"
    CLASSMETHOD = "classmethod"


@dataclass(frozen=True)
class ReuseSignature:
    """One (library import, loader call) pattern that marks PTM loading."""

    library_name: str
    call_pattern: str
    call_kind: CallKind
    ptm_arg_position: int | str

    def key(self) -> tuple[str, str, str]:
        return (self.library_name, self.call_pattern, self.call_kind.value)


@dataclass(frozen=True)
class SignatureCatalog:
    """Validated, deduplicated signature collection. Immutable after load."""

    signatures: tuple[ReuseSignature, ...]
    warnings: tuple[str, ...] = ()

    @property
    def libraries(self) -> frozenset[str]:
        return frozenset(s.library_name for s in self.signatures)

    def by_pattern(self, pattern: str) -> tuple[ReuseSignature, ...]:
        return tuple(s for s in self.signatures if s.call_pattern == pattern)

    @property
    def patterns(self) -> frozenset[str]:
        return frozenset(s.call_pattern for s in self.signatures)

    def __len__(self) -> int:
        return len(self.signatures)


def _parse_catalog_line(raw: str, lineno: int) -> ReuseSignature:
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 4:
        raise CatalogFormatError(
            f"expected 4 comma-separated fields, got {len(parts)}", line=lineno
        )
    library, call, kind, arg = parts
    if not library:
        raise CatalogFormatError("empty library name", line=lineno, field="library")
    if not call:
        raise CatalogFormatError("empty call pattern", line=lineno, field="call")
    if kind not in _VALID_KINDS:
        raise CatalogFormatError(
            f"kind must be one of {_VALID_KINDS}, got {kind!r}", line=lineno, field="kind"
        )
    if not arg:
        raise CatalogFormatError("empty arg position", line=lineno, field="arg")
    position: int | str
    if arg.isdigit():
        position = int(arg)
    elif arg.isidentifier():
        position = arg
    else:
        raise CatalogFormatError(
            f"arg must be a non-negative integer or parameter name, got {arg!r}",
            line=lineno,
            field="arg",
        )
    return ReuseSignature(library, call, CallKind(kind), position)


def load_catalog(path: str | Path) -> SignatureCatalog:
    """Load and validate a signature catalog file.

    Byte-identical duplicate records collapse to one entry with a warning;
    records that reuse a (library, call, kind) triple with a different arg
    are a format error. An empty catalog is an error.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CatalogFormatError(f"cannot read catalog file {path}: {exc}") from exc

    seen: dict[tuple[str, str, str], ReuseSignature] = {}
    order: list[ReuseSignature] = []
    warnings: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        sig = _parse_catalog_line(stripped, lineno)
        prior = seen.get(sig.key())
        if prior is not None:
            if prior == sig:
                warnings.append(f"line {lineno}: duplicate signature {sig.key()} collapsed")
                continue
            raise CatalogFormatError(
                f"signature {sig.key()} redefined with different arg", line=lineno, field="arg"
            )
        seen[sig.key()] = sig
        order.append(sig)

    if not order:
        raise CatalogEmptyError(f"catalog {path} contains no signatures")
    return SignatureCatalog(tuple(order), tuple(warnings))


@dataclass(frozen=True)
class PtmIndex:
    """Exact-match index of known PTM identifiers."""

    entries: frozenset[str] = field(default_factory=frozenset)

    def __contains__(self, ptm_id: str) -> bool:
        return ptm_id in self.entries

    def __len__(self) -> int:
        return len(self.entries)


def load_ptm_index(path: str | Path) -> PtmIndex:
    """Load the local PTM-name index: one identifier per line, ``#`` comments.

    Identifiers are deduplicated after whitespace trimming. An empty file
    yields an empty (still valid) index.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IndexLoadError(f"cannot read index file {path}: {exc}") from exc
    entries = set()
    for raw in text.splitlines():
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        entries.add(stripped)
    return PtmIndex(frozenset(entries))


# Version-like tokens inside a PTM identifier: "v" + digits with optional
# dotted tail, or a bare dotted numeric like 1.5 / 1.5.2. A token with no
# digit never matches.
_VERSION_TOKEN = re.compile(r"^(?:v\d+(?:\.\d+)?|\d+\.\d+(?:\.\d+)?)$", re.IGNORECASE)


def has_version_token(ptm_id: str) -> str | None:
    """Return the trailing version-like token of a PTM identifier, if any.

    The identifier's basename (after the last ``/``) is split on ``-`` and
    ``_``; the last segment matching the version grammar is returned.
    """
    basename = ptm_id.rsplit("/", 1)[-1]
    match = None
    for token in re.split(r"[-_]", basename):
        if token and _VERSION_TOKEN.match(token):
            match = token
    return match
