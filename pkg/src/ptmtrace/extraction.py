"""Static extraction of PTM loader calls from Python source.

Parses a source file into an AST, matches catalog signatures against call
sites whose callee binds to the signature's library through the file's
imports (sub-module and alias aware), and resolves the PTM-identifier
argument to concrete string values. Resolution follows linear program
order within a scope: the latest assignment before the call wins, values
assigned on different conditional branches each yield one occurrence, and
``self`` attributes resolve through constructor assignments and class-level
string defaults. There is no inter-procedural dataflow; identifiers built
from f-strings, parameters, or other non-constant expressions are recorded
as unresolved diagnostics rather than occurrences.
"""

from __future__ import annotations

import ast
import enum
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import PurePosixPath

from .catalog import CallKind, PtmIndex, ReuseSignature, SignatureCatalog


class Resolution(str, enum.Enum):
    LITERAL = "literal"
    VARIABLE = "variable"
    CONDITIONAL_BRANCH = "conditional-branch"
    ATTRIBUTE = "attribute"
    CLASS_DEFAULT = "class-default"


@dataclass(frozen=True)
class ImportBinding:
    """A name bound by an import statement, mapped to its top-level library.

    ``origin`` is "module" for ``import lib[.sub] [as alias]`` and "symbol"
    for ``from lib[.sub] import name [as alias]``; ``source_name`` keeps the
    imported name so aliased from-imports still match their call pattern.
    """

    alias: str
    library: str
    origin: str  # "module" | "symbol"
    source_name: str
    line: int


@dataclass(frozen=True)
class PtmOccurrence:
    ptm_id: str
    file_path: str
    line: int
    signature: ReuseSignature
    resolution: Resolution
    indexed: bool
    binding_ok: bool = True
    revision: str | None = None
    col: int = 0


@dataclass(frozen=True)
class ParseDiagnostic:
    file_path: str
    line: int
    reason: str
    detail: str = ""


@dataclass(frozen=True)
class DropRecord:
    """One occurrence removed by a false-positive filter."""

    occurrence: PtmOccurrence
    filter_id: int
    reason: str


@dataclass
class FileSnapshot:
    """Multiset of PTM occurrences for one file at one revision."""

    file_path: str
    revision: str
    occurrences: list[PtmOccurrence] = field(default_factory=list)
    diagnostics: list[ParseDiagnostic] = field(default_factory=list)
    drops: list[DropRecord] = field(default_factory=list)
    logical_file: str | None = None

    @property
    def counts(self) -> Counter[str]:
        return Counter(occ.ptm_id for occ in self.occurrences)

    def __len__(self) -> int:
        return len(self.occurrences)


def match_imports(tree: ast.AST, libraries: frozenset[str] | set[str]) -> dict[str, ImportBinding]:
    """Collect in-scope bindings (alias -> library) for catalog libraries.

    Handles ``import lib``, ``import lib.sub as x``, ``from lib import name``
    and sub-module-aware forms like ``from lib.sub.mod import name``.
    Relative imports are project-internal and ignored.
    """
    bindings: dict[str, ImportBinding] = {}
    for node in ast.walk(tree):
        if isinstance(node, ast.Import):
            for alias in node.names:
                top = alias.name.split(".")[0]
                if top not in libraries:
                    continue
                bound = alias.asname or top
                bindings[bound] = ImportBinding(bound, top, "module", alias.name, node.lineno)
        elif isinstance(node, ast.ImportFrom):
            if node.level or not node.module:
                continue
            top = node.module.split(".")[0]
            if top not in libraries:
                continue
            for alias in node.names:
                if alias.name == "*":
                    continue
                bound = alias.asname or alias.name
                bindings[bound] = ImportBinding(bound, top, "symbol", alias.name, node.lineno)
    return bindings


# --- variable environments -------------------------------------------------

_UNRESOLVED = object()


@dataclass
class _ValueSet:
    """Possible string values of a variable at one program point."""

    values: tuple[str, ...]
    conditional: bool = False
    poisoned: bool = False
    poison_reason: str = ""

    @classmethod
    def single(cls, value: str) -> "_ValueSet":
        return cls((value,))

    @classmethod
    def poison(cls, reason: str) -> "_ValueSet":
        return cls((), poisoned=True, poison_reason=reason)


def _merge_value_sets(a: _ValueSet | None, b: _ValueSet | None) -> _ValueSet | None:
    """Join the final values of two conditional branches."""
    if a is None and b is None:
        return None
    if a is None or b is None:
        known = a if a is not None else b
        # One branch never assigned and nothing was bound before: value may
        # be undefined at runtime, but the known branch still contributes.
        return replace(known, conditional=True)
    if a.poisoned or b.poisoned:
        return _ValueSet.poison(a.poison_reason or b.poison_reason)
    merged: list[str] = list(a.values)
    for v in b.values:
        if v not in merged:
            merged.append(v)
    conditional = a.conditional or b.conditional or set(a.values) != set(b.values)
    return _ValueSet(tuple(merged), conditional=conditional)


@dataclass
class _ClassInfo:
    defaults: dict[str, _ValueSet] = field(default_factory=dict)      # class-level strings
    init_attrs: dict[str, _ValueSet] = field(default_factory=dict)    # self.x = "..." in __init__


class _Extractor:
    """Single-file walker that resolves PTM arguments against scope state."""

    def __init__(
        self,
        file_path: str,
        catalog: SignatureCatalog,
        index: PtmIndex,
        bindings: dict[str, ImportBinding],
        enforce_binding: bool,
    ):
        self.file_path = file_path
        self.catalog = catalog
        self.index = index
        self.bindings = bindings
        self.enforce_binding = enforce_binding
        self.occurrences: list[PtmOccurrence] = []
        self.diagnostics: list[ParseDiagnostic] = []
        self.classes: dict[str, _ClassInfo] = {}
        self._patterns = catalog.patterns

    # -- entry point --

    def run(self, tree: ast.Module) -> None:
        env: dict[str, _ValueSet] = {}
        self._walk_block(tree.body, env, module_env=None, class_info=None)

    # -- statement walking --

    def _walk_block(
        self,
        stmts: list[ast.stmt],
        env: dict[str, _ValueSet],
        module_env: dict[str, _ValueSet] | None,
        class_info: _ClassInfo | None,
    ) -> None:
        for stmt in stmts:
            self._walk_stmt(stmt, env, module_env, class_info)

    def _walk_stmt(self, stmt, env, module_env, class_info) -> None:
        if isinstance(stmt, ast.ClassDef):
            self._walk_class(stmt, env, module_env)
            return
        if isinstance(stmt, (ast.FunctionDef, ast.AsyncFunctionDef)):
            self._walk_function(stmt, dict(env) if module_env is None else dict(module_env),
                                class_info)
            return
        if isinstance(stmt, ast.If):
            self._visit_calls(stmt.test, env, module_env, class_info)
            env_body = dict(env)
            env_else = dict(env)
            self._walk_block(stmt.body, env_body, module_env, class_info)
            self._walk_block(stmt.orelse, env_else, module_env, class_info)
            for name in set(env_body) | set(env_else):
                merged = _merge_value_sets(env_body.get(name), env_else.get(name))
                if merged is not None:
                    env[name] = merged
            return
        if isinstance(stmt, (ast.For, ast.AsyncFor)):
            self._visit_calls(stmt.iter, env, module_env, class_info)
            self._poison_target(stmt.target, env, "loop variable")
            self._walk_block(stmt.body, env, module_env, class_info)
            self._walk_block(stmt.orelse, env, module_env, class_info)
            return
        if isinstance(stmt, ast.While):
            self._visit_calls(stmt.test, env, module_env, class_info)
            self._walk_block(stmt.body, env, module_env, class_info)
            self._walk_block(stmt.orelse, env, module_env, class_info)
            return
        if isinstance(stmt, (ast.With, ast.AsyncWith)):
            for item in stmt.items:
                self._visit_calls(item.context_expr, env, module_env, class_info)
                if item.optional_vars is not None:
                    self._poison_target(item.optional_vars, env, "with binding")
            self._walk_block(stmt.body, env, module_env, class_info)
            return
        if isinstance(stmt, ast.Try):
            self._walk_block(stmt.body, env, module_env, class_info)
            for handler in stmt.handlers:
                self._walk_block(handler.body, env, module_env, class_info)
            self._walk_block(stmt.orelse, env, module_env, class_info)
            self._walk_block(stmt.finalbody, env, module_env, class_info)
            return
        if isinstance(stmt, ast.Assign):
            self._visit_calls(stmt.value, env, module_env, class_info)
            self._apply_assign(stmt.targets, stmt.value, env)
            return
        if isinstance(stmt, ast.AnnAssign):
            if stmt.value is not None:
                self._visit_calls(stmt.value, env, module_env, class_info)
                self._apply_assign([stmt.target], stmt.value, env)
            return
        if isinstance(stmt, ast.AugAssign):
            self._visit_calls(stmt.value, env, module_env, class_info)
            if isinstance(stmt.target, ast.Name):
                env[stmt.target.id] = _ValueSet.poison("augmented assignment")
            return
        # Remaining statements: visit contained expressions for call sites.
        for node in ast.iter_child_nodes(stmt):
            if isinstance(node, ast.expr):
                self._visit_calls(node, env, module_env, class_info)

    def _apply_assign(self, targets, value: ast.expr, env: dict[str, _ValueSet]) -> None:
        resolved = self._const_value_set(value, env)
        for target in targets:
            if isinstance(target, ast.Name):
                env[target.id] = resolved
            elif isinstance(target, (ast.Tuple, ast.List)):
                if isinstance(value, (ast.Tuple, ast.List)) and len(value.elts) == len(target.elts):
                    for sub_t, sub_v in zip(target.elts, value.elts):
                        self._apply_assign([sub_t], sub_v, env)
                else:
                    for sub_t in target.elts:
                        self._poison_target(sub_t, env, "unpacked assignment")
            # attribute/subscript targets at non-__init__ sites are not tracked

    def _poison_target(self, target, env: dict[str, _ValueSet], reason: str) -> None:
        if isinstance(target, ast.Name):
            env[target.id] = _ValueSet.poison(reason)
        elif isinstance(target, (ast.Tuple, ast.List)):
            for sub in target.elts:
                self._poison_target(sub, env, reason)

    def _const_value_set(self, value: ast.expr, env: dict[str, _ValueSet]) -> _ValueSet:
        if isinstance(value, ast.Constant) and isinstance(value.value, str):
            return _ValueSet.single(value.value)
        if isinstance(value, ast.Name):
            prior = env.get(value.id)
            if prior is not None:
                return prior
            return _ValueSet.poison(f"copy of unknown name {value.id!r}")
        if isinstance(value, ast.JoinedStr):
            return _ValueSet.poison("f-string value")
        return _ValueSet.poison(type(value).__name__)

    # -- class and function scopes --

    def _walk_class(self, node: ast.ClassDef, env, module_env) -> None:
        info = _ClassInfo()
        # Pass 1: class-level string defaults and __init__ self-assignments.
        for stmt in node.body:
            if isinstance(stmt, ast.Assign):
                vs = self._const_value_set(stmt.value, env)
                if not vs.poisoned:
                    for target in stmt.targets:
                        if isinstance(target, ast.Name):
                            info.defaults[target.id] = vs
            elif isinstance(stmt, ast.AnnAssign) and stmt.value is not None:
                vs = self._const_value_set(stmt.value, env)
                if not vs.poisoned and isinstance(stmt.target, ast.Name):
                    info.defaults[stmt.target.id] = vs
            elif isinstance(stmt, ast.FunctionDef) and stmt.name == "__init__":
                self._collect_init_attrs(stmt, info)
        self.classes[node.name] = info
        # Pass 2: walk method bodies with the attribute store in scope.
        base_env = dict(env) if module_env is None else dict(module_env)
        for stmt in node.body:
            if isinstance(stmt, (ast.FunctionDef, ast.AsyncFunctionDef)):
                self._walk_function(stmt, dict(base_env), info)
            else:
                self._walk_stmt(stmt, env, module_env, info)

    def _collect_init_attrs(self, init: ast.FunctionDef, info: _ClassInfo) -> None:
        for stmt in ast.walk(init):
            if not isinstance(stmt, ast.Assign):
                continue
            vs: _ValueSet | None = None
            if isinstance(stmt.value, ast.Constant) and isinstance(stmt.value.value, str):
                vs = _ValueSet.single(stmt.value.value)
            if vs is None:
                continue
            for target in stmt.targets:
                if (
                    isinstance(target, ast.Attribute)
                    and isinstance(target.value, ast.Name)
                    and target.value.id == "self"
                ):
                    info.init_attrs[target.attr] = vs

    def _walk_function(self, node, fallback_env: dict[str, _ValueSet], class_info) -> None:
        local_env: dict[str, _ValueSet] = {}
        args = node.args
        for arg in [*args.posonlyargs, *args.args, *args.kwonlyargs]:
            if arg.arg != "self":
                local_env[arg.arg] = _ValueSet.poison("function parameter")
        self._walk_block(node.body, local_env, module_env=fallback_env, class_info=class_info)

    # -- call matching --

    def _visit_calls(self, expr: ast.expr, env, module_env, class_info) -> None:
        for node in ast.walk(expr):
            if isinstance(node, ast.Call):
                self._match_call(node, env, module_env, class_info)

    @staticmethod
    def _attr_chain(func: ast.expr) -> list[str] | None:
        chain: list[str] = []
        node = func
        while isinstance(node, ast.Attribute):
            chain.append(node.attr)
            node = node.value
        if isinstance(node, ast.Name):
            chain.append(node.id)
            return list(reversed(chain))
        return None

    def _match_call(self, call: ast.Call, env, module_env, class_info) -> None:
        chain = self._attr_chain(call.func)
        if not chain:
            return
        root_binding = self.bindings.get(chain[0])
        pattern = chain[-1]
        if pattern not in self._patterns:
            # Aliased from-import: the callable's original name carries the pattern.
            if len(chain) == 1 and root_binding is not None and root_binding.origin == "symbol":
                pattern = root_binding.source_name.split(".")[-1]
            if pattern not in self._patterns:
                return
        matched: ReuseSignature | None = None
        binding_ok = False
        for sig in sorted(self.catalog.by_pattern(pattern), key=lambda s: s.library_name):
            if self._binds(sig, chain, root_binding):
                matched, binding_ok = sig, True
                break
            if matched is None and self._shape_matches(sig, chain):
                matched = sig
        if matched is None:
            return
        if not binding_ok and self.enforce_binding:
            return
        self._emit(call, matched, binding_ok, env, module_env, class_info)

    @staticmethod
    def _shape_matches(sig: ReuseSignature, chain: list[str]) -> bool:
        if sig.call_kind is CallKind.FUNCTION:
            return True
        return len(chain) >= 2

    def _binds(self, sig: ReuseSignature, chain: list[str], root: ImportBinding | None) -> bool:
        if root is None or root.library != sig.library_name:
            return False
        if len(chain) == 1:
            # Bare call: a from-imported symbol whose original name is the pattern.
            return root.origin == "symbol" and root.source_name.split(".")[-1] == sig.call_pattern
        if sig.call_kind is CallKind.FUNCTION:
            return True
        # method/classmethod: any receiver chain rooted in the library.
        return True

    def _emit(self, call, sig, binding_ok, env, module_env, class_info) -> None:
        arg = self._select_arg(call, sig)
        if arg is None:
            return
        revision = self._revision_pin(call)
        for value, resolution, line in self._resolve(arg, call, env, module_env, class_info):
            self.occurrences.append(
                PtmOccurrence(
                    ptm_id=value,
                    file_path=self.file_path,
                    line=line,
                    signature=sig,
                    resolution=resolution,
                    indexed=value in self.index,
                    binding_ok=binding_ok,
                    revision=revision,
                    col=call.col_offset,
                )
            )

    @staticmethod
    def _select_arg(call: ast.Call, sig: ReuseSignature) -> ast.expr | None:
        if isinstance(sig.ptm_arg_position, int):
            pos = sig.ptm_arg_position
            if pos < len(call.args) and not isinstance(call.args[pos], ast.Starred):
                return call.args[pos]
            return None
        for kw in call.keywords:
            if kw.arg == sig.ptm_arg_position:
                return kw.value
        return None

    @staticmethod
    def _revision_pin(call: ast.Call) -> str | None:
        for kw in call.keywords:
            if kw.arg == "revision" and isinstance(kw.value, ast.Constant) \
                    and isinstance(kw.value.value, str):
                return kw.value.value
        return None

    def _resolve(self, arg, call, env, module_env, class_info):
        """Yield (ptm_id, resolution, report_line) triples for one argument."""
        if isinstance(arg, ast.Constant) and isinstance(arg.value, str):
            yield arg.value, Resolution.LITERAL, arg.lineno
            return
        if isinstance(arg, ast.Name):
            vs = env.get(arg.id)
            if vs is None and module_env is not None:
                vs = module_env.get(arg.id)
            if vs is None and class_info is not None and arg.id in class_info.defaults:
                vs = class_info.defaults[arg.id]
            if vs is None:
                self._diag(call, "unresolved-name", arg.id)
                return
            if vs.poisoned:
                self._diag(call, "non-constant-value", f"{arg.id}: {vs.poison_reason}")
                return
            res = Resolution.CONDITIONAL_BRANCH if (vs.conditional or len(vs.values) > 1) \
                else Resolution.VARIABLE
            for value in vs.values:
                yield value, res, call.func.lineno
            return
        if isinstance(arg, ast.Attribute) and isinstance(arg.value, ast.Name):
            owner = arg.value.id
            if owner == "self" and class_info is not None:
                if arg.attr in class_info.init_attrs:
                    for value in class_info.init_attrs[arg.attr].values:
                        yield value, Resolution.ATTRIBUTE, call.func.lineno
                    return
                if arg.attr in class_info.defaults:
                    for value in class_info.defaults[arg.attr].values:
                        yield value, Resolution.CLASS_DEFAULT, call.func.lineno
                    return
                self._diag(call, "unresolved-attribute", f"self.{arg.attr}")
                return
            cls = self.classes.get(owner)
            if cls is not None and arg.attr in cls.defaults:
                for value in cls.defaults[arg.attr].values:
                    yield value, Resolution.CLASS_DEFAULT, call.func.lineno
                return
            self._diag(call, "unresolved-attribute", f"{owner}.{arg.attr}")
            return
        if isinstance(arg, ast.JoinedStr):
            self._diag(call, "non-constant-value", "f-string argument")
            return
        self._diag(call, "non-constant-value", type(arg).__name__)

    def _diag(self, call: ast.Call, reason: str, detail: str) -> None:
        self.diagnostics.append(
            ParseDiagnostic(self.file_path, call.lineno, reason, detail)
        )


def extract_occurrences(
    source: str | bytes,
    *,
    file_path: str,
    revision: str,
    catalog: SignatureCatalog,
    index: PtmIndex,
    enforce_binding: bool = True,
) -> FileSnapshot:
    """Extract the PTM occurrence multiset for one file revision.

    With ``enforce_binding=False``, call sites whose name matches a pattern
    but whose callee is not import-bound to the signature's library are kept
    with ``binding_ok=False`` so apply_fp_filters can drop and log them.
    A syntax error yields an empty snapshot with a ParseDiagnostic.
    """
    snapshot = FileSnapshot(file_path=file_path, revision=revision)
    if isinstance(source, bytes):
        try:
            text = source.decode("utf-8")
        except UnicodeDecodeError:
            text = source.decode("utf-8", errors="replace")
            snapshot.diagnostics.append(
                ParseDiagnostic(file_path, 0, "lossy-decode", "invalid UTF-8 bytes replaced")
            )
    else:
        text = source
    try:
        tree = ast.parse(text)
    except (SyntaxError, ValueError) as exc:
        snapshot.diagnostics.append(
            ParseDiagnostic(file_path, getattr(exc, "lineno", 0) or 0, "syntax-error", str(exc))
        )
        return snapshot

    bindings = match_imports(tree, catalog.libraries)
    walker = _Extractor(file_path, catalog, index, bindings, enforce_binding)
    walker.run(tree)
    snapshot.occurrences = sorted(
        walker.occurrences, key=lambda o: (o.line, o.col, o.ptm_id)
    )
    snapshot.diagnostics.extend(walker.diagnostics)
    return snapshot


DEFAULT_EXAMPLE_SEGMENTS = frozenset(
    {"example", "examples", "demo", "demos", "tutorial", "tutorials", "notebooks"}
)
DEFAULT_VENDORED_SEGMENTS = frozenset(
    {"site-packages", "vendor", "third_party", "node_modules", ".venv", "venv"}
)


@dataclass(frozen=True)
class FilterConfig:
    example_segments: frozenset[str] = DEFAULT_EXAMPLE_SEGMENTS
    vendored_segments: frozenset[str] = DEFAULT_VENDORED_SEGMENTS


def apply_fp_filters(snapshot: FileSnapshot, config: FilterConfig | None = None) -> FileSnapshot:
    """Drop occurrences matching the false-positive filters.

    Filters: (1) comment/string contexts are structurally absent from AST
    extraction; (2) callee not bound to the signature's library; (3) path in
    an example/demo tree; (4) path in a vendored tree. Dropped occurrences
    are recorded with their filter id. Never increases any count.
    """
    config = config or FilterConfig()
    segments = {seg.lower() for seg in PurePosixPath(snapshot.file_path).parts}
    path_filter: tuple[int, str] | None = None
    hit_example = segments & config.example_segments
    hit_vendored = segments & config.vendored_segments
    if hit_vendored:
        path_filter = (4, f"vendored path segment {sorted(hit_vendored)[0]!r}")
    elif hit_example:
        path_filter = (3, f"example/demo path segment {sorted(hit_example)[0]!r}")

    kept: list[PtmOccurrence] = []
    drops: list[DropRecord] = list(snapshot.drops)
    for occ in snapshot.occurrences:
        if not occ.binding_ok:
            drops.append(DropRecord(occ, 2, "callee not bound to signature library"))
            continue
        if path_filter is not None:
            drops.append(DropRecord(occ, path_filter[0], path_filter[1]))
            continue
        kept.append(occ)
    return FileSnapshot(
        file_path=snapshot.file_path,
        revision=snapshot.revision,
        occurrences=kept,
        diagnostics=list(snapshot.diagnostics),
        drops=drops,
        logical_file=snapshot.logical_file,
    )
