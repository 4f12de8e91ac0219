"""Turn a BoundQuery into an immutable physical plan."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

from ..errors import EnvelopeMissing
from ..queryir.ast import Aggregate, And, atoms, expr_columns
from ..queryir.binder import BoundQuery, Source
from ..rewrite import DEFAULT_CLAUSE_CAP, Dnf, GlobalQuery, normalize_to_dnf, rewrite_global
from .envelopes import envelope_predicate


@dataclass(frozen=True)
class ScanSpec:
    source: Source
    predicate: object  # everything this side must satisfy, injected envelope included
    dnf: Dnf
    global_query: GlobalQuery | None  # grid datasets only
    variables: tuple  # projected variables, schema order
    columns: tuple  # non-variable columns later stages need

    @property
    def descriptor(self):
        return self.source.descriptor

    @property
    def side(self) -> int:
        return self.source.side


@dataclass(frozen=True)
class JoinSpec:
    keys: tuple  # ((left BoundColumn, right BoundColumn), ...)
    build_side: int = 0
    envelope_predicate: object = None  # injected into the probe side
    envelope_dims: tuple = ()


@dataclass(frozen=True)
class PhysicalPlan:
    bound: BoundQuery
    scans: tuple
    join: JoinSpec | None
    aggregates: tuple  # Aggregate expressions, empty for row queries
    strategy: str = "optimized"
    clause_cap: int = DEFAULT_CLAUSE_CAP
    options: dict = field(default_factory=dict, hash=False, compare=False)

    @cached_property
    def explain_text(self) -> str:
        from .explain import render_explain

        return render_explain(self)

    @property
    def projected(self) -> dict:
        return {s.descriptor.name: s.variables for s in self.scans}


def _referenced(bound: BoundQuery, side: int, extra=None) -> set:
    cols = []
    for item in bound.select_list:
        cols += expr_columns(item.expr)
    for pred in (bound.side_filters[side], bound.post_filter, extra):
        cols += [a.column for a in atoms(pred)]
    for l, r in bound.join_keys:
        cols += [l, r]
    return {c.name for c in cols if c.side == side}


def _scan_spec(source: Source, predicate, bound, cap, force_empty=False) -> ScanSpec:
    desc = source.descriptor
    names = _referenced(bound, source.side, predicate)
    schema = desc.row_schema
    dnf = Dnf(()) if force_empty else normalize_to_dnf(predicate, cap)
    if desc.kind == "tabular":
        return ScanSpec(source, predicate, dnf, None, (), tuple(c for c in schema.names if c in names))
    variables = tuple(v for v in desc.schema.var_names if v in names)
    columns = tuple(c.name for c in schema.columns if c.name in names and c.role != "var")
    gq = rewrite_global(dnf, desc, projected=variables)
    return ScanSpec(source, predicate, dnf, gq, variables, columns)


def plan(bound: BoundQuery, clause_cap: int = DEFAULT_CLAUSE_CAP, strategy: str = "optimized",
         require_envelopes: bool = False) -> PhysicalPlan:
    """Normalize and globally rewrite each side; inject envelopes into joins.

    Envelopes are only used when the build (left) side carries them, which
    happens after the caller attached them explicitly.
    """
    aggregates = tuple(i.expr for i in bound.select_list if isinstance(i.expr, Aggregate))
    if not bound.is_join:
        scan = _scan_spec(bound.sources[0], bound.side_filters[0], bound, clause_cap)
        return PhysicalPlan(bound, (scan,), None, aggregates, strategy, clause_cap)

    left, right = bound.sources
    env = left.descriptor.envelopes
    if env is None and require_envelopes:
        raise EnvelopeMissing(f"dataset {left.descriptor.name!r} has no envelopes attached")
    left_pred, right_pred = bound.side_filters
    injected = None
    env_dims = ()
    empty = False
    if env is not None:
        right_cols = {l.name: r for l, r in bound.join_keys if l.name in env.dims}
        left_cols = {l.name: l for l, r in bound.join_keys if l.name in env.dims}
        env_dims = tuple(right_cols)
        if right_cols:
            injected = envelope_predicate(env, left.descriptor.files, right_cols)
            empty = injected is None
            retained = envelope_predicate(env, left.descriptor.files, left_cols)
            if retained is not None:
                left_pred = retained if left_pred is None else And(left_pred, retained)
            if injected is not None:
                right_pred = injected if right_pred is None else And(right_pred, injected)
    scans = (
        _scan_spec(left, left_pred, bound, clause_cap),
        _scan_spec(right, right_pred, bound, clause_cap, force_empty=empty),
    )
    join = JoinSpec(bound.join_keys, 0, injected, env_dims)
    return PhysicalPlan(bound, scans, join, aggregates, strategy, clause_cap)
