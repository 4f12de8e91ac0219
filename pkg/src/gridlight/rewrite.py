"""Predicate normalization and value-to-position rewriting.

Pipeline for one scan:

1. :func:`normalize_to_dnf` turns the bound WHERE tree into a disjunction of
   conjunctive clauses.
2. :func:`rewrite_global` resolves atoms on non-spanning dimensions into
   positional intervals once, using the axes of the dataset's first file.
3. :func:`rewrite_local` resolves the spanning-dimension atoms against each
   file's own axis, drops unsatisfiable clauses and turns the survivors into
   a disjoint block list.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .blockcover import Block, disjoint_cover
from .catalog import DatasetDescriptor, raw_to_posix
from .errors import NoCoordinateVariable, PredicateTooComplex
from .gridfile import CoordinateAxis, GridFileHandle, read_axis
from .queryir.ast import And, Atom, Not, Or, and_all, or_all

DEFAULT_CLAUSE_CAP = 4096
DIMENSION_ROLES = ("spanning", "dim", "pos")


# ---------------------------------------------------------------- DNF


@dataclass(frozen=True)
class Dnf:
    """OR of AND-clauses.  ``()`` is FALSE, ``((),)`` is TRUE."""

    clauses: tuple

    def __len__(self):
        return len(self.clauses)

    def __iter__(self):
        return iter(self.clauses)

    @property
    def is_true(self) -> bool:
        return any(len(c) == 0 for c in self.clauses)

    def to_expr(self):
        if not self.clauses:
            return None
        return or_all(and_all(c) for c in self.clauses)

    def to_sql(self) -> str:
        if not self.clauses:
            return "FALSE"
        if self.is_true:
            return "TRUE"
        parts = [" AND ".join(a.to_sql() for a in c) for c in self.clauses]
        if len(parts) == 1:
            return parts[0]
        return " OR\n".join(f"({p})" for p in parts)


TRUE = Dnf(((),))


def _expandable(atom: Atom) -> bool:
    role = atom.role
    return role is None or role in DIMENSION_ROLES


def push_negation(pred, negate: bool = False):
    """Eliminate NOT by flipping comparison operators and connectives."""
    if isinstance(pred, Atom):
        return pred.negated() if negate else pred
    if isinstance(pred, Not):
        return push_negation(pred.child, not negate)
    left = push_negation(pred.left, negate)
    right = push_negation(pred.right, negate)
    if isinstance(pred, And):
        return Or(left, right) if negate else And(left, right)
    return And(left, right) if negate else Or(left, right)


def expand_equalities(pred, expand=_expandable):
    """Rewrite ==, !=, IN and NOT IN on dimension columns into inequalities."""
    if isinstance(pred, (And, Or)):
        return type(pred)(expand_equalities(pred.left, expand), expand_equalities(pred.right, expand))
    if not isinstance(pred, Atom) or not expand(pred):
        return pred
    col = pred.column
    if pred.op == "==":
        return And(Atom(col, ">=", pred.value), Atom(col, "<=", pred.value))
    if pred.op == "!=":
        return Or(Atom(col, "<", pred.value), Atom(col, ">", pred.value))
    if pred.op == "IN":
        return or_all(expand_equalities(Atom(col, "==", v), expand) for v in pred.value)
    if pred.op == "NOT IN":
        return and_all(expand_equalities(Atom(col, "!=", v), expand) for v in pred.value)
    return pred


def _distribute(pred, cap):
    if isinstance(pred, Atom):
        return [(pred,)]
    if isinstance(pred, Or):
        out = _distribute(pred.left, cap) + _distribute(pred.right, cap)
    else:
        left = _distribute(pred.left, cap)
        right = _distribute(pred.right, cap)
        if len(left) * len(right) > cap:
            raise PredicateTooComplex(f"DNF would exceed {cap} clauses ({len(left)} x {len(right)})")
        out = [l + r for l in left for r in right]
    if len(out) > cap:
        raise PredicateTooComplex(f"DNF would exceed {cap} clauses ({len(out)})")
    return out


def normalize_to_dnf(pred, cap: int = DEFAULT_CLAUSE_CAP, expand=_expandable) -> Dnf:
    """Negation elimination, equality expansion, then distribution of AND over OR.

    ``expand`` decides which atoms have their equalities rewritten; by
    default dimension atoms (and unbound atoms) are.  Residual atoms on
    variables keep ==, != and IN since they are only evaluated after loading.
    """
    if pred is None:
        return TRUE
    pred = push_negation(pred)
    pred = expand_equalities(pred, expand)
    clauses = []
    seen = set()
    for clause in _distribute(pred, cap):
        clause = tuple(dict.fromkeys(clause))
        if clause not in seen:
            seen.add(clause)
            clauses.append(clause)
    return Dnf(tuple(clauses))


# ---------------------------------------------------------------- translation


@dataclass(frozen=True)
class PositionalInterval:
    dim: str
    lo: int
    hi: int  # inclusive; lo > hi marks EMPTY

    @classmethod
    def empty(cls, dim: str) -> "PositionalInterval":
        return cls(dim, 0, -1)

    @classmethod
    def full(cls, dim: str, length: int) -> "PositionalInterval":
        return cls(dim, 0, length - 1) if length > 0 else cls.empty(dim)

    @property
    def is_empty(self) -> bool:
        return self.lo > self.hi

    def __len__(self):
        return max(0, self.hi - self.lo + 1)

    def intersect(self, other: "PositionalInterval") -> "PositionalInterval":
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        return PositionalInterval(self.dim, lo, hi) if lo <= hi else PositionalInterval.empty(self.dim)

    def to_sql(self) -> str:
        if self.is_empty:
            return f"{self.dim}Pos > 0 AND {self.dim}Pos < 0"
        return f"{self.dim}Pos >= {self.lo} AND {self.dim}Pos <= {self.hi}"


def _ascending_range(values: np.ndarray, op: str, c: float) -> tuple[int, int]:
    m = len(values)
    if op == ">":
        return int(np.searchsorted(values, c, "right")), m - 1
    if op == ">=":
        return int(np.searchsorted(values, c, "left")), m - 1
    if op == "<":
        return 0, int(np.searchsorted(values, c, "left")) - 1
    if op == "<=":
        return 0, int(np.searchsorted(values, c, "right")) - 1
    raise ValueError(f"operator {op!r} cannot be translated; expand equalities first")


def translate_value_to_position(axis: CoordinateAxis, op: str, value: float) -> PositionalInterval:
    """Positions whose axis value satisfies ``value_at_position op value``.

    Binary search on the axis; for a descending axis the search runs on the
    reversed values and the result is mirrored back.
    """
    m = len(axis.values)
    if m == 0 or (isinstance(value, float) and math.isnan(value)):
        return PositionalInterval.empty(axis.dim_name)
    if axis.direction == "ascending":
        lo, hi = _ascending_range(axis.values, op, value)
    else:
        rlo, rhi = _ascending_range(axis.values[::-1], op, value)
        lo, hi = m - 1 - rhi, m - 1 - rlo
    if lo > hi:
        return PositionalInterval.empty(axis.dim_name)
    return PositionalInterval(axis.dim_name, lo, hi)


def interval_for_atoms(axis: CoordinateAxis, atoms) -> PositionalInterval:
    out = PositionalInterval.full(axis.dim_name, len(axis.values))
    for a in atoms:
        out = out.intersect(translate_value_to_position(axis, a.op, a.value))
        if out.is_empty:
            break
    return out


def position_axis(dim: str, length: int) -> CoordinateAxis:
    return CoordinateAxis(dim, np.arange(length, dtype=np.float64), "ascending")


def dimension_axis(desc: DatasetDescriptor, handle: GridFileHandle, dim: str) -> CoordinateAxis:
    """Axis of ``dim`` in the units used by bound literals (timestamps as POSIX seconds)."""
    try:
        axis = read_axis(handle, dim)
    except NoCoordinateVariable:
        return position_axis(dim, handle.dim_length(dim))
    units = desc.schema.time_units.get(dim)
    if units is not None:
        return CoordinateAxis(dim, raw_to_posix(axis.values, units), axis.direction)
    return axis


def tighten(atoms) -> tuple[tuple, bool]:
    """Collapse dominated bounds per column.

    Returns the reduced atoms and whether they are still satisfiable in
    value space (e.g. ``x > 5 AND x < 3`` is not).
    """
    lower: dict = {}
    upper: dict = {}
    other = []
    order = []
    for a in atoms:
        key = a.column
        if key not in order:
            order.append(key)
        if a.op in (">", ">="):
            cur = lower.get(key)
            if cur is None or a.value > cur.value or (a.value == cur.value and a.op == ">"):
                lower[key] = a
        elif a.op in ("<", "<="):
            cur = upper.get(key)
            if cur is None or a.value < cur.value or (a.value == cur.value and a.op == "<"):
                upper[key] = a
        else:
            other.append(a)
    out = []
    ok = True
    for key in order:
        lo, hi = lower.get(key), upper.get(key)
        if lo is not None and hi is not None:
            if lo.value > hi.value or (lo.value == hi.value and (lo.op == ">" or hi.op == "<")):
                ok = False
        out.extend(a for a in (lo, hi) if a is not None)
    out.extend(other)
    return tuple(out), ok


# ---------------------------------------------------------------- global


@dataclass(frozen=True)
class GlobalClause:
    intervals: tuple  # PositionalInterval per non-spanning dim, dataset order
    spanning_atoms: tuple
    residual_atoms: tuple

    def interval(self, dim: str) -> PositionalInterval | None:
        for iv in self.intervals:
            if iv.dim == dim:
                return iv
        return None


@dataclass(frozen=True)
class GlobalQuery:
    dataset: DatasetDescriptor
    dnf: Dnf
    clauses: tuple
    projected: tuple = ()
    dims: tuple = ()

    def clause_sql(self, clause: GlobalClause) -> str:
        parts = []
        for dim in self.dims:
            if dim in self.dataset.spanning_dims:
                parts.extend(a.to_sql() for a in clause.spanning_atoms if a.column.dim == dim)
            else:
                parts.append(clause.interval(dim).to_sql())
        parts.extend(a.to_sql() for a in clause.residual_atoms)
        return " AND ".join(parts)

    def to_sql(self) -> str:
        if not self.clauses:
            return "FALSE"
        if len(self.clauses) == 1:
            return self.clause_sql(self.clauses[0])
        return " OR\n".join(f"({self.clause_sql(c)})" for c in self.clauses)

    @property
    def has_residuals(self) -> bool:
        return any(c.residual_atoms for c in self.clauses)


def rewrite_global(dnf: Dnf, dataset: DatasetDescriptor, handle: GridFileHandle | None = None,
                   projected=()) -> GlobalQuery:
    """Translate non-spanning dimension atoms into positional intervals."""
    from .gridfile import open_grid_file

    if handle is None:
        handle = open_grid_file(dataset.files[0])
    dataset.validate_file(handle)
    dims = tuple(dataset.schema.dim_names)
    non_spanning = [d for d in dims if d not in dataset.spanning_dims]
    axes: dict[str, CoordinateAxis] = {}

    def axis_for(dim):
        if dim not in axes:
            axes[dim] = dimension_axis(dataset, handle, dim)
        return axes[dim]

    clauses = []
    seen = set()
    for clause in dnf:
        value_atoms = {d: [] for d in non_spanning}
        pos_atoms = {d: [] for d in non_spanning}
        spanning, residual = [], []
        for a in clause:
            role = a.role
            if role == "dim":
                value_atoms[a.column.dim].append(a)
            elif role == "pos":
                pos_atoms[a.column.dim].append(a)
            elif role == "spanning":
                spanning.append(a)
            else:
                residual.append(a)
        intervals = []
        empty = False
        for d in non_spanning:
            length = dataset.schema.dim_length(d)
            iv = PositionalInterval.full(d, length)
            if value_atoms[d]:
                iv = iv.intersect(interval_for_atoms(axis_for(d), value_atoms[d]))
            if pos_atoms[d]:
                iv = iv.intersect(interval_for_atoms(position_axis(d, length), pos_atoms[d]))
            if iv.is_empty:
                empty = True
                break
            intervals.append(iv)
        if empty:
            continue
        spanning, ok = tighten(spanning)
        if not ok:
            continue
        gc = GlobalClause(tuple(intervals), spanning, tuple(residual))
        if gc not in seen:
            seen.add(gc)
            clauses.append(gc)
    return GlobalQuery(dataset, dnf, tuple(clauses), tuple(projected), dims)


# ---------------------------------------------------------------- local


@dataclass(frozen=True)
class LocalPlan:
    file: str
    blocks: tuple
    clause_blocks: tuple = ()  # (Block, residual atoms) per surviving clause
    needs_filter: bool = False
    candidates: int = 0

    @property
    def skipped(self) -> bool:
        return not self.blocks

    def block_sql(self, block: Block) -> str:
        return " AND ".join(f"{d}Pos >= {s} AND {d}Pos <= {e}" for d, s, e in zip(block.dims, block.start, block.end))


def rewrite_local(gq: GlobalQuery, handle: GridFileHandle, strategy: str = "optimized") -> LocalPlan:
    """Resolve spanning-dimension atoms for one file and cover the clause blocks."""
    desc = gq.dataset
    dims = gq.dims
    axes: dict[str, CoordinateAxis] = {}
    candidates = []
    for clause in gq.clauses:
        start, end = [], []
        for d in dims:
            if d in desc.spanning_dims:
                atoms = [a for a in clause.spanning_atoms if a.column.dim == d]
                length = handle.dim_length(d)
                if atoms:
                    if d not in axes:
                        axes[d] = dimension_axis(desc, handle, d)
                    iv = interval_for_atoms(axes[d], atoms)
                else:
                    iv = PositionalInterval.full(d, length)
            else:
                iv = clause.interval(d)
            if iv.is_empty:
                break
            start.append(iv.lo)
            end.append(iv.hi)
        else:
            candidates.append((Block(dims, tuple(start), tuple(end)), clause.residual_atoms))
    if not candidates:
        return LocalPlan(handle.path, ())
    blocks = disjoint_cover([b for b, _ in candidates], strategy)
    needs_filter = any(res for _, res in candidates)
    return LocalPlan(handle.path, tuple(blocks), tuple(candidates), needs_filter, len(candidates))
