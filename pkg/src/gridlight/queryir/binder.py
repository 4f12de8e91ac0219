"""Resolve a parsed query against the catalog."""

from __future__ import annotations

from dataclasses import dataclass

from ..catalog import Catalog, DatasetDescriptor, parse_timestamp
from ..errors import TypeMismatch, UnknownColumn
from .ast import (
    Aggregate,
    And,
    Atom,
    BinOp,
    BoundColumn,
    Call,
    ColumnRef,
    Literal,
    Neg,
    Not,
    Or,
    QueryAst,
    SelectItem,
    and_all,
    atoms,
    conjuncts,
)


@dataclass(frozen=True)
class Source:
    descriptor: DatasetDescriptor
    alias: str | None
    side: int

    @property
    def label(self) -> str:
        return self.alias or self.descriptor.name


@dataclass(frozen=True)
class BoundQuery:
    ast: QueryAst
    sources: tuple
    select_list: tuple
    output_names: tuple
    output_types: tuple
    where: object
    side_filters: tuple  # pushed-down predicate per source
    post_filter: object  # conjuncts spanning both join sides
    join_keys: tuple  # ((left BoundColumn, right BoundColumn), ...)
    is_aggregate: bool

    @property
    def is_join(self) -> bool:
        return len(self.sources) > 1


class _Scope:
    def __init__(self, sources, join_key_names=()):
        self.sources = sources
        self.join_key_names = set(join_key_names)

    def resolve(self, ref: ColumnRef) -> BoundColumn:
        if ref.qualifier is not None:
            for src in self.sources:
                if ref.qualifier in (src.alias, src.descriptor.name):
                    return self._column(src, ref.name)
            raise UnknownColumn(f"unknown table qualifier {ref.qualifier!r} in {ref.to_sql()}")
        hits = [src for src in self.sources if ref.name in src.descriptor.row_schema]
        if not hits:
            raise UnknownColumn(f"unknown column {ref.name!r}")
        if len(hits) > 1 and ref.name not in self.join_key_names:
            raise UnknownColumn(f"ambiguous column {ref.name!r}; qualify it")
        return self._column(hits[0], ref.name)

    def _column(self, src: Source, name: str) -> BoundColumn:
        col = src.descriptor.row_schema.get(name)
        if col is None:
            raise UnknownColumn(f"dataset {src.descriptor.name!r} has no column {name!r}")
        qualifier = src.label if len(self.sources) > 1 else None
        return BoundColumn(col.name, src.side, col.type, col.role, col.dim, qualifier)


def bind(ast: QueryAst, catalog: Catalog) -> BoundQuery:
    sources = [Source(catalog.get(ast.source.name), ast.source.alias, 0)]
    if ast.join is not None:
        sources.append(Source(catalog.get(ast.join.table.name), ast.join.table.alias, 1))
    sources = tuple(sources)

    join_keys = ()
    if ast.join is not None:
        plain = _Scope(sources)
        keys = []
        names = set()
        for a, b in ast.join.keys:
            # unqualified keys: left operand from FROM, right operand from JOIN
            ca = _resolve_on(plain, sources[0], a)
            cb = _resolve_on(plain, sources[1], b)
            if ca.side == cb.side:
                raise TypeMismatch(f"join key {a.to_sql()} = {b.to_sql()} compares one side with itself")
            if ca.side == 1:
                ca, cb = cb, ca
            if (ca.type == "timestamp") != (cb.type == "timestamp") or "text" in (ca.type, cb.type):
                raise TypeMismatch(f"join key types differ: {ca.name} {ca.type} vs {cb.name} {cb.type}")
            keys.append((ca, cb))
            if ca.name == cb.name:
                names.add(ca.name)
        join_keys = tuple(keys)
        scope = _Scope(sources, names)
    else:
        scope = _Scope(sources)

    select = []
    for item in ast.select_list:
        select.append(SelectItem(_bind_expr(item.expr, scope, top=True), item.alias))
    aggs = [isinstance(i.expr, Aggregate) for i in select]
    if any(aggs) and not all(aggs):
        raise TypeMismatch("select list mixes aggregates and plain columns")
    names = [i.output_name for i in select]
    types = [_output_type(i.expr) for i in select]

    where = _bind_pred(ast.where, scope) if ast.where is not None else None
    side_filters = [[] for _ in sources]
    post = []
    for c in conjuncts(where):
        sides = {a.column.side for a in atoms(c)}
        if len(sides) == 1:
            side_filters[sides.pop()].append(c)
        else:
            post.append(c)
    return BoundQuery(
        ast=ast,
        sources=sources,
        select_list=tuple(select),
        output_names=tuple(names),
        output_types=tuple(types),
        where=where,
        side_filters=tuple(and_all(f) for f in side_filters),
        post_filter=and_all(post),
        join_keys=join_keys,
        is_aggregate=any(aggs),
    )


def _resolve_on(scope: _Scope, src: Source, ref: ColumnRef) -> BoundColumn:
    if ref.qualifier is not None:
        return scope.resolve(ref)
    return scope._column(src, ref.name)


def _output_type(expr) -> str:
    if isinstance(expr, BoundColumn):
        return expr.type
    if isinstance(expr, Aggregate):
        if expr.func == "count":
            return "i64"
        if expr.func == "histogram":
            return "histogram"
        if expr.func in ("min", "max") and isinstance(expr.arg, BoundColumn) and expr.arg.type == "timestamp":
            return "timestamp"
    return "f64"


def _bind_expr(expr, scope, top=False, in_agg=False):
    if isinstance(expr, ColumnRef):
        col = scope.resolve(expr)
        if col.type == "text" and not top:
            raise TypeMismatch(f"text column {col.name} cannot be used in arithmetic")
        return col
    if isinstance(expr, Literal):
        if isinstance(expr.value, str):
            raise TypeMismatch(f"string literal {expr.to_sql()} not allowed in expressions")
        return expr
    if isinstance(expr, Neg):
        return Neg(_bind_expr(expr.operand, scope, in_agg=in_agg))
    if isinstance(expr, BinOp):
        return BinOp(expr.op, _bind_expr(expr.left, scope, in_agg=in_agg), _bind_expr(expr.right, scope, in_agg=in_agg))
    if isinstance(expr, Call):
        return Call(expr.func, tuple(_bind_expr(a, scope, in_agg=in_agg) for a in expr.args))
    if isinstance(expr, Aggregate):
        if in_agg or not top:
            raise TypeMismatch(f"aggregate {expr.func} must be a top-level select item")
        if expr.arg is None:
            return expr
        arg = _bind_expr(expr.arg, scope, top=expr.func == "count", in_agg=True)
        return Aggregate(expr.func, arg, expr.params)
    raise TypeMismatch(f"unsupported expression {expr!r}")


def _bind_pred(pred, scope):
    if isinstance(pred, Not):
        return Not(_bind_pred(pred.child, scope))
    if isinstance(pred, And):
        return And(_bind_pred(pred.left, scope), _bind_pred(pred.right, scope))
    if isinstance(pred, Or):
        return Or(_bind_pred(pred.left, scope), _bind_pred(pred.right, scope))
    return _bind_atom(pred, scope)


def _bind_atom(atom: Atom, scope) -> Atom:
    col = scope.resolve(atom.column)
    if isinstance(atom.value, ColumnRef):
        raise TypeMismatch(f"comparing two columns ({atom.to_sql()}) is not supported")
    if col.type == "text":
        raise TypeMismatch(f"predicates on text column {col.name!r} are not supported")
    if atom.op in ("IN", "NOT IN"):
        value = tuple(_literal_value(v, col) for v in atom.value)
    else:
        value = _literal_value(atom.value, col)
    return Atom(col, atom.op, value)


def _literal_value(lit: Literal, col: BoundColumn) -> float:
    v = lit.value
    if col.type == "timestamp":
        if not isinstance(v, str):
            raise TypeMismatch(f"{col.name} is a timestamp; compare it with a quoted 'YYYY-MM-DD HH:MM:SS' literal")
        try:
            return parse_timestamp(v)
        except ValueError as exc:
            raise TypeMismatch(f"bad timestamp literal {v!r}") from exc
    if isinstance(v, str):
        raise TypeMismatch(f"{col.name} is numeric but was compared with {lit.to_sql()}")
    return float(v)
