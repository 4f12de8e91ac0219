"""Syntax tree of the query language and its canonical printer."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

AGGREGATES = ("count", "min", "max", "mean", "histogram")
FUNCTIONS = ("sqrt", "exp", "ln", "abs")
COMPARISONS = ("<", "<=", ">", ">=", "==", "!=")
NEGATED_OP = {"<": ">=", "<=": ">", ">": "<=", ">=": "<", "==": "!=", "!=": "==", "IN": "NOT IN", "NOT IN": "IN"}
MIRRORED_OP = {"<": ">", "<=": ">=", ">": "<", ">=": "<=", "==": "==", "!=": "!="}


# ---------------------------------------------------------------- expressions


@dataclass(frozen=True)
class ColumnRef:
    name: str
    qualifier: str | None = None

    def to_sql(self) -> str:
        return f"{self.qualifier}.{self.name}" if self.qualifier else self.name


@dataclass(frozen=True)
class BoundColumn:
    """A column reference resolved against one side of the query."""

    name: str
    side: int
    type: str
    role: str
    dim: str | None = None
    qualifier: str | None = field(default=None, compare=False)

    @property
    def key(self) -> tuple[int, str]:
        return (self.side, self.name)

    @property
    def is_dimension(self) -> bool:
        return self.role in ("spanning", "dim", "pos")

    def to_sql(self) -> str:
        return f"{self.qualifier}.{self.name}" if self.qualifier else self.name


@dataclass(frozen=True)
class Literal:
    value: Union[float, str]

    def to_sql(self) -> str:
        return _literal_sql(self.value)


@dataclass(frozen=True)
class Neg:
    operand: "Expr"

    def to_sql(self) -> str:
        inner = self.operand.to_sql()
        return f"-({inner})" if isinstance(self.operand, BinOp) else f"-{inner}"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"

    def to_sql(self) -> str:
        prec = _PREC[self.op]
        lhs = self.left.to_sql()
        rhs = self.right.to_sql()
        if isinstance(self.left, BinOp) and _PREC[self.left.op] < prec:
            lhs = f"({lhs})"
        # operators are left-associative, so an equal-precedence right child needs parens
        if isinstance(self.right, BinOp) and _PREC[self.right.op] <= prec:
            rhs = f"({rhs})"
        return f"{lhs} {self.op} {rhs}"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple

    def to_sql(self) -> str:
        return f"{self.func}({', '.join(a.to_sql() for a in self.args)})"


@dataclass(frozen=True)
class Aggregate:
    func: str
    arg: "Expr | None"  # None for count(*)
    params: tuple = ()

    def to_sql(self) -> str:
        if self.arg is None:
            return f"{self.func}(*)"
        extra = "".join(f", {_literal_sql(p)}" for p in self.params)
        return f"{self.func}({self.arg.to_sql()}{extra})"


Expr = Union[ColumnRef, BoundColumn, Literal, Neg, BinOp, Call, Aggregate]

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _literal_sql(value) -> str:
    if isinstance(value, str):
        return "'" + value.replace("'", "''") + "'"
    if isinstance(value, float):
        return repr(value)
    return str(value)


# ---------------------------------------------------------------- predicates


@dataclass(frozen=True)
class Atom:
    """``column op value``; value is a literal, a tuple of literals for IN,
    or (only before binding) another column."""

    column: Union[ColumnRef, BoundColumn]
    op: str
    value: object

    def negated(self) -> "Atom":
        return Atom(self.column, NEGATED_OP[self.op], self.value)

    @property
    def role(self) -> str | None:
        return getattr(self.column, "role", None)

    def to_sql(self) -> str:
        col = self.column.to_sql()
        if self.op in ("IN", "NOT IN"):
            return f"{col} {self.op} ({', '.join(self._value_sql(v) for v in self.value)})"
        return f"{col} {self.op} {self._value_sql(self.value)}"

    def _value_sql(self, v) -> str:
        if isinstance(v, (ColumnRef, BoundColumn, Literal)):
            return v.to_sql()
        if getattr(self.column, "type", None) == "timestamp" and isinstance(v, float):
            from ..catalog import format_timestamp

            return _literal_sql(format_timestamp(v))
        return _literal_sql(v)


@dataclass(frozen=True)
class Not:
    child: "Predicate"

    def to_sql(self) -> str:
        inner = self.child.to_sql()
        return f"NOT ({inner})" if isinstance(self.child, (And, Or)) else f"NOT {inner}"


@dataclass(frozen=True)
class And:
    left: "Predicate"
    right: "Predicate"

    def to_sql(self) -> str:
        lhs = self.left.to_sql()
        rhs = self.right.to_sql()
        if isinstance(self.left, (Or, And)):
            lhs = f"({lhs})"
        if isinstance(self.right, Or):
            rhs = f"({rhs})"
        return f"{lhs} AND {rhs}"


@dataclass(frozen=True)
class Or:
    left: "Predicate"
    right: "Predicate"

    def to_sql(self) -> str:
        lhs = self.left.to_sql()
        if isinstance(self.left, Or):
            lhs = f"({lhs})"
        return f"{lhs} OR {self.right.to_sql()}"


Predicate = Union[Atom, Not, And, Or]


def conjuncts(pred) -> list:
    """Flatten nested ANDs."""
    if pred is None:
        return []
    if isinstance(pred, And):
        return conjuncts(pred.left) + conjuncts(pred.right)
    return [pred]


def disjuncts(pred) -> list:
    if isinstance(pred, Or):
        return disjuncts(pred.left) + disjuncts(pred.right)
    return [pred]


def and_all(preds):
    preds = [p for p in preds if p is not None]
    if not preds:
        return None
    out = preds[-1]
    for p in reversed(preds[:-1]):
        out = And(p, out)
    return out


def or_all(preds):
    preds = list(preds)
    if not preds:
        return None
    out = preds[-1]
    for p in reversed(preds[:-1]):
        out = Or(p, out)
    return out


def atoms(pred) -> list[Atom]:
    if pred is None:
        return []
    if isinstance(pred, Atom):
        return [pred]
    if isinstance(pred, Not):
        return atoms(pred.child)
    return atoms(pred.left) + atoms(pred.right)


def expr_columns(expr) -> list:
    if isinstance(expr, (ColumnRef, BoundColumn)):
        return [expr]
    if isinstance(expr, Neg):
        return expr_columns(expr.operand)
    if isinstance(expr, BinOp):
        return expr_columns(expr.left) + expr_columns(expr.right)
    if isinstance(expr, Call):
        return [c for a in expr.args for c in expr_columns(a)]
    if isinstance(expr, Aggregate):
        return expr_columns(expr.arg) if expr.arg is not None else []
    return []


# ---------------------------------------------------------------- query


@dataclass(frozen=True)
class SelectItem:
    expr: Expr
    alias: str | None = None

    @property
    def output_name(self) -> str:
        if self.alias:
            return self.alias
        if isinstance(self.expr, (ColumnRef, BoundColumn)):
            return self.expr.name
        return self.expr.to_sql()

    def to_sql(self) -> str:
        return f"{self.expr.to_sql()} AS {self.alias}" if self.alias else self.expr.to_sql()


@dataclass(frozen=True)
class TableRef:
    name: str
    alias: str | None = None

    def to_sql(self) -> str:
        return f"{self.name} {self.alias}" if self.alias else self.name


@dataclass(frozen=True)
class Join:
    table: TableRef
    keys: tuple  # ((ColumnRef, ColumnRef), ...)

    def to_sql(self) -> str:
        on = " AND ".join(f"{a.to_sql()} = {b.to_sql()}" for a, b in self.keys)
        return f"JOIN {self.table.to_sql()} ON {on}"


@dataclass(frozen=True)
class QueryAst:
    select_list: tuple
    source: TableRef
    join: Join | None = None
    where: Predicate | None = None

    @property
    def is_aggregate(self) -> bool:
        return any(isinstance(item.expr, Aggregate) for item in self.select_list)

    def to_sql(self) -> str:
        parts = ["SELECT " + ", ".join(i.to_sql() for i in self.select_list), "FROM " + self.source.to_sql()]
        if self.join is not None:
            parts.append(self.join.to_sql())
        if self.where is not None:
            parts.append("WHERE " + self.where.to_sql())
        return "\n".join(parts)
