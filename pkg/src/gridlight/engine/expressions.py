"""Vectorized evaluation of bound expressions and predicates over a RowBatch."""

from __future__ import annotations

import numpy as np

from ..errors import DomainError, TypeMismatch
from ..queryir.ast import And, Atom, BinOp, BoundColumn, Call, Literal, Neg, Not, Or


def evaluate_expression(expr, batch) -> np.ndarray:
    n = len(batch)
    if isinstance(expr, BoundColumn):
        col = batch[expr.key]
        return col if col.dtype == object else col.astype(np.float64, copy=False)
    if isinstance(expr, Literal):
        return np.full(n, float(expr.value))
    if isinstance(expr, Neg):
        return -evaluate_expression(expr.operand, batch)
    if isinstance(expr, BinOp):
        a = evaluate_expression(expr.left, batch)
        b = evaluate_expression(expr.right, batch)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if expr.op == "+":
                return a + b
            if expr.op == "-":
                return a - b
            if expr.op == "*":
                return a * b
            return a / b
    if isinstance(expr, Call):
        x = evaluate_expression(expr.args[0], batch)
        if expr.func == "sqrt":
            bad = np.flatnonzero(x < 0)
            if bad.size:
                raise DomainError("sqrt", int(bad[0]))
            return np.sqrt(x)
        if expr.func == "ln":
            bad = np.flatnonzero(~(x > 0))
            if bad.size:
                raise DomainError("ln", int(bad[0]))
            return np.log(x)
        if expr.func == "exp":
            with np.errstate(over="ignore"):
                return np.exp(x)
        if expr.func == "abs":
            return np.abs(x)
    raise TypeMismatch(f"cannot evaluate {expr!r}")


def _compare(values, op, c):
    if op == "<":
        return values < c
    if op == "<=":
        return values <= c
    if op == ">":
        return values > c
    if op == ">=":
        return values >= c
    if op == "==":
        return values == c
    if op == "!=":
        return values != c
    if op == "IN":
        return np.isin(values, np.asarray(c, dtype=np.float64))
    if op == "NOT IN":
        return ~np.isin(values, np.asarray(c, dtype=np.float64))
    raise TypeMismatch(f"unknown operator {op}")


def evaluate_predicate(pred, batch) -> np.ndarray:
    if pred is None:
        return np.ones(len(batch), dtype=bool)
    if isinstance(pred, Atom):
        return _compare(batch[pred.column.key], pred.op, pred.value)
    if isinstance(pred, Not):
        return ~evaluate_predicate(pred.child, batch)
    if isinstance(pred, And):
        return evaluate_predicate(pred.left, batch) & evaluate_predicate(pred.right, batch)
    if isinstance(pred, Or):
        return evaluate_predicate(pred.left, batch) | evaluate_predicate(pred.right, batch)
    raise TypeMismatch(f"cannot evaluate predicate {pred!r}")


def evaluate_atoms(atoms, batch) -> np.ndarray:
    mask = np.ones(len(batch), dtype=bool)
    for a in atoms:
        mask &= _compare(batch[a.column.key], a.op, a.value)
    return mask
