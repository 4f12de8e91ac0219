import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridlight.errors import PredicateTooComplex
from gridlight.gridfile import CoordinateAxis, open_grid_file
from gridlight.queryir import bind, parse_predicate, parse_query
from gridlight.queryir.ast import And, Atom, BoundColumn, ColumnRef, Literal, Not, Or, and_all, or_all
from gridlight.rewrite import (
    PositionalInterval,
    normalize_to_dnf,
    push_negation,
    rewrite_global,
    rewrite_local,
    tighten,
    translate_value_to_position,
)

Q1_WHERE = "lat > 20.2 AND lat < 60.5 AND time == '2017-01-01 01:00:00'"
Q2_WHERE = "lon >= 90.0 AND NOT (lat == 0.0 AND lon >= 163.0 AND lon <= 163.75)"


def _bound_where(catalog, dataset, where):
    return bind(parse_query(f"SELECT count(*) FROM {dataset} WHERE {where}"), catalog).where


def _atom_set(clause):
    return {a.to_sql() for a in clause}


def test_q2_dnf_matches_expected_clauses(catalog):
    dnf = normalize_to_dnf(_bound_where(catalog, "era_b", Q2_WHERE))
    assert len(dnf) == 4
    assert [_atom_set(c) for c in dnf] == [
        {"lon >= 90.0", "lat < 0.0"},
        {"lon >= 90.0", "lat > 0.0"},
        {"lon >= 90.0", "lon < 163.0"},
        {"lon >= 90.0", "lon > 163.75"},
    ]


def test_negation_elimination_flips_operators():
    p = push_negation(parse_predicate("NOT (a < 1 AND NOT (b >= 2 OR c IN (1, 2)))"))
    assert p.to_sql() == "a >= 1.0 OR b >= 2.0 OR c IN (1.0, 2.0)"



OPS = {"<": lambda x, v: x < v, "<=": lambda x, v: x <= v, ">": lambda x, v: x > v,
       ">=": lambda x, v: x >= v, "==": lambda x, v: x == v, "!=": lambda x, v: x != v}


def _truth(p, env):
    """Reference evaluator over one assignment of column values."""
    if isinstance(p, Atom):
        v = p.value
        if p.op in ("IN", "NOT IN"):
            hit = env[p.column.name] in {getattr(x, "value", x) for x in v}
            return hit if p.op == "IN" else not hit
        return OPS[p.op](env[p.column.name], getattr(v, "value", v))
    if isinstance(p, Not):
        return not _truth(p.child, env)
    if isinstance(p, And):
        return _truth(p.left, env) and _truth(p.right, env)
    return _truth(p.left, env) or _truth(p.right, env)


def _dnf_truth(dnf, env):
    return any(all(_truth(a, env) for a in clause) for clause in dnf)


ASSIGNMENTS = [dict(zip("abc", xs)) for xs in np.ndindex(5, 5, 5)]


def test_negated_disjunction_becomes_one_clause():
    p = parse_predicate("NOT (a > 1 OR b < 2)")
    dnf = normalize_to_dnf(p)
    assert [_atom_set(c) for c in dnf] == [{"a <= 1.0", "b >= 2.0"}]
    for env in ASSIGNMENTS:
        assert _truth(p, env) == _dnf_truth(dnf, env)


_atoms = st.builds(lambda c, o, v: Atom(ColumnRef(c), o, Literal(float(v))),
                   st.sampled_from("abc"), st.sampled_from(sorted(OPS)), st.integers(0, 4))
_preds = st.recursive(
    _atoms,
    lambda inner: st.one_of(st.builds(And, inner, inner), st.builds(Or, inner, inner), st.builds(Not, inner)),
    max_leaves=7,
)


@settings(max_examples=300, deadline=None)
@given(_preds)
def test_dnf_is_equivalent_on_every_assignment(p):
    dnf = normalize_to_dnf(p)
    for env in ASSIGNMENTS:
        assert _truth(p, env) == _dnf_truth(dnf, env)


def test_dnf_cap():
    pred = and_all(parse_predicate(f"x{i} < 1 OR y{i} > 2") for i in range(13))
    with pytest.raises(PredicateTooComplex):
        normalize_to_dnf(pred)
    assert len(normalize_to_dnf(pred, cap=2**13)) == 2**13


def test_residual_equalities_are_kept(catalog):
    dnf = normalize_to_dnf(_bound_where(catalog, "era", "t == 5 AND lat IN (0, 10)"))
    assert len(dnf) == 2
    assert all(any(a.op == "==" and a.column.name == "t" for a in c) for c in dnf)


def test_q1_global_rewrite(catalog):
    desc = catalog.get("era_b")
    gq = rewrite_global(normalize_to_dnf(_bound_where(catalog, "era_b", Q1_WHERE)), desc)
    assert len(gq.clauses) == 1
    clause = gq.clauses[0]
    assert clause.interval("lat") == PositionalInterval("lat", 119, 279)
    assert clause.interval("lon") == PositionalInterval("lon", 0, 1439)
    assert "latPos >= 119 AND latPos <= 279" in gq.to_sql()


def test_q1_local_rewrite_skips_other_hours(catalog):
    desc = catalog.get("era_b")
    gq = rewrite_global(normalize_to_dnf(_bound_where(catalog, "era_b", Q1_WHERE)), desc)
    plans = [rewrite_local(gq, open_grid_file(f)) for f in desc.files]
    assert [p.skipped for p in plans] == [True, False]
    (block,) = plans[1].blocks
    assert block.start == (0, 119, 0) and block.end == (0, 279, 1439)
    assert block.cells == 161 * 1440


def test_unsatisfiable_clauses_dropped(catalog):
    desc = catalog.get("era")
    where = "(lat > 50 AND lat < 40) OR (time > '2017-01-01 05:00:00' AND time < '2017-01-01 04:00:00')"
    gq = rewrite_global(normalize_to_dnf(_bound_where(catalog, "era", where)), desc)
    assert gq.clauses == ()


def test_tighten():
    col = BoundColumn("x", 0, "f64", "spanning", "x")
    atoms, ok = tighten([Atom(col, ">", 1.0), Atom(col, ">=", 3.0), Atom(col, "<", 9.0), Atom(col, "<=", 9.0)])
    assert ok and [a.to_sql() for a in atoms] == ["x >= 3.0", "x < 9.0"]
    assert not tighten([Atom(col, ">", 5.0), Atom(col, "<", 3.0)])[1]
    assert not tighten([Atom(col, ">", 5.0), Atom(col, "<=", 5.0)])[1]


@st.composite
def axes(draw):
    n = draw(st.integers(1, 30))
    start = draw(st.integers(-50, 50))
    steps = draw(st.lists(st.integers(1, 4), min_size=n - 1, max_size=n - 1))
    values = np.cumsum([start] + steps).astype(np.float64)
    if draw(st.booleans()):
        values = values[::-1].copy()
    return CoordinateAxis.from_values("x", values)


@settings(max_examples=400, deadline=None)
@given(axes(), st.sampled_from(["<", "<=", ">", ">="]), st.integers(-60, 200).map(lambda v: v / 2))
def test_translation_matches_brute_force(axis, op, value):
    iv = translate_value_to_position(axis, op, value)
    cmp = {"<": np.less, "<=": np.less_equal, ">": np.greater, ">=": np.greater_equal}[op]
    hits = np.flatnonzero(cmp(axis.values, value))
    if hits.size == 0:
        assert iv.is_empty
    else:
        assert (iv.lo, iv.hi) == (hits[0], hits[-1])
        assert hits.size == len(iv)  # monotonic axes give contiguous runs


def test_descending_axis_example():
    axis = CoordinateAxis.from_values("v", np.array([10.0, 7.5, 5.0, 2.5, 0.0]))
    iv = translate_value_to_position(axis, ">=", 5.0)
    hits = [i for i, x in enumerate(axis.values) if x >= 5.0]  # linear scan
    assert (iv.lo, iv.hi) == (hits[0], hits[-1]) == (0, 2)
