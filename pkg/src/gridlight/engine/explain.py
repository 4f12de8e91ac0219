"""Deterministic plan rendering."""

from __future__ import annotations

import os

from ..gridfile import open_grid_file
from .scan import local_plan


def _indent(text: str, pad: str = "  ") -> str:
    return "\n".join(pad + line for line in text.splitlines())


def render_explain(plan) -> str:
    bound = plan.bound
    out = ["== query", _indent(bound.ast.to_sql())]
    for spec in plan.scans:
        desc = spec.descriptor
        head = f"== scan {spec.source.label} ({desc.kind}, {len(desc.files)} file(s)"
        if desc.spanning_dims:
            head += ", spanning: " + ", ".join(desc.spanning_dims)
        out.append(head + ")")
        out.append("predicate:")
        out.append(_indent(spec.predicate.to_sql() if spec.predicate is not None else "TRUE"))
        out.append(f"dnf: {len(spec.dnf)} clause(s)")
        out.append(_indent(spec.dnf.to_sql()))
        if spec.global_query is None:
            out.append("filter: applied to every row after parsing")
            continue
        gq = spec.global_query
        out.append(f"global clauses: {len(gq.clauses)}")
        for i, clause in enumerate(gq.clauses, 1):
            out.append(f"  [{i}] {gq.clause_sql(clause)}")
        out.append("projected variables: " + (", ".join(spec.variables) or "(none)"))
        out.append(f"local plans ({plan.strategy} cover):")
        for f in desc.files:
            lp = local_plan(spec, open_grid_file(f), plan.strategy)
            name = os.path.basename(f)
            if lp.skipped:
                out.append(f"  {name}: skipped")
                continue
            filt = ", residual filter" if lp.needs_filter else ""
            out.append(f"  {name}: {len(lp.blocks)} block(s) from {lp.candidates} clause block(s){filt}")
            for b in lp.blocks:
                out.append(f"    {lp.block_sql(b)}")
    if plan.join is not None:
        left, right = plan.scans
        keys = ", ".join(f"{l.to_sql()} = {r.to_sql()}" for l, r in plan.join.keys)
        out.append(f"== join")
        out.append(f"  hash join: build {left.source.label}, probe {right.source.label} on {keys}")
        if plan.join.envelope_dims:
            out.append("  envelope predicate on " + right.source.label + ":")
            pred = plan.join.envelope_predicate
            out.append(_indent(pred.to_sql() if pred is not None else "FALSE", "    "))
        else:
            out.append("  envelope predicate: none")
    if bound.post_filter is not None:
        out.append("== post-join filter")
        out.append(_indent(bound.post_filter.to_sql()))
    return "\n".join(out) + "\n"
