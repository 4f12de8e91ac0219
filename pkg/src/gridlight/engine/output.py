"""Rendering result rows as CSV or an aligned table."""

from __future__ import annotations

import csv
import io

from ..catalog import format_timestamp


def format_value(value, typ: str) -> str:
    if value is None:
        return "NULL"
    if typ == "timestamp":
        return format_timestamp(value)
    if typ == "i64":
        return str(int(value))
    if typ == "f64":
        return repr(float(value))
    return str(value)


def formatted_rows(result):
    for row in result.rows():
        yield [format_value(v, t) for v, t in zip(row, result.types)]


def write_csv(result, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(result.names)
    for row in formatted_rows(result):
        w.writerow(row)


def write_table(result, fh) -> None:
    rows = list(formatted_rows(result))
    widths = [len(n) for n in result.names]
    for row in rows:
        widths = [max(w, len(v)) for w, v in zip(widths, row)]
    fh.write(" | ".join(n.ljust(w) for n, w in zip(result.names, widths)).rstrip() + "\n")
    fh.write("-+-".join("-" * w for w in widths) + "\n")
    for row in rows:
        fh.write(" | ".join(v.rjust(w) for v, w in zip(row, widths)).rstrip() + "\n")


def to_csv(result) -> str:
    buf = io.StringIO()
    write_csv(result, buf)
    return buf.getvalue()
