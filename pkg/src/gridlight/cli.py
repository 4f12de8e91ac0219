"""gridlight command line.

Exit codes: 0 success, 1 query error, 2 environment/config error,
3 internal consistency failure.
"""

from __future__ import annotations

import argparse
import csv
import glob
import logging
import os
import sys

from .bench import COLUMNS, run_case
from .blockcover import DEFAULT_NAIVE_CAP, WORKLOADS
from .catalog import Catalog, parse_column_spec
from .engine import DEFAULT_MAX_CELLS, Engine
from .engine.output import write_csv, write_table
from .errors import CatalogError, GridlightError, QueryError
from .fixtures import PRESETS, generate_fixture
from .rewrite import DEFAULT_CLAUSE_CAP

EXIT_OK, EXIT_QUERY, EXIT_ENV, EXIT_INTERNAL = 0, 1, 2, 3
MANIFEST_ENV = "GRIDLIGHT_MANIFEST"
DEFAULT_MANIFEST = "gridlight.json"


def _positive(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _int_list(text: str) -> list[int]:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    if not values or any(v <= 0 for v in values):
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manifest", help=f"catalog manifest (default: ${MANIFEST_ENV} or {DEFAULT_MANIFEST})")
    common.add_argument("--workers", type=_positive, default=None, help="scan worker threads (default: CPU count)")
    common.add_argument("--max-cells", type=_positive, default=DEFAULT_MAX_CELLS, help="cells per subarray lookup")
    common.add_argument("--clause-cap", type=_positive, default=DEFAULT_CLAUSE_CAP, help="maximum DNF clauses")
    common.add_argument("--format", choices=("csv", "table"), default="csv", help="result format")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="gridlight", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("register", parents=[common], help="add or replace a dataset in the manifest")
    r.add_argument("name")
    r.add_argument("files", nargs="+", help="file paths or glob patterns")
    kind = r.add_mutually_exclusive_group()
    kind.add_argument("--spanning", default="", help="comma-separated spanning dimensions, e.g. time")
    kind.add_argument("--tabular", metavar="COLUMNS", help="column spec, e.g. time:timestamp,lat:f64,val:f64")
    r.add_argument("--delimiter", default=",", help="tabular field delimiter")

    q = sub.add_parser("query", parents=[common], help="run or explain a query")
    q.add_argument("query", help="query text, or @path to read it from a file")
    q.add_argument("--explain", action="store_true", help="print the plan without reading data")
    q.add_argument("--envelope", action="append", default=[], metavar="DATASET:DIMS",
                   help="compute and attach envelopes before planning, e.g. nao:time,lat,lon")
    q.add_argument("--stats", action="store_true", help="print the stats trailer to stderr")
    q.add_argument("--strategy", choices=("optimized", "naive"), default="optimized", help="block cover strategy")

    g = sub.add_parser("gen-fixture", parents=[common], help="write a synthetic grid dataset")
    g.add_argument("out", help="output directory")
    g.add_argument("--dims", default="time:1,lat:73,lon:144")
    g.add_argument("--files", type=_positive, default=1)
    g.add_argument("--vars", default="sp", help="name[:preset[:arg]],... e.g. sp:constant:7,t")
    g.add_argument("--fill", choices=PRESETS, default="coord-sum", help="preset for variables without one")
    g.add_argument("--version", type=int, choices=(1, 2), default=1, help="classic format version")

    b = sub.add_parser("bench-cover", parents=[common], help="benchmark the disjoint cover strategies")
    b.add_argument("--workload", choices=WORKLOADS, default="aligned")
    b.add_argument("--n", type=_int_list, default=[2, 4, 8])
    b.add_argument("--d", type=_int_list, default=[1, 2])
    b.add_argument("--strategy", choices=("both", "naive", "optimized"), default="both")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--cap", type=_positive, default=DEFAULT_NAIVE_CAP, help="naive sub-block cap")
    return p


def _manifest(args) -> str:
    return args.manifest or os.environ.get(MANIFEST_ENV) or DEFAULT_MANIFEST


def _expand(patterns) -> list[str]:
    files = []
    for pat in patterns:
        hits = sorted(glob.glob(pat))
        files.extend(hits if hits else ([pat] if os.path.exists(pat) else []))
    return list(dict.fromkeys(files))


def cmd_register(args, out, err) -> int:
    path = _manifest(args)
    catalog = Catalog.load(path)
    files = _expand(args.files)
    if args.tabular:
        desc = catalog.register_tabular_dataset(args.name, files, parse_column_spec(args.tabular), args.delimiter)
    else:
        spanning = [d.strip() for d in args.spanning.split(",") if d.strip()]
        desc = catalog.register_grid_dataset(args.name, files, spanning)
    catalog.save(path)
    out.write(f"registered {desc.name} ({desc.kind}, {len(desc.files)} file(s)) in {path}\n")
    if desc.kind == "grid":
        dims = ", ".join(
            f"{d}[{n}]" + (" spanning" if d in desc.spanning_dims else "") for d, n in desc.schema.dimensions)
        out.write(f"  dimensions: {dims}\n")
        out.write(f"  variables: {', '.join(f'{v}:{t}' for v, t in desc.schema.variables)}\n")
    out.write(f"  columns: {', '.join(f'{c.name}:{c.type}' for c in desc.row_schema.columns)}\n")
    return EXIT_OK


def cmd_query(args, out, err) -> int:
    text = args.query
    if text.startswith("@"):
        try:
            with open(text[1:]) as fh:
                text = fh.read()
        except OSError as exc:
            err.write(f"error: cannot read query file: {exc}\n")
            return EXIT_ENV
    catalog = Catalog.load(_manifest(args))
    engine = Engine(catalog, args.workers, args.max_cells, args.clause_cap, args.strategy)
    try:
        bound = engine.bind(text)
    except QueryError as exc:
        _query_error(err, text, exc)
        return EXIT_QUERY
    enveloped = []
    for spec in args.envelope:
        name, _, dims = spec.partition(":")
        dims = [d.strip() for d in dims.split(",") if d.strip()]
        if not name or not dims:
            err.write(f"error: --envelope expects DATASET:DIM[,DIM...], got {spec!r}\n")
            return EXIT_ENV
        engine.compute_envelopes(name, dims)
        enveloped.append(name)
    bound = engine.bind(text)  # rebind so the sources see the attached envelopes
    require = bound.is_join and bound.sources[0].descriptor.name in enveloped
    plan = engine.plan(bound, require_envelopes=require)
    if args.explain:
        out.write(plan.explain_text)
        return EXIT_OK
    result = engine.execute(plan)
    (write_table if args.format == "table" else write_csv)(result, out)
    if args.stats:
        err.write(result.stats.trailer() + "\n")
    return EXIT_OK


def _query_error(err, text, exc) -> None:
    err.write(f"error: {exc}\n")
    pos = getattr(exc, "position", None)
    if isinstance(pos, int) and 0 <= pos <= len(text):
        line_start = text.rfind("\n", 0, pos) + 1
        line_end = text.find("\n", pos)
        line = text[line_start: None if line_end < 0 else line_end]
        err.write(f"  {line}\n  {' ' * (pos - line_start)}^\n")


def cmd_gen_fixture(args, out, err) -> int:
    paths = generate_fixture(args.out, args.dims, args.files, args.vars, args.fill, args.version)
    out.write(f"wrote {len(paths)} file(s) to {args.out}\n")
    return EXIT_OK


def cmd_bench_cover(args, out, err) -> int:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(COLUMNS)
    status = EXIT_OK
    for d in args.d:
        for n in args.n:
            for row in run_case(args.workload, n, d, args.strategy, args.seed, args.cap):
                w.writerow(row.values())
                if row.status == "MISMATCH":
                    err.write(f"MISMATCH: {row.strategy} {args.workload} n={n} d={d}\n")
                    status = EXIT_INTERNAL
                elif row.status == "cap-exceeded":
                    err.write(f"error: naive cover exceeds the {args.cap} sub-block cap at n={n} d={d}\n")
                    if status == EXIT_OK:
                        status = EXIT_ENV
    return status


COMMANDS = {
    "register": cmd_register,
    "query": cmd_query,
    "gen-fixture": cmd_gen_fixture,
    "bench-cover": cmd_bench_cover,
}


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    args = build_parser().parse_args(argv)
    logger = logging.getLogger("gridlight")
    handler = logging.StreamHandler(err)
    handler.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
    logger.addHandler(handler)
    logger.setLevel(logging.INFO if args.verbose else logging.WARNING)
    try:
        return COMMANDS[args.command](args, out, err)
    except QueryError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_QUERY
    except (CatalogError, GridlightError, OSError) as exc:
        err.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_ENV
    except AssertionError as exc:
        err.write(f"internal consistency failure: {exc}\n")
        return EXIT_INTERNAL
    finally:
        logger.removeHandler(handler)

if __name__ == "__main__":
    sys.exit(main())
