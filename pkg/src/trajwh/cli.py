"""Command-line entry point: ``trajwh {generate,load,query,rollup}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from typing import Optional, Sequence

from . import measures, store, synthgen
from .etl import EtlConfig, EtlError, LoadReport, load_csv
from .model import DIRECTIONS, CellId, CellRange, Direction, GridSpec, OutOfBoundsError, TimeInterval
from .store import GroupKey, QuerySpec, Warehouse

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_IO = 0, 1, 2, 3
MEASURES = ("presence", "heading", "contributions", "majority")

log = logging.getLogger("trajwh")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be a positive number, got {text}")
    return v


def _direction(text: str) -> Direction:
    try:
        return Direction.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="trajwh", description="Trajectory data warehouse with direction-based measures.")
    p.add_argument("-v", "--verbose", action="store_true", help="log rejected records to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic sample CSV")
    g.add_argument("--seed", type=int, default=0, help="64-bit seed (default 0)")
    g.add_argument("--objects", type=_positive_int, default=100)
    g.add_argument("--samples", type=_positive_int, default=50, help="samples per object (>= 2)")
    g.add_argument("--bounds", type=float, nargs=4, metavar=("XMIN", "YMIN", "XMAX", "YMAX"),
                   default=(0.0, 0.0, 1000.0, 1000.0))
    g.add_argument("--speed", type=_positive_float, nargs=2, metavar=("MIN", "MAX"), default=(5.0, 20.0),
                   help="speed range in map units per tick")
    g.add_argument("--turn-stddev", type=float, default=15.0, help="heading noise per step, degrees")
    g.add_argument("--out", default="-", help="output path (default stdout)")

    ld = sub.add_parser("load", help="run the ETL and write a warehouse file")
    ld.add_argument("input", help="sample CSV path, or - for stdin")
    ld.add_argument("--grid", type=_positive_int, nargs=2, metavar=("NX", "NY"), required=True)
    ld.add_argument("--origin", type=float, nargs=2, metavar=("X", "Y"), default=(0.0, 0.0))
    ld.add_argument("--cell-w", type=_positive_float, required=True)
    ld.add_argument("--cell-h", type=_positive_float, required=True)
    ld.add_argument("--bucket-width", type=_positive_float, required=True, help="time bucket width in ticks")
    ld.add_argument("--out", required=True, help="warehouse file to write")
    ld.add_argument("--on-error", choices=("fail", "skip"), default="fail")
    ld.add_argument("--report", help="write the JSON load report here instead of stderr")

    q = sub.add_parser("query", help="evaluate a measure over a cell region and time interval")
    q.add_argument("warehouse")
    q.add_argument("--measure", choices=MEASURES, required=True)
    where = q.add_mutually_exclusive_group()
    where.add_argument("--cell", type=int, nargs=2, metavar=("IX", "IY"))
    where.add_argument("--cell-range", type=int, nargs=4, metavar=("IX0", "IY0", "IX1", "IY1"))
    q.add_argument("--from", dest="t_from", type=float, help="interval start (default: earliest sample)")
    q.add_argument("--to", dest="t_to", type=float, help="interval end, exclusive (default: latest sample)")
    q.add_argument("--direction", type=_direction, help="restrict heading output to one direction")
    q.add_argument("--presence-mode", choices=measures.PRESENCE_MODES, default="distinct")
    q.add_argument("--per-object", action="store_true", help="heading counts distinct objects, not segments")
    q.add_argument("--group-by", choices=("cell", "bucket", "none"), nargs="+", default=["cell"])
    q.add_argument("--format", choices=("table", "csv", "json"), default="table")

    r = sub.add_parser("rollup", help="coarsen a warehouse in space and/or time")
    r.add_argument("warehouse")
    r.add_argument("--spatial-factor", type=_positive_int, default=1)
    r.add_argument("--time-multiplier", type=_positive_int, default=1)
    r.add_argument("--out", required=True)
    return p


def _open_out(path: str):
    return sys.stdout if path == "-" else open(path, "w", encoding="utf-8", newline="")


def cmd_generate(args) -> int:
    try:
        cfg = synthgen.GenConfig(
            seed=args.seed,
            n_objects=args.objects,
            samples_per_object=args.samples,
            bounds=tuple(args.bounds),
            speed_range=tuple(args.speed),
            turn_stddev=args.turn_stddev,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = _open_out(args.out)
    try:
        synthgen.write_csv(synthgen.generate(cfg), out)
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_load(args) -> int:
    grid = GridSpec(args.origin[0], args.origin[1], args.cell_w, args.cell_h, args.grid[0], args.grid[1])
    cfg = EtlConfig(grid, args.bucket_width, args.on_error)
    if args.input == "-":
        data = sys.stdin.buffer.read()
    else:
        with open(args.input, "rb") as fh:
            data = fh.read()
    report = LoadReport()
    w = load_csv(data, cfg, report)
    store.save(w, args.out)
    payload = report.to_json() + "\n"
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(payload)
    else:
        sys.stderr.write(payload)
    return EXIT_OK


def _fmt(v):
    if isinstance(v, float):
        return float(f"{v:.9g}")
    return v


def _query_records(w: Warehouse, args) -> tuple[list[str], list[dict]]:
    if args.cell:
        region = CellRange.single(CellId(*args.cell))
    elif args.cell_range:
        region = CellRange(*args.cell_range)
    else:
        region = w.grid.full_range()
    span = w.time_range()
    lo = args.t_from if args.t_from is not None else (span[0] if span else 0.0)
    hi = args.t_to if args.t_to is not None else (span[1] if span else lo + w.bucket_width)
    try:
        interval = TimeInterval(lo, hi)
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    group_by = set(args.group_by) - {"none"}
    spec = QuerySpec(region, interval, frozenset(group_by), exact=True)
    if not w.grid.is_valid((region.ix0, region.iy0)) or not w.grid.is_valid((region.ix1, region.iy1)):
        raise store.QueryError(f"cell range {tuple(region)} outside {w.grid.nx}x{w.grid.ny} grid")
    found = dict(store.scan(w, spec))

    cells = region.cells() if "cell" in group_by else [None]
    if "bucket" in group_by:
        buckets = range(math.floor(lo / w.bucket_width), math.ceil(hi / w.bucket_width))
    else:
        buckets = [None]

    fields = []
    if "cell" in group_by:
        fields += ["ix", "iy", "minX", "minY", "maxX", "maxY"]
    else:
        fields += ["ix0", "iy0", "ix1", "iy1"]
    fields += ["from", "to"]
    if "bucket" in group_by:
        fields.insert(len(fields) - 2, "bucket")

    if args.measure == "presence":
        fields.append(f"presence_{args.presence_mode}")
    elif args.measure == "heading":
        dirs = [args.direction] if args.direction is not None else list(DIRECTIONS)
        fields += [f"count_{d.name}" for d in dirs]
        if args.direction is None:
            fields.append("count_undefined")
    elif args.measure == "contributions":
        fields += [f"contrib_{d.name}" for d in DIRECTIONS]
    else:
        fields.append("majority")

    records = []
    for cell in cells:
        for b in buckets:
            agg = found.get(GroupKey(cell=cell, bucket=b), store.Aggregate())
            rec: dict = {}
            if cell is not None:
                x0, y0, x1, y1 = w.grid.cell_bounds(cell)
                rec.update(ix=cell.ix, iy=cell.iy, minX=x0, minY=y0, maxX=x1, maxY=y1)
            else:
                rec.update(ix0=region.ix0, iy0=region.iy0, ix1=region.ix1, iy1=region.iy1)
            if b is not None:
                rec["bucket"] = b
                biv = w.bucket_interval(b)
                rec["from"], rec["to"] = max(lo, biv.t_lo), min(hi, biv.t_hi)
            else:
                rec["from"], rec["to"] = lo, hi
            if args.measure == "presence":
                rec[fields[-1]] = agg.presence_distinct if args.presence_mode == "distinct" else agg.presence_sum
            elif args.measure == "heading":
                tally = agg.object_counts if args.per_object else agg.segment_counts
                for d in dirs:
                    rec[f"count_{d.name}"] = tally[d]
                if args.direction is None:
                    rec["count_undefined"] = tally.undefined
            elif args.measure == "contributions":
                for d in DIRECTIONS:
                    rec[f"contrib_{d.name}"] = agg.contributions[d]
            else:
                maj = agg.contributions.majority()
                rec["majority"] = maj.name if maj is not None else None
            records.append({k: _fmt(rec[k]) for k in fields})
    return fields, records


def render(fields: list[str], records: list[dict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(records, indent=None) + "\n"
    buf = io.StringIO()
    if fmt == "csv":
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        writer.writerows({k: ("" if v is None else v) for k, v in r.items()} for r in records)
        return buf.getvalue()
    cells = [[("-" if r[f] is None else str(r[f])) for f in fields] for r in records]
    widths = [max([len(f)] + [len(row[i]) for row in cells]) for i, f in enumerate(fields)]
    lines = ["  ".join(f.rjust(wd) for f, wd in zip(fields, widths))]
    lines += ["  ".join(c.rjust(wd) for c, wd in zip(row, widths)) for row in cells]
    return "\n".join(lines) + "\n"


def cmd_query(args) -> int:
    w = store.open_warehouse(args.warehouse)
    fields, records = _query_records(w, args)
    sys.stdout.write(render(fields, records, args.format))
    return EXIT_OK


def cmd_rollup(args) -> int:
    w = store.open_warehouse(args.warehouse)
    if args.spatial_factor != 1:
        w = store.rollup_spatial(w, args.spatial_factor)
    if args.time_multiplier != 1:
        w = store.rollup_time(w, args.time_multiplier)
    store.save(w, args.out)
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "load": cmd_load, "query": cmd_query, "rollup": cmd_rollup}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help or a usage error
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"trajwh: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"trajwh: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (EtlError, OutOfBoundsError, store.QueryError, store.WarehouseFileError, ValueError) as exc:
        print(f"trajwh: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
