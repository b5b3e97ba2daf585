"""Star-schema warehouse held as parallel numpy columns.

The fact table has one row per (segment, cell, time bucket) piece. Rows are
kept sorted by (cell, bucket, segment) so that a query over a cell rectangle
and a bucket range is a handful of ``searchsorted`` slices. The segment
dimension (start/end coordinates, sequence, owning trajectory) is a second
set of columns sorted by segment id; spatial and time dimensions are implicit
in the grid and the bucket width.

File layout (all little-endian)::

    magic      4s    b"TJMW"
    version    u16   FORMAT_VERSION
    reserved   u16   0
    grid       4 x f64 (x0, y0, cell_width, cell_height), 2 x u32 (nx, ny)
    bucket     f64   bucket width in ticks
    counts     3 x u64 (fact rows, segments, trajectory ids)
    ids        per trajectory id: u32 byte length + UTF-8 bytes
    segments   columns, one contiguous block each:
               seg_id i64, traj i32, seq i32, xs ys ts xe ye te f64
    facts      columns: ix i32, iy i32, bucket i64, traj i32, seg i64,
               dir i8 (-1 = undefined), ratio f64, clipped_len f64
    meta       u32 byte length + UTF-8 JSON (sorted keys)
    trailer    u32   CRC-32C of every preceding byte
"""

from __future__ import annotations

import json
import math
import os
import struct
from dataclasses import dataclass, field
from typing import Iterator, Mapping, NamedTuple, Optional, Union

import crc32c
import numpy as np

from .geometry import clip_to_cell, clip_to_time, portion_ratio
from .model import (
    DIRECTIONS,
    CellId,
    CellRange,
    Direction,
    DirectionTally,
    FactRow,
    GridSpec,
    Segment,
    TimeInterval,
    id_sort_key,
)

MAGIC = b"TJMW"
FORMAT_VERSION = 1
UNDEFINED = "undefined"
GROUP_FIELDS = frozenset({"cell", "bucket", "direction"})

_HEAD = struct.Struct("<4sHH4dIId3Q")

FACT_COLUMNS = (
    ("ix", "<i4"), ("iy", "<i4"), ("bucket", "<i8"), ("traj", "<i4"),
    ("seg", "<i8"), ("dir", "<i1"), ("ratio", "<f8"), ("clipped_len", "<f8"),
)
SEGMENT_COLUMNS = (
    ("seg_id", "<i8"), ("traj", "<i4"), ("seq", "<i4"),
    ("xs", "<f8"), ("ys", "<f8"), ("ts", "<f8"), ("xe", "<f8"), ("ye", "<f8"), ("te", "<f8"),
)


class QueryError(ValueError):
    pass


class AlignmentError(QueryError):
    pass


class RangeError(QueryError):
    pass


class WarehouseFileError(Exception):
    pass


class IntegrityError(WarehouseFileError):
    pass


class VersionError(WarehouseFileError):
    pass


def _frozen(arr: np.ndarray, dtype) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=dtype)
    out.flags.writeable = False
    return out


class Warehouse:
    """Immutable fact table plus segment dimension over one grid and bucket width."""

    def __init__(
        self,
        grid: GridSpec,
        bucket_width: float,
        traj_ids: list[str],
        facts: Mapping[str, np.ndarray],
        segments: Mapping[str, np.ndarray],
        meta: Optional[dict] = None,
    ):
        if not bucket_width > 0:
            raise ValueError("bucket_width must be positive")
        self.grid = grid
        self.bucket_width = float(bucket_width)
        self.traj_ids = list(traj_ids)
        self.meta = dict(meta or {})

        seg_order = np.argsort(np.asarray(segments["seg_id"]), kind="stable")
        self._seg = {name: _frozen(np.asarray(segments[name])[seg_order], dt) for name, dt in SEGMENT_COLUMNS}

        cols = {name: np.asarray(facts[name]) for name, _ in FACT_COLUMNS}
        cell_lin = cols["ix"].astype(np.int64) * grid.ny + cols["iy"]
        order = np.lexsort((cols["seg"], cols["bucket"], cell_lin))
        self._f = {name: _frozen(cols[name][order], dt) for name, dt in FACT_COLUMNS}
        self._cell_lin = _frozen(cell_lin[order], np.int64)
        self._check()

    def _check(self):
        f = self._f
        if len(f["ix"]):
            if f["ix"].min() < 0 or f["ix"].max() >= self.grid.nx or f["iy"].min() < 0 or f["iy"].max() >= self.grid.ny:
                raise ValueError("fact row cell outside the grid")
            if not np.isin(f["seg"], self._seg["seg_id"]).all():
                raise ValueError("fact row refers to a segment missing from the segment dimension")
            if f["traj"].min() < 0 or f["traj"].max() >= len(self.traj_ids):
                raise ValueError("fact row refers to an unknown trajectory")

    @classmethod
    def from_facts(
        cls,
        grid: GridSpec,
        bucket_width: float,
        facts: list[FactRow],
        segments: Mapping[int, Segment],
        meta: Optional[dict] = None,
    ) -> "Warehouse":
        traj_ids = sorted({s.trajectory_id for s in segments.values()}, key=id_sort_key)
        tindex = {t: i for i, t in enumerate(traj_ids)}
        seg_items = sorted(segments.items())
        seg_cols = {
            "seg_id": [k for k, _ in seg_items],
            "traj": [tindex[s.trajectory_id] for _, s in seg_items],
            "seq": [s.sequence for _, s in seg_items],
            "xs": [s.xs for _, s in seg_items],
            "ys": [s.ys for _, s in seg_items],
            "ts": [s.ts for _, s in seg_items],
            "xe": [s.xe for _, s in seg_items],
            "ye": [s.ye for _, s in seg_items],
            "te": [s.te for _, s in seg_items],
        }
        fact_cols = {
            "ix": [r.cell[0] for r in facts],
            "iy": [r.cell[1] for r in facts],
            "bucket": [r.bucket for r in facts],
            "traj": [tindex[r.trajectory_id] for r in facts],
            "seg": [r.segment_id for r in facts],
            "dir": [-1 if r.direction is None else int(r.direction) for r in facts],
            "ratio": [r.ratio for r in facts],
            "clipped_len": [r.clipped_len for r in facts],
        }
        fact_cols = {name: np.asarray(fact_cols[name], dtype=dt) for name, dt in FACT_COLUMNS}
        seg_cols = {name: np.asarray(seg_cols[name], dtype=dt) for name, dt in SEGMENT_COLUMNS}
        return cls(grid, bucket_width, traj_ids, fact_cols, seg_cols, meta)

    @classmethod
    def empty(cls, grid: GridSpec, bucket_width: float) -> "Warehouse":
        return cls.from_facts(grid, bucket_width, [], {})

    def __len__(self) -> int:
        return len(self._f["ix"])

    @property
    def n_segments(self) -> int:
        return len(self._seg["seg_id"])

    def column(self, name: str) -> np.ndarray:
        return self._f[name]

    def segment_column(self, name: str) -> np.ndarray:
        return self._seg[name]

    def facts(self) -> Iterator[FactRow]:
        f = self._f
        for i in range(len(self)):
            d = int(f["dir"][i])
            yield FactRow(
                cell=CellId(int(f["ix"][i]), int(f["iy"][i])),
                bucket=int(f["bucket"][i]),
                trajectory_id=self.traj_ids[f["traj"][i]],
                segment_id=int(f["seg"][i]),
                direction=None if d < 0 else Direction(d),
                ratio=float(f["ratio"][i]),
                clipped_len=float(f["clipped_len"][i]),
            )

    def segment(self, seg_id: int) -> Segment:
        s = self._seg
        i = int(np.searchsorted(s["seg_id"], seg_id))
        if i >= len(s["seg_id"]) or s["seg_id"][i] != seg_id:
            raise KeyError(seg_id)
        return Segment(
            float(s["xs"][i]), float(s["ys"][i]), float(s["ts"][i]),
            float(s["xe"][i]), float(s["ye"][i]), float(s["te"][i]),
            trajectory_id=self.traj_ids[s["traj"][i]],
            sequence=int(s["seq"][i]),
        )

    def segments(self) -> dict[int, Segment]:
        return {int(k): self.segment(int(k)) for k in self._seg["seg_id"]}

    def time_range(self) -> Optional[tuple[float, float]]:
        if not self.n_segments:
            return None
        return float(self._seg["ts"].min()), float(self._seg["te"].max())

    def bucket_interval(self, b: int) -> TimeInterval:
        return TimeInterval(b * self.bucket_width, (b + 1) * self.bucket_width)

    def _row_indices(self, cells: CellRange, b_lo: int, b_hi: int) -> np.ndarray:
        """Rows in the cell rectangle with ``b_lo <= bucket <= b_hi``."""
        buckets = self._f["bucket"]
        parts = []
        for ix, iy in cells.cells():
            lin = ix * self.grid.ny + iy
            c_lo = np.searchsorted(self._cell_lin, lin, "left")
            c_hi = np.searchsorted(self._cell_lin, lin, "right")
            if c_lo == c_hi:
                continue
            r_lo = c_lo + np.searchsorted(buckets[c_lo:c_hi], b_lo, "left")
            r_hi = c_lo + np.searchsorted(buckets[c_lo:c_hi], b_hi, "right")
            if r_lo < r_hi:
                parts.append(np.arange(r_lo, r_hi))
        return np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Warehouse):
            return NotImplemented
        return (
            self.grid == other.grid
            and self.bucket_width == other.bucket_width
            and self.traj_ids == other.traj_ids
            and all(np.array_equal(self._f[n], other._f[n]) for n, _ in FACT_COLUMNS)
            and all(np.array_equal(self._seg[n], other._seg[n]) for n, _ in SEGMENT_COLUMNS)
        )

    def __repr__(self) -> str:
        return (
            f"Warehouse({self.grid.nx}x{self.grid.ny} cells, bucket_width={self.bucket_width}, "
            f"{len(self)} facts, {self.n_segments} segments)"
        )


@dataclass(frozen=True)
class QuerySpec:
    """Cell rectangle, time interval and grouping for :func:`scan`.

    A non-``exact`` interval must sit on bucket boundaries. With ``exact`` set,
    rows in partially covered buckets are re-clipped to the interval.
    """

    cells: CellRange
    interval: TimeInterval
    group_by: frozenset = field(default_factory=frozenset)
    exact: bool = False

    def __post_init__(self):
        object.__setattr__(self, "cells", CellRange.coerce(self.cells))
        object.__setattr__(self, "group_by", frozenset(self.group_by))
        unknown = self.group_by - GROUP_FIELDS
        if unknown:
            raise QueryError(f"unknown group_by fields {sorted(unknown)}")
        c = self.cells
        if c.ix0 > c.ix1 or c.iy0 > c.iy1:
            raise QueryError(f"empty cell range {tuple(c)}")


class GroupKey(NamedTuple):
    cell: Optional[CellId] = None
    bucket: Optional[int] = None
    direction: Union[Direction, str, None] = None


@dataclass(frozen=True)
class Aggregate:
    """Measures for one group of fact rows.

    ``contributions`` sums ratios; ``segment_counts`` and ``object_counts``
    count distinct segments and distinct trajectories per direction.
    """

    contributions: DirectionTally = field(default_factory=DirectionTally)
    segment_counts: DirectionTally = field(default_factory=DirectionTally)
    object_counts: DirectionTally = field(default_factory=DirectionTally)
    presence_distinct: int = 0
    presence_sum: int = 0
    segments: int = 0
    rows: int = 0


def _is_aligned(t: float, width: float) -> bool:
    k = t / width
    return abs(k - round(k)) <= 1e-9 * max(1.0, abs(k))


def _select(w: Warehouse, q: QuerySpec) -> dict[str, np.ndarray]:
    """Fact columns restricted to the query region, partial buckets re-clipped."""
    iv, width = q.interval, w.bucket_width
    aligned = _is_aligned(iv.t_lo, width) and _is_aligned(iv.t_hi, width)
    if aligned:
        b_lo = round(iv.t_lo / width)
        b_hi = round(iv.t_hi / width) - 1
    elif not q.exact:
        raise AlignmentError(
            f"interval [{iv.t_lo}, {iv.t_hi}) is not aligned to bucket width {width}; use an exact query"
        )
    else:
        b_lo = math.floor(iv.t_lo / width)
        b_hi = math.ceil(iv.t_hi / width) - 1

    idx = w._row_indices(q.cells, b_lo, b_hi)
    sel = {name: w.column(name)[idx] for name, _ in FACT_COLUMNS}
    if aligned or not len(idx):
        return sel

    partial = [b for b in {b_lo, b_hi} if not iv.covers(w.bucket_interval(b))]
    mask = np.isin(sel["bucket"], partial)
    if not mask.any():
        return sel
    ratio = sel["ratio"].copy()
    length = sel["clipped_len"].copy()
    keep = np.ones(len(idx), dtype=bool)
    segs: dict[int, Segment] = {}
    for i in np.flatnonzero(mask):
        sid = int(sel["seg"][i])
        seg = segs.get(sid) or segs.setdefault(sid, w.segment(sid))
        window = iv.intersect(w.bucket_interval(int(sel["bucket"][i])))
        piece = clip_to_time(seg, window) if window is not None else None
        hit = None
        if piece is not None:
            cell = (int(sel["ix"][i]), int(sel["iy"][i]))
            hit = next((p for c, p in clip_to_cell(piece, w.grid) if c == cell), None)
        if hit is None:
            keep[i] = False
        else:
            ratio[i] = portion_ratio(hit)
            length[i] = hit.length
    sel["ratio"], sel["clipped_len"] = ratio, length
    return {name: col[keep] for name, col in sel.items()}


def _check_query(w: Warehouse, q: QuerySpec):
    c = q.cells
    if not (w.grid.is_valid((c.ix0, c.iy0)) and w.grid.is_valid((c.ix1, c.iy1))):
        raise QueryError(f"cell range {tuple(c)} outside {w.grid.nx}x{w.grid.ny} grid")
    span = w.time_range()
    if span is not None and not q.interval.overlaps(*span):
        raise RangeError(
            f"interval [{q.interval.t_lo}, {q.interval.t_hi}) lies outside the warehouse "
            f"time range [{span[0]}, {span[1]}]"
        )


def _count_unique(gid: np.ndarray, n_groups: int, *cols: np.ndarray) -> np.ndarray:
    """Distinct values of ``cols`` per group."""
    if not len(gid):
        return np.zeros(n_groups, dtype=np.int64)
    pairs = np.unique(np.stack([gid, *cols], axis=1), axis=0)
    return np.bincount(pairs[:, 0], minlength=n_groups)


def _tallies(gid, n_groups, dslot, *cols, weights=None) -> np.ndarray:
    out = np.zeros((n_groups, len(DIRECTIONS) + 1))
    if not len(gid):
        return out
    if weights is not None:
        np.add.at(out, (gid, dslot), weights)
        return out
    pairs = np.unique(np.stack([gid, dslot, *cols], axis=1), axis=0)
    np.add.at(out, (pairs[:, 0], pairs[:, 1]), 1)
    return out


def _tally(row: np.ndarray, integral: bool) -> DirectionTally:
    vals = [int(v) for v in row] if integral else [float(v) for v in row]
    return DirectionTally(tuple(vals[:-1]), vals[-1])


def scan(w: Warehouse, q: QuerySpec) -> list[tuple[GroupKey, Aggregate]]:
    """Aggregate fact rows matching ``q``; groups come back sorted by key."""
    if not len(w):
        return []
    _check_query(w, q)
    sel = _select(w, q)
    n = len(sel["ix"])
    if not n:
        return []

    dslot = np.where(sel["dir"] < 0, len(DIRECTIONS), sel["dir"]).astype(np.int64)
    key_cols = []
    if "cell" in q.group_by:
        key_cols += [sel["ix"].astype(np.int64), sel["iy"].astype(np.int64)]
    if "bucket" in q.group_by:
        key_cols.append(sel["bucket"].astype(np.int64))
    if "direction" in q.group_by:
        key_cols.append(dslot)
    if key_cols:
        keys, gid = np.unique(np.stack(key_cols, axis=1), axis=0, return_inverse=True)
        gid = gid.reshape(-1)
    else:
        keys, gid = np.zeros((1, 0), dtype=np.int64), np.zeros(n, dtype=np.int64)
    n_groups = len(keys)

    seg, traj, bucket = sel["seg"], sel["traj"].astype(np.int64), sel["bucket"]
    contrib = _tallies(gid, n_groups, dslot, weights=sel["ratio"])
    seg_counts = _tallies(gid, n_groups, dslot, seg)
    obj_counts = _tallies(gid, n_groups, dslot, traj)
    presence = _count_unique(gid, n_groups, traj)
    presence_sum = _count_unique(gid, n_groups, bucket, traj)
    n_segs = _count_unique(gid, n_groups, seg)
    rows = np.bincount(gid, minlength=n_groups)

    out = []
    for g, key in enumerate(keys):
        key = [int(v) for v in key]
        gk = {}
        if "cell" in q.group_by:
            gk["cell"] = CellId(key.pop(0), key.pop(0))
        if "bucket" in q.group_by:
            gk["bucket"] = key.pop(0)
        if "direction" in q.group_by:
            d = key.pop(0)
            gk["direction"] = UNDEFINED if d == len(DIRECTIONS) else Direction(d)
        agg = Aggregate(
            contributions=_tally(contrib[g], integral=False),
            segment_counts=_tally(seg_counts[g], integral=True),
            object_counts=_tally(obj_counts[g], integral=True),
            presence_distinct=int(presence[g]),
            presence_sum=int(presence_sum[g]),
            segments=int(n_segs[g]),
            rows=int(rows[g]),
        )
        out.append((GroupKey(**gk), agg))
    return out


def _merge_rows(w: Warehouse, grid: GridSpec, bucket_width: float, ix, iy, bucket) -> Warehouse:
    """Collapse rows sharing (segment, cell, bucket) after a remap."""
    f = {name: w.column(name) for name, _ in FACT_COLUMNS}
    seg_cols = {name: w.segment_column(name) for name, _ in SEGMENT_COLUMNS}
    if not len(w):
        return Warehouse(grid, bucket_width, w.traj_ids, f, seg_cols, w.meta)
    keys = np.stack([f["seg"], ix.astype(np.int64), iy.astype(np.int64), bucket], axis=1)
    uniq, first, inv = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    inv = inv.reshape(-1)
    ratio = np.zeros(len(uniq))
    length = np.zeros(len(uniq))
    np.add.at(ratio, inv, f["ratio"])
    np.add.at(length, inv, f["clipped_len"])
    merged = {
        "ix": uniq[:, 1], "iy": uniq[:, 2], "bucket": uniq[:, 3], "seg": uniq[:, 0],
        "traj": f["traj"][first], "dir": f["dir"][first],
        "ratio": np.minimum(ratio, 1.0), "clipped_len": length,
    }
    return Warehouse(grid, bucket_width, w.traj_ids, merged, seg_cols, w.meta)


def rollup_spatial(w: Warehouse, factor: int) -> Warehouse:
    """Coarsen the grid by ``factor`` cells per side, summing merged rows."""
    if not isinstance(factor, (int, np.integer)) or factor < 1:
        raise ValueError(f"spatial factor must be a positive integer, got {factor!r}")
    grid = w.grid.coarsen(factor)
    return _merge_rows(
        w, grid, w.bucket_width,
        w.column("ix") // factor, w.column("iy") // factor, w.column("bucket"),
    )


def rollup_time(w: Warehouse, multiplier: int) -> Warehouse:
    """Widen time buckets by ``multiplier`` (e.g. 7 for day -> week)."""
    if not isinstance(multiplier, (int, np.integer)) or multiplier < 1:
        raise ValueError(f"time multiplier must be a positive integer, got {multiplier!r}")
    return _merge_rows(
        w, w.grid, w.bucket_width * multiplier,
        w.column("ix"), w.column("iy"), np.floor_divide(w.column("bucket"), multiplier),
    )


def dumps(w: Warehouse) -> bytes:
    g = w.grid
    parts = [
        _HEAD.pack(
            MAGIC, FORMAT_VERSION, 0,
            g.x0, g.y0, g.cell_width, g.cell_height, g.nx, g.ny,
            w.bucket_width, len(w), w.n_segments, len(w.traj_ids),
        )
    ]
    for tid in w.traj_ids:
        raw = tid.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)) + raw)
    for name, dt in SEGMENT_COLUMNS:
        parts.append(w.segment_column(name).astype(dt).tobytes())
    for name, dt in FACT_COLUMNS:
        parts.append(w.column(name).astype(dt).tobytes())
    meta = json.dumps(w.meta, sort_keys=True).encode("utf-8")
    parts.append(struct.pack("<I", len(meta)) + meta)
    body = b"".join(parts)
    return body + struct.pack("<I", crc32c.crc32c(body))


def loads(data: bytes) -> Warehouse:
    if len(data) < _HEAD.size + 4:
        raise IntegrityError("file too short to be a warehouse")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if crc32c.crc32c(body) != crc:
        raise IntegrityError("checksum mismatch: file is corrupt or truncated")
    (magic, version, _, x0, y0, cw, ch, nx, ny, bw, n_rows, n_segs, n_ids) = _HEAD.unpack_from(body)
    if magic != MAGIC:
        raise WarehouseFileError(f"bad magic {magic!r}, not a warehouse file")
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported warehouse format version {version} (expected {FORMAT_VERSION})")

    pos = _HEAD.size
    try:
        ids = []
        for _ in range(n_ids):
            (n,) = struct.unpack_from("<I", body, pos)
            ids.append(body[pos + 4: pos + 4 + n].decode("utf-8"))
            pos += 4 + n

        def block(dtype, count):
            nonlocal pos
            arr = np.frombuffer(body, dtype=dtype, count=count, offset=pos)
            pos += arr.nbytes
            return arr

        segs = {name: block(dt, n_segs) for name, dt in SEGMENT_COLUMNS}
        facts = {name: block(dt, n_rows) for name, dt in FACT_COLUMNS}
        (n_meta,) = struct.unpack_from("<I", body, pos)
        meta = json.loads(body[pos + 4: pos + 4 + n_meta].decode("utf-8"))
        pos += 4 + n_meta
    except (struct.error, ValueError) as exc:
        raise IntegrityError(f"malformed warehouse body: {exc}") from exc
    if pos != len(body):
        raise IntegrityError(f"{len(body) - pos} trailing bytes after warehouse body")
    return Warehouse(GridSpec(x0, y0, cw, ch, nx, ny), bw, ids, facts, segs, meta)


def save(w: Warehouse, path: Union[str, os.PathLike]) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(w))


def open_warehouse(path: Union[str, os.PathLike]) -> Warehouse:
    with open(path, "rb") as fh:
        return loads(fh.read())
