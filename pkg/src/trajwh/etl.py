"""Extract-transform-load: CSV samples -> trajectories -> fact rows.

Input format, one record per line::

    id,seq,t,x,y
    7,0,0.0,10.5,3.25
    7,1,1.0,11.0,3.75

The header line is written by every producer in this package; on input it is
accepted and skipped when present.
"""

from __future__ import annotations

import hashlib
import io
import json
import logging
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import IO, Iterable, Optional, Union

from .geometry import clip_to_cell, clip_to_time, portion_ratio
from .model import (
    FactRow,
    GridSpec,
    OutOfBoundsError,
    SamplePoint,
    Segment,
    TimeInterval,
    Trajectory,
    id_sort_key,
    validate_trajectory,
)

log = logging.getLogger(__name__)

HEADER = ("id", "seq", "t", "x", "y")
REJECT_POLICIES = ("fail", "skip")


class EtlError(ValueError):
    """Bad input data; carries the 1-based line number when known."""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


@dataclass(frozen=True)
class EtlConfig:
    grid: GridSpec
    bucket_width: float
    reject_policy: str = "fail"

    def __post_init__(self):
        if not self.bucket_width > 0:
            raise ValueError("bucket_width must be positive")
        if self.reject_policy not in REJECT_POLICIES:
            raise ValueError(f"reject_policy must be one of {REJECT_POLICIES}")


@dataclass
class LoadReport:
    trajectories: int = 0
    segments: int = 0
    dropped_records: int = 0
    dropped_trajectories: int = 0
    skipped_segments: int = 0
    fact_rows: int = 0
    messages: list[str] = field(default_factory=list)

    def reject(self, message: str):
        log.warning(message)
        self.messages.append(message)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _lines(source) -> Iterable[str]:
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    if isinstance(source, str):
        return io.StringIO(source)
    return (ln.decode("utf-8") if isinstance(ln, bytes) else ln for ln in source)


def parse_points(
    source: Union[str, bytes, IO],
    fmt: str = "csv",
    *,
    policy: str = "fail",
    report: Optional[LoadReport] = None,
) -> list[SamplePoint]:
    """Parse sample records, grouped by trajectory in order of first appearance."""
    if fmt != "csv":
        raise ValueError(f"unsupported input format {fmt!r}")
    if policy not in REJECT_POLICIES:
        raise ValueError(f"policy must be one of {REJECT_POLICIES}")
    report = report if report is not None else LoadReport()

    groups: dict[str, list[SamplePoint]] = {}
    seen: set[tuple[str, int]] = set()
    for lineno, raw in enumerate(_lines(source), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = [f.strip() for f in line.split(",")]
        if lineno == 1 and tuple(f.lower() for f in fields) == HEADER:
            continue
        try:
            if len(fields) != 5:
                raise EtlError(f"expected 5 fields, got {len(fields)}", lineno)
            tid = fields[0]
            if not tid:
                raise EtlError("empty trajectory id", lineno)
            try:
                seq = int(fields[1])
                t, x, y = (float(v) for v in fields[2:])
            except ValueError:
                raise EtlError(f"non-numeric field in {line!r}", lineno) from None
            if seq < 0:
                raise EtlError(f"negative seq {seq}", lineno)
            if not all(math.isfinite(v) for v in (t, x, y)):
                raise EtlError(f"non-finite value in {line!r}", lineno)
            if (tid, seq) in seen:
                raise EtlError(f"duplicate (trajectory {tid}, seq {seq})", lineno)
        except EtlError as exc:
            if policy == "fail":
                raise
            report.dropped_records += 1
            report.reject(str(exc))
            continue
        seen.add((tid, seq))
        groups.setdefault(tid, []).append(SamplePoint(tid, seq, t, x, y))
    return [p for pts in groups.values() for p in pts]


def reconstruct_trajectories(
    points: Iterable[SamplePoint],
    *,
    policy: str = "fail",
    report: Optional[LoadReport] = None,
) -> list[Trajectory]:
    """Connect consecutive samples of each object into segments."""
    report = report if report is not None else LoadReport()
    by_id: dict[str, list[SamplePoint]] = defaultdict(list)
    for p in points:
        by_id[p.trajectory_id].append(p)

    out = []
    for tid, pts in by_id.items():
        pts.sort(key=lambda p: p.seq)
        if len(pts) < 2:
            report.dropped_trajectories += 1
            report.reject(f"trajectory {tid}: single sample, no segment can be formed")
            continue
        bad = next((b for a, b in zip(pts, pts[1:]) if not b.t > a.t), None)
        if bad is not None:
            msg = f"trajectory {tid}: timestamp not increasing at seq {bad.seq}"
            if policy == "fail":
                raise EtlError(msg)
            report.dropped_trajectories += 1
            report.reject(msg)
            continue
        segs = tuple(
            Segment(a.x, a.y, a.t, b.x, b.y, b.t, trajectory_id=tid, sequence=i)
            for i, (a, b) in enumerate(zip(pts, pts[1:]))
        )
        traj = Trajectory(tid, segs)
        assert validate_trajectory(traj).ok
        out.append(traj)
    report.trajectories = len(out)
    report.segments = sum(len(t) for t in out)
    return out


def bucket_index(t: float, bucket_width: float) -> int:
    return math.floor(t / bucket_width)


def bucket_interval(b: int, bucket_width: float) -> TimeInterval:
    return TimeInterval(b * bucket_width, (b + 1) * bucket_width)


def clip_segment(seg: Segment, grid: GridSpec, bucket_width: float):
    """Yield ``(bucket, cell, portion)`` for every piece of ``seg``, buckets first."""
    for label, (x, y) in (("start", (seg.xs, seg.ys)), ("end", (seg.xe, seg.ye))):
        if not grid.contains(x, y):
            raise OutOfBoundsError(
                f"segment {seg.trajectory_id}#{seg.sequence} {label} point ({x}, {y}) is outside the grid"
            )
    first = bucket_index(seg.ts, bucket_width)
    last = bucket_index(seg.te, bucket_width)
    for b in range(first, last + 1):
        piece = clip_to_time(seg, bucket_interval(b, bucket_width))
        if piece is None:
            continue
        for cell, portion in clip_to_cell(piece, grid):
            yield b, cell, portion


def number_segments(trajs: Iterable[Trajectory]) -> list[tuple[int, Segment]]:
    """Stable segment ids: position in (trajectory id, sequence) order."""
    ordered = sorted(trajs, key=lambda tr: id_sort_key(tr.trajectory_id))
    segs = [s for tr in ordered for s in tr.segments]
    return list(enumerate(segs))


def _segment_rows(seg_id: int, seg: Segment, cfg: EtlConfig) -> list[FactRow]:
    rows = []
    direction = seg.direction
    for b, cell, portion in clip_segment(seg, cfg.grid, cfg.bucket_width):
        rows.append(
            FactRow(
                cell=cell,
                bucket=b,
                trajectory_id=seg.trajectory_id,
                segment_id=seg_id,
                direction=direction,
                ratio=portion_ratio(portion),
                clipped_len=portion.length,
            )
        )
    rows.sort(key=lambda r: (r.bucket, r.cell))
    return rows


def build_facts(
    trajs: Iterable[Trajectory],
    cfg: EtlConfig,
    *,
    report: Optional[LoadReport] = None,
    segments_out: Optional[dict[int, Segment]] = None,
) -> list[FactRow]:
    """Clip every segment to time buckets, then to grid cells, and emit one row per piece.

    Rows are ordered by trajectory id, segment sequence, bucket and cell.
    ``segments_out`` receives the id -> segment mapping of every loaded segment.
    """
    report = report if report is not None else LoadReport()
    facts: list[FactRow] = []
    for seg_id, seg in number_segments(trajs):
        try:
            rows = _segment_rows(seg_id, seg, cfg)
        except OutOfBoundsError as exc:
            if cfg.reject_policy == "fail":
                raise
            report.skipped_segments += 1
            report.reject(str(exc))
            continue
        facts.extend(rows)
        if segments_out is not None:
            segments_out[seg_id] = seg
    report.fact_rows = len(facts)
    return facts


def load_csv(source, cfg: EtlConfig, report: Optional[LoadReport] = None):
    """Run the whole pipeline; returns a :class:`~trajwh.store.Warehouse`."""
    report = report if report is not None else LoadReport()
    if isinstance(source, str):
        source = source.encode("utf-8")
    data = source if isinstance(source, bytes) else source.read()
    points = parse_points(data, policy=cfg.reject_policy, report=report)
    trajs = reconstruct_trajectories(points, policy=cfg.reject_policy, report=report)
    return load_trajectories(trajs, cfg, report=report, source=data)


def load_trajectories(trajs, cfg: EtlConfig, report: Optional[LoadReport] = None, source: bytes = b""):
    from .store import Warehouse

    report = report if report is not None else LoadReport()
    trajs = list(trajs)
    if not report.trajectories:
        report.trajectories = len(trajs)
        report.segments = sum(len(t) for t in trajs)
    segments: dict[int, Segment] = {}
    facts = build_facts(trajs, cfg, report=report, segments_out=segments)
    meta = {
        "source_sha256": hashlib.sha256(source).hexdigest() if source else "",
        "trajectories": report.trajectories,
        "segments": len(segments),
        "fact_rows": len(facts),
    }
    return Warehouse.from_facts(cfg.grid, cfg.bucket_width, facts, segments, meta=meta)
