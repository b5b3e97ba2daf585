"""Domain types shared across the warehouse: samples, segments, grid and time coordinates."""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Optional, Sequence

GEOM_TOL = 1e-9


class Direction(enum.IntEnum):
    """Eight-way compass quantization of motion angles.

    The integer value is the tie-break rank used by majority queries.
    """

    N = 0
    NE = 1
    E = 2
    SE = 3
    S = 4
    SW = 5
    W = 6
    NW = 7

    @classmethod
    def parse(cls, text: str) -> "Direction":
        aliases = {
            "NORTH": "N", "SOUTH": "S", "EAST": "E", "WEST": "W",
            "NORTHEAST": "NE", "SOUTHEAST": "SE", "NORTHWEST": "NW", "SOUTHWEST": "SW",
        }
        key = re.sub(r"[\s_-]", "", text).upper()
        key = aliases.get(key, key)
        try:
            return cls[key]
        except KeyError:
            raise ValueError(f"unknown direction {text!r}") from None


DIRECTIONS: tuple[Direction, ...] = tuple(Direction)


def id_sort_key(trajectory_id: str):
    """Numeric ids sort numerically, everything else lexicographically after them."""
    try:
        return (0, int(trajectory_id), "")
    except ValueError:
        return (1, 0, trajectory_id)


@dataclass(frozen=True)
class SamplePoint:
    trajectory_id: str
    seq: int
    t: float
    x: float
    y: float

    def __post_init__(self):
        if self.seq < 0:
            raise ValueError(f"negative seq {self.seq} for trajectory {self.trajectory_id}")


@dataclass(frozen=True)
class Segment:
    """Straight motion between two timestamped positions.

    ``angle_deg`` is derived from the coordinates, so the "Undefined iff no
    displacement" rule holds by construction (``None`` is Undefined).
    """

    xs: float
    ys: float
    ts: float
    xe: float
    ye: float
    te: float
    trajectory_id: str = ""
    sequence: int = 0

    def __post_init__(self):
        if not self.te > self.ts:
            raise ValueError(
                f"segment {self.trajectory_id}#{self.sequence} has t_e={self.te} <= t_s={self.ts}"
            )

    @classmethod
    def from_points(cls, start, end, trajectory_id: str = "", sequence: int = 0) -> "Segment":
        (xs, ys, ts), (xe, ye, te) = start, end
        return cls(xs, ys, ts, xe, ye, te, trajectory_id=trajectory_id, sequence=sequence)

    @property
    def start(self) -> tuple[float, float, float]:
        return (self.xs, self.ys, self.ts)

    @property
    def end(self) -> tuple[float, float, float]:
        return (self.xe, self.ye, self.te)

    @property
    def duration(self) -> float:
        return self.te - self.ts

    @property
    def length(self) -> float:
        return math.hypot(self.xe - self.xs, self.ye - self.ys)

    @property
    def is_stationary(self) -> bool:
        return self.xs == self.xe and self.ys == self.ye

    @cached_property
    def angle_deg(self) -> Optional[float]:
        from .geometry import motion_angle

        return motion_angle(self)

    @cached_property
    def direction(self) -> Optional[Direction]:
        from .geometry import classify_direction

        angle = self.angle_deg
        return None if angle is None else classify_direction(angle)

    def at(self, t: float) -> tuple[float, float]:
        """Linearly interpolated position at time ``t``."""
        if t == self.ts:
            return (self.xs, self.ys)
        if t == self.te:
            return (self.xe, self.ye)
        u = (t - self.ts) / (self.te - self.ts)
        return (self.xs + u * (self.xe - self.xs), self.ys + u * (self.ye - self.ys))


@dataclass(frozen=True)
class Trajectory:
    trajectory_id: str
    segments: tuple[Segment, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))

    def __len__(self) -> int:
        return len(self.segments)


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple[int, ...] = ()


def validate_trajectory(traj: Trajectory) -> ValidationReport:
    """Check continuity and time ordering at every junction.

    Junction ``i`` joins ``segments[i - 1]`` to ``segments[i]``.
    """
    bad = []
    segs = traj.segments
    for i in range(1, len(segs)):
        prev, cur = segs[i - 1], segs[i]
        continuous = prev.end == cur.start
        increasing = prev.ts < cur.ts and cur.ts < cur.te
        if not (continuous and increasing):
            bad.append(i)
    return ValidationReport(ok=not bad, violations=tuple(bad))


class CellId(NamedTuple):
    ix: int
    iy: int


class CellRange(NamedTuple):
    """Inclusive rectangle of cells."""

    ix0: int
    iy0: int
    ix1: int
    iy1: int

    @classmethod
    def single(cls, cell: CellId) -> "CellRange":
        return cls(cell.ix, cell.iy, cell.ix, cell.iy)

    @classmethod
    def coerce(cls, region) -> "CellRange":
        if isinstance(region, CellRange):
            return region
        if len(region) == 2:
            return cls.single(CellId(*region))
        return cls(*region)

    def __contains__(self, cell) -> bool:
        ix, iy = cell
        return self.ix0 <= ix <= self.ix1 and self.iy0 <= iy <= self.iy1

    def cells(self) -> list[CellId]:
        return [
            CellId(ix, iy)
            for ix in range(self.ix0, self.ix1 + 1)
            for iy in range(self.iy0, self.iy1 + 1)
        ]


class OutOfBoundsError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Regular grid of ``nx`` by ``ny`` cells anchored at ``(x0, y0)``.

    Cells are half-open except along the outer max edges, which belong to the
    last column/row.
    """

    x0: float
    y0: float
    cell_width: float
    cell_height: float
    nx: int
    ny: int

    def __post_init__(self):
        if not (self.cell_width > 0 and self.cell_height > 0):
            raise ValueError("cell_width and cell_height must be positive")
        if self.nx < 1 or self.ny < 1:
            raise ValueError("nx and ny must be >= 1")

    @property
    def x_max(self) -> float:
        return self.x0 + self.nx * self.cell_width

    @property
    def y_max(self) -> float:
        return self.y0 + self.ny * self.cell_height

    def contains(self, x: float, y: float, tol: float = GEOM_TOL) -> bool:
        return (
            self.x0 - tol <= x <= self.x_max + tol
            and self.y0 - tol <= y <= self.y_max + tol
        )

    def is_valid(self, cell) -> bool:
        ix, iy = cell
        return 0 <= ix < self.nx and 0 <= iy < self.ny

    def cell_bounds(self, cell) -> tuple[float, float, float, float]:
        ix, iy = cell
        return (
            self.x0 + ix * self.cell_width,
            self.y0 + iy * self.cell_height,
            self.x0 + (ix + 1) * self.cell_width,
            self.y0 + (iy + 1) * self.cell_height,
        )

    def cell_of(self, x: float, y: float) -> CellId:
        if not self.contains(x, y):
            raise OutOfBoundsError(f"point ({x}, {y}) is outside the grid")
        ix = math.floor((x - self.x0) / self.cell_width)
        iy = math.floor((y - self.y0) / self.cell_height)
        return CellId(min(max(ix, 0), self.nx - 1), min(max(iy, 0), self.ny - 1))

    def full_range(self) -> CellRange:
        return CellRange(0, 0, self.nx - 1, self.ny - 1)

    def coarsen(self, factor: int) -> "GridSpec":
        if factor < 1 or self.nx % factor or self.ny % factor:
            raise ValueError(f"factor {factor} does not divide grid {self.nx}x{self.ny}")
        return GridSpec(
            self.x0, self.y0,
            self.cell_width * factor, self.cell_height * factor,
            self.nx // factor, self.ny // factor,
        )


@dataclass(frozen=True)
class TimeInterval:
    """Half-open interval ``[t_lo, t_hi)``."""

    t_lo: float
    t_hi: float

    def __post_init__(self):
        if not self.t_lo < self.t_hi:
            raise ValueError(f"empty interval [{self.t_lo}, {self.t_hi})")

    def overlaps(self, lo: float, hi: float) -> bool:
        return max(lo, self.t_lo) < min(hi, self.t_hi)

    def intersect(self, other: "TimeInterval") -> Optional["TimeInterval"]:
        lo, hi = max(self.t_lo, other.t_lo), min(self.t_hi, other.t_hi)
        return TimeInterval(lo, hi) if lo < hi else None

    def covers(self, other: "TimeInterval") -> bool:
        return self.t_lo <= other.t_lo and other.t_hi <= self.t_hi


# Named multipliers for the time hierarchy, relative to a base bucket of one day.
TIME_LEVELS = {"day": 1, "week": 7, "month": 30, "quarter": 90, "year": 365}


@dataclass(frozen=True)
class FactRow:
    cell: CellId
    bucket: int
    trajectory_id: str
    segment_id: int
    direction: Optional[Direction]
    ratio: float
    clipped_len: float

    def __post_init__(self):
        if not (0.0 <= self.ratio <= 1.0 + GEOM_TOL):
            raise ValueError(f"ratio {self.ratio} outside [0, 1]")
        if self.clipped_len < 0:
            raise ValueError("clipped_len must be >= 0")


def sort_trajectories(trajs: Sequence[Trajectory]) -> list[Trajectory]:
    return sorted(trajs, key=lambda tr: id_sort_key(tr.trajectory_id))


@dataclass(frozen=True)
class DirectionTally:
    """Per-direction totals (counts or ratio sums) plus the Undefined bucket."""

    values: tuple[float, ...] = (0,) * len(DIRECTIONS)
    undefined: float = 0

    def __post_init__(self):
        if len(self.values) != len(DIRECTIONS):
            raise ValueError("a tally needs exactly one slot per direction")
        if min(self.values) < 0 or self.undefined < 0:
            raise ValueError("tally slots must be non-negative")

    def __getitem__(self, d: Direction):
        return self.values[int(d)]

    def items(self):
        return zip(DIRECTIONS, self.values)

    def total(self):
        """Sum over the eight directions (Undefined excluded)."""
        return sum(self.values)

    def majority(self) -> Optional[Direction]:
        """Largest slot; earlier directions win ties, ``None`` when all are zero."""
        best, best_val = None, 0
        for d, v in self.items():
            if v > best_val:
                best, best_val = d, v
        return best

    def as_dict(self) -> dict[str, float]:
        out = {d.name: v for d, v in self.items()}
        out["undefined"] = self.undefined
        return out
