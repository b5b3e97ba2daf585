"""Motion angles, direction classification and segment clipping."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

from .model import (
    GEOM_TOL,
    CellId,
    Direction,
    GridSpec,
    OutOfBoundsError,
    Segment,
    TimeInterval,
)

# Pieces shorter than this (as a fraction of the parent's parameter range)
# only touch a border and are dropped.
MIN_PARAM_SPAN = 1e-12


def motion_angle(seg: Segment) -> Optional[float]:
    """Heading in degrees, counterclockwise from +x, in ``[0, 360)``.

    Returns ``None`` for a segment with no spatial displacement.
    """
    dx = seg.xe - seg.xs
    dy = seg.ye - seg.ys
    if dx == 0 and dy == 0:
        return None
    angle = math.degrees(math.atan2(dy, dx))
    if angle < 0:
        angle += 360.0
    # -tiny + 360 rounds to 360.0
    if angle >= 360.0:
        angle = 0.0
    return angle


def classify_direction(angle_deg: float) -> Direction:
    if not (0.0 <= angle_deg < 360.0):
        raise ValueError(f"angle {angle_deg} outside [0, 360)")
    if angle_deg == 0:
        return Direction.E
    if angle_deg == 90:
        return Direction.N
    if angle_deg == 180:
        return Direction.W
    if angle_deg == 270:
        return Direction.S
    if angle_deg < 90:
        return Direction.NE
    if angle_deg < 180:
        return Direction.NW
    if angle_deg < 270:
        return Direction.SW
    return Direction.SE


@dataclass(frozen=True)
class ClippedPortion:
    """A piece of a segment together with the size of the segment it came from."""

    geometry: Segment
    parent_len: float
    parent_duration: float

    @classmethod
    def whole(cls, seg: Segment) -> "ClippedPortion":
        return cls(seg, seg.length, seg.duration)

    @property
    def length(self) -> float:
        return self.geometry.length

    @property
    def temporal_fraction(self) -> float:
        return self.geometry.duration / self.parent_duration


def _time_at(seg: Segment, u: float) -> float:
    if u == 0.0:
        return seg.ts
    if u == 1.0:
        return seg.te
    return seg.ts + u * (seg.te - seg.ts)


def _sub_segment(seg: Segment, u0: float, u1: float) -> Segment:
    """Piece of ``seg`` between parameters ``u0 < u1`` (0 = start, 1 = end)."""
    dx, dy, dt = seg.xe - seg.xs, seg.ye - seg.ys, seg.te - seg.ts

    def point(u):
        if u == 0.0:
            return seg.start
        if u == 1.0:
            return seg.end
        return (seg.xs + u * dx, seg.ys + u * dy, seg.ts + u * dt)

    return Segment.from_points(point(u0), point(u1), seg.trajectory_id, seg.sequence)


def clip_to_time(seg: Segment, window: TimeInterval) -> Optional[ClippedPortion]:
    """Restrict ``seg`` to the time window, interpolating the cut points."""
    return _clip_time(ClippedPortion.whole(seg), window)


def _clip_time(portion: ClippedPortion, window: TimeInterval) -> Optional[ClippedPortion]:
    seg = portion.geometry
    lo = max(seg.ts, window.t_lo)
    hi = min(seg.te, window.t_hi)
    if not lo < hi:
        return None
    if lo == seg.ts and hi == seg.te:
        return portion
    start = (*seg.at(lo), lo)
    end = (*seg.at(hi), hi)
    piece = Segment.from_points(start, end, seg.trajectory_id, seg.sequence)
    return ClippedPortion(piece, portion.parent_len, portion.parent_duration)


def _crossings(a: float, b: float, origin: float, width: float, n: int) -> list[float]:
    """Parameters in (0, 1) where the move a -> b crosses interior grid lines."""
    if a == b:
        return []
    ka = (a - origin) / width
    kb = (b - origin) / width
    lo, hi = min(ka, kb), max(ka, kb)
    first = max(math.floor(lo) + 1, 1)
    last = min(math.ceil(hi) - 1, n - 1)
    out = []
    for k in range(first, last + 1):
        u = (origin + k * width - a) / (b - a)
        if 0.0 < u < 1.0:
            out.append(u)
    return out


def clip_to_cell(
    item: Union[Segment, ClippedPortion], grid: GridSpec
) -> list[tuple[CellId, ClippedPortion]]:
    """Split a segment (or an already clipped portion) along the grid lines.

    Portions come back in time order and keep the original parent's length
    and duration, so ratios stay relative to the unclipped segment.
    """
    portion = item if isinstance(item, ClippedPortion) else ClippedPortion.whole(item)
    seg = portion.geometry
    for label, (x, y) in (("start", (seg.xs, seg.ys)), ("end", (seg.xe, seg.ye))):
        if not grid.contains(x, y):
            raise OutOfBoundsError(
                f"segment {seg.trajectory_id}#{seg.sequence} {label} point ({x}, {y}) "
                f"lies outside grid [{grid.x0}, {grid.x_max}] x [{grid.y0}, {grid.y_max}]"
            )

    if seg.is_stationary:
        return [(grid.cell_of(seg.xs, seg.ys), portion)]

    params = {0.0, 1.0}
    params.update(_crossings(seg.xs, seg.xe, grid.x0, grid.cell_width, grid.nx))
    params.update(_crossings(seg.ys, seg.ye, grid.y0, grid.cell_height, grid.ny))
    cuts = sorted(params)

    pieces: list[tuple[CellId, float, float]] = []
    for u0, u1 in zip(cuts, cuts[1:]):
        if u1 - u0 <= MIN_PARAM_SPAN:
            continue
        # large timestamps can round both cut times to the same float
        if _time_at(seg, u1) <= _time_at(seg, u0):
            continue
        um = 0.5 * (u0 + u1)
        cell = grid.cell_of(seg.xs + um * (seg.xe - seg.xs), seg.ys + um * (seg.ye - seg.ys))
        if pieces and pieces[-1][0] == cell:
            pieces[-1] = (cell, pieces[-1][1], u1)
        else:
            pieces.append((cell, u0, u1))

    if len(pieces) == 1 and pieces[0][1:] == (0.0, 1.0):
        return [(pieces[0][0], portion)]
    return [
        (cell, ClippedPortion(_sub_segment(seg, u0, u1), portion.parent_len, portion.parent_duration))
        for cell, u0, u1 in pieces
    ]


def segment_ratio(portion: ClippedPortion) -> float:
    """Share of the parent segment's length covered by this portion."""
    if portion.parent_len <= 0:
        raise ValueError("segment ratio is undefined for a segment of zero length")
    return min(portion.length / portion.parent_len, 1.0)


def portion_ratio(portion: ClippedPortion) -> float:
    """Length ratio, falling back to the time fraction for stationary parents."""
    if portion.parent_len > 0:
        return segment_ratio(portion)
    return min(portion.temporal_fraction, 1.0)


def within_bounds(point, bounds, tol: float = GEOM_TOL) -> bool:
    x, y = point
    x0, y0, x1, y1 = bounds
    return x0 - tol <= x <= x1 + tol and y0 - tol <= y <= y1 + tol
