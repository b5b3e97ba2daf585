"""Direction-based and presence measures over a warehouse region.

Every function takes a single cell or an inclusive cell rectangle and a time
interval. Intervals need not sit on bucket boundaries: rows from partially
covered buckets are re-clipped against the interval.
"""

from __future__ import annotations

from typing import Optional, Union

from .model import CellId, CellRange, Direction, DirectionTally, TimeInterval
from .store import Aggregate, QuerySpec, Warehouse, scan

Region = Union[CellId, CellRange, tuple]

PRESENCE_MODES = ("distinct", "sum")


def region_aggregate(w: Warehouse, region: Region, interval: TimeInterval) -> Aggregate:
    q = QuerySpec(CellRange.coerce(region), interval, exact=True)
    groups = scan(w, q)
    return groups[0][1] if groups else Aggregate()


def compute_direction_count(
    w: Warehouse, cell: Region, interval: TimeInterval, *, per_object: bool = False
) -> DirectionTally:
    """Segments crossing the region, by direction of the whole segment.

    A segment split over several buckets or cells of the region still counts
    once. With ``per_object`` the count is of distinct trajectories instead.
    """
    agg = region_aggregate(w, cell, interval)
    return agg.object_counts if per_object else agg.segment_counts


def heading_count(
    w: Warehouse,
    cell: Region,
    interval: TimeInterval,
    d: Direction,
    *,
    per_object: bool = False,
) -> int:
    return compute_direction_count(w, cell, interval, per_object=per_object)[d]


def direction_contributions(w: Warehouse, cell: Region, interval: TimeInterval) -> DirectionTally:
    """Sum of segment ratios per direction (a fully covered segment adds 1)."""
    return region_aggregate(w, cell, interval).contributions


def direction_majority(w: Warehouse, cell: Region, interval: TimeInterval) -> Optional[Direction]:
    return direction_contributions(w, cell, interval).majority()


def presence(w: Warehouse, cell: Region, interval: TimeInterval, mode: str = "distinct") -> int:
    """Objects seen in the region during the interval.

    ``distinct`` counts each trajectory once. ``sum`` adds up per-bucket
    distinct counts, so an object present in three buckets counts three times.
    """
    if mode not in PRESENCE_MODES:
        raise ValueError(f"presence mode must be one of {PRESENCE_MODES}")
    agg = region_aggregate(w, cell, interval)
    return agg.presence_distinct if mode == "distinct" else agg.presence_sum
