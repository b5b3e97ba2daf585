"""Trajectory data warehouse: ETL, star-schema fact store and direction-based measures."""

from .geometry import (
    ClippedPortion,
    classify_direction,
    clip_to_cell,
    clip_to_time,
    motion_angle,
    segment_ratio,
)
from .measures import (
    compute_direction_count,
    direction_contributions,
    direction_majority,
    heading_count,
    presence,
)
from .model import (
    CellId,
    CellRange,
    Direction,
    DirectionTally,
    FactRow,
    GridSpec,
    SamplePoint,
    Segment,
    TimeInterval,
    Trajectory,
    validate_trajectory,
)
from .store import QuerySpec, Warehouse, open_warehouse, rollup_spatial, rollup_time, save, scan

__version__ = "0.1.0"

__all__ = [
    "ClippedPortion",
    "classify_direction",
    "clip_to_cell",
    "clip_to_time",
    "motion_angle",
    "segment_ratio",
    "compute_direction_count",
    "direction_contributions",
    "direction_majority",
    "heading_count",
    "presence",
    "CellId",
    "CellRange",
    "Direction",
    "DirectionTally",
    "FactRow",
    "GridSpec",
    "SamplePoint",
    "Segment",
    "TimeInterval",
    "Trajectory",
    "validate_trajectory",
    "QuerySpec",
    "Warehouse",
    "open_warehouse",
    "rollup_spatial",
    "rollup_time",
    "save",
    "scan",
]
