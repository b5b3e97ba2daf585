"""Seeded moving-object generator (correlated random walk inside a rectangle).

Randomness comes from numpy's PCG64 bit generator. Object ``i`` draws from
``SeedSequence(seed, spawn_key=(i,))``, so every object's stream is
independent of how many other objects are generated and in what order.

Per object: a uniform start position and heading, then for each step the
heading is perturbed by N(0, turn_stddev) degrees, a speed is drawn uniformly
from ``speed_range`` and the object advances ``speed`` units (one tick per
sample). Steps that leave the bounds are mirrored back inside and the heading
is reflected accordingly.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np

from .etl import HEADER
from .model import SamplePoint


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    n_objects: int = 100
    samples_per_object: int = 50
    bounds: tuple[float, float, float, float] = (0.0, 0.0, 1000.0, 1000.0)
    speed_range: tuple[float, float] = (5.0, 20.0)
    turn_stddev: float = 15.0

    def __post_init__(self):
        if self.n_objects < 1:
            raise ValueError("n_objects must be >= 1")
        if self.samples_per_object < 2:
            raise ValueError("samples_per_object must be >= 2")
        xmin, ymin, xmax, ymax = self.bounds
        if not (xmax > xmin and ymax > ymin):
            raise ValueError(f"degenerate bounds {self.bounds}")
        lo, hi = self.speed_range
        if not (0 < lo <= hi):
            raise ValueError(f"speed range must satisfy 0 < min <= max, got {self.speed_range}")
        if self.turn_stddev < 0:
            raise ValueError("turn_stddev must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def _reflect(v: float, lo: float, hi: float) -> tuple[float, bool]:
    """Fold ``v`` into [lo, hi]; the flag is set after an odd number of bounces."""
    span = hi - lo
    r = (v - lo) % (2 * span)
    flipped = r > span
    pos = lo + (2 * span - r if flipped else r)
    return min(max(pos, lo), hi), flipped


def generate_object(cfg: GenConfig, index: int) -> list[SamplePoint]:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed, spawn_key=(index,))))
    xmin, ymin, xmax, ymax = cfg.bounds
    x = float(rng.uniform(xmin, xmax))
    y = float(rng.uniform(ymin, ymax))
    heading = float(rng.uniform(0.0, 360.0))
    tid = str(index)
    points = [SamplePoint(tid, 0, 0.0, x, y)]
    for seq in range(1, cfg.samples_per_object):
        heading += float(rng.normal(0.0, cfg.turn_stddev)) if cfg.turn_stddev else 0.0
        speed = float(rng.uniform(*cfg.speed_range))
        rad = math.radians(heading)
        x, flip_x = _reflect(x + speed * math.cos(rad), xmin, xmax)
        y, flip_y = _reflect(y + speed * math.sin(rad), ymin, ymax)
        if flip_x:
            heading = 180.0 - heading
        if flip_y:
            heading = -heading
        heading %= 360.0
        points.append(SamplePoint(tid, seq, float(seq), x, y))
    return points


def generate(cfg: GenConfig) -> list[SamplePoint]:
    return [p for i in range(cfg.n_objects) for p in generate_object(cfg, i)]


def write_csv(points: Iterable[SamplePoint], out: IO[str]) -> None:
    out.write(",".join(HEADER) + "\n")
    for p in points:
        out.write(f"{p.trajectory_id},{p.seq},{p.t!r},{p.x!r},{p.y!r}\n")


def to_csv(points: Iterable[SamplePoint]) -> str:
    buf = io.StringIO()
    write_csv(points, buf)
    return buf.getvalue()
