import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from trajwh.etl import EtlConfig, load_csv, load_trajectories  # noqa: E402
from trajwh.model import GridSpec, Segment, Trajectory  # noqa: E402
from trajwh.synthgen import GenConfig, generate, to_csv  # noqa: E402

# Four single-segment trajectories inside one 10x10 cell: three heading NE, one SW.
EXAMPLE1_SEGMENTS = {
    "1": ((1.0, 1.0, 0.0), (3.0, 2.0, 1.0)),
    "2": ((2.0, 1.0, 0.0), (4.0, 4.0, 1.0)),
    "3": ((1.0, 3.0, 0.0), (2.0, 5.0, 1.0)),
    "4": ((5.0, 5.0, 0.0), (3.0, 2.0, 1.0)),
}

# One trajectory of three segments; timestamps equal x so the time window
# [1.8, 3.8] reproduces the printed interpolation points.
EXAMPLE2_CSV = "id,seq,t,x,y\n1,0,1.5,1.5,1.5\n1,1,2,2,2\n1,2,3.6,3.6,1.5\n1,3,4.5,4.5,2\n"

ONE_CELL = GridSpec(0.0, 0.0, 10.0, 10.0, 1, 1)

SEEDED_GRID = GridSpec(0.0, 0.0, 125.0, 125.0, 8, 8)
SEEDED_BUCKET = 3.0


@pytest.fixture
def example1_wh():
    trajs = [Trajectory(tid, [Segment.from_points(a, b, tid, 0)]) for tid, (a, b) in EXAMPLE1_SEGMENTS.items()]
    return load_trajectories(trajs, EtlConfig(ONE_CELL, 1.0))


@pytest.fixture
def example2_wh():
    return load_csv(EXAMPLE2_CSV, EtlConfig(ONE_CELL, 1.0))


def seeded_points(seed=7, n_objects=100, samples=20, turn=25.0):
    cfg = GenConfig(seed=seed, n_objects=n_objects, samples_per_object=samples,
                    bounds=(0.0, 0.0, 1000.0, 1000.0), speed_range=(20.0, 90.0), turn_stddev=turn)
    return generate(cfg)


def seeded_warehouse(seed=7, n_objects=100, samples=20, grid=SEEDED_GRID, bucket=SEEDED_BUCKET):
    pts = seeded_points(seed, n_objects, samples)
    w = load_csv(to_csv(pts), EtlConfig(grid, bucket))
    raw = [(p.trajectory_id, p.seq, p.t, p.x, p.y) for p in pts]
    return w, raw


@pytest.fixture(scope="session")
def seeded():
    return seeded_warehouse()


# One line per acceptance criterion, replayed in the terminal summary so the
# verdicts show up even when output capture is on.
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
