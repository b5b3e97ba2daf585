import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from trajwh.model import (
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
from trajwh.synthgen import GenConfig, generate
from trajwh.etl import reconstruct_trajectories

coord = st.floats(-1e3, 1e3, allow_nan=False)


def seg(a, b, tid="7", seq=0):
    return Segment.from_points(a, b, tid, seq)


class TestValidateTrajectory:
    def test_shared_junction_ok(self):
        tr = Trajectory("7", [seg((0, 0, 0), (1, 0, 1)), seg((1, 0, 1), (1, 1, 2), seq=1)])
        assert validate_trajectory(tr).ok

    def test_broken_continuity(self):
        tr = Trajectory("7", [seg((0, 0, 0), (1, 0, 1)), seg((2, 0, 1), (2, 1, 2), seq=1)])
        report = validate_trajectory(tr)
        assert not report.ok
        assert report.violations == (1,)

    def test_lists_every_violation(self):
        tr = Trajectory("7", [
            seg((0, 0, 0), (1, 0, 1)),
            seg((2, 0, 1), (2, 1, 2)),
            seg((2, 1, 2), (3, 1, 3)),
            seg((3, 1, 2.5), (4, 1, 5)),
        ])
        assert validate_trajectory(tr).violations == (1, 3)

    def test_generated_trajectories_are_continuous(self):
        pts = generate(GenConfig(seed=3, n_objects=50, samples_per_object=12))
        trajs = reconstruct_trajectories(pts)
        assert len(trajs) == 50
        # direct junction scan
        for tr in trajs:
            for a, b in zip(tr.segments, tr.segments[1:]):
                assert a.end == b.start
        assert all(validate_trajectory(tr).ok for tr in trajs)


class TestSegment:
    def test_equal_timestamps_rejected(self):
        with pytest.raises(ValueError):
            seg((0, 0, 1), (1, 1, 1))

    def test_stationary_has_undefined_angle(self):
        s = seg((2, 2, 0), (2, 2, 5))
        assert s.angle_deg is None and s.direction is None

    @given(coord, coord, coord, coord, st.floats(0, 100), st.floats(0.001, 100))
    def test_undefined_iff_no_displacement(self, xs, ys, xe, ye, t, dt):
        s = Segment(xs, ys, t, xe, ye, t + dt)
        assert (s.angle_deg is None) == (xs == xe and ys == ye)
        if s.angle_deg is not None:
            assert 0 <= s.angle_deg < 360

    def test_interpolation(self):
        s = seg((0, 0, 0), (2, 4, 2))
        assert s.at(1) == (1, 2)
        assert s.at(0) == (0, 0) and s.at(2) == (2, 4)

    def test_sample_point_seq_non_negative(self):
        with pytest.raises(ValueError):
            SamplePoint("1", -1, 0, 0, 0)


class TestDirection:
    def test_tie_break_order(self):
        assert [d.name for d in Direction] == ["N", "NE", "E", "SE", "S", "SW", "W", "NW"]

    @pytest.mark.parametrize("text,expected", [
        ("ne", Direction.NE), ("North", Direction.N), ("south-west", Direction.SW), ("SE", Direction.SE),
    ])
    def test_parse(self, text, expected):
        assert Direction.parse(text) is expected

    def test_parse_unknown(self):
        with pytest.raises(ValueError):
            Direction.parse("up")


class TestGrid:
    def test_invalid_specs(self):
        for args in [(0, 0, 0, 1, 1, 1), (0, 0, 1, -1, 1, 1), (0, 0, 1, 1, 0, 1), (0, 0, 1, 1, 1, 0)]:
            with pytest.raises(ValueError):
                GridSpec(*args)

    def test_half_open_lattice(self):
        # quarter-cell lattice including every border of a 4x3 grid
        g = GridSpec(-2.0, 1.0, 0.5, 2.0, 4, 3)
        for i, j in itertools.product(range(17), range(13)):
            x, y = g.x0 + i * 0.125, g.y0 + j * 0.5
            cell = g.cell_of(x, y)
            owners = [
                c for c in itertools.product(range(g.nx), range(g.ny))
                if _owns(g, c, x, y)
            ]
            assert owners == [tuple(cell)], (x, y)

    def test_outside(self):
        g = GridSpec(0, 0, 1, 1, 2, 2)
        with pytest.raises(ValueError):
            g.cell_of(2.5, 0.5)

    def test_coarsen(self):
        g = GridSpec(0, 0, 1, 1, 8, 8)
        assert g.coarsen(2) == GridSpec(0, 0, 2, 2, 4, 4)
        with pytest.raises(ValueError):
            g.coarsen(3)

    def test_cell_range(self):
        r = CellRange.coerce(CellId(1, 2))
        assert r == CellRange(1, 2, 1, 2)
        assert (1, 2) in r and (2, 2) not in r
        assert len(CellRange(0, 0, 2, 1).cells()) == 6


def _owns(g, cell, x, y):
    """Half-open membership, with the outer max edges folded into the last cell."""
    x0, y0, x1, y1 = g.cell_bounds(cell)
    in_x = x0 <= x < x1 or (cell[0] == g.nx - 1 and x == x1)
    in_y = y0 <= y < y1 or (cell[1] == g.ny - 1 and y == y1)
    return in_x and in_y


class TestIntervalsAndRows:
    def test_interval_must_be_nonempty(self):
        with pytest.raises(ValueError):
            TimeInterval(2, 2)

    def test_intersection(self):
        a = TimeInterval(0, 5)
        assert a.intersect(TimeInterval(3, 9)) == TimeInterval(3, 5)
        assert a.intersect(TimeInterval(5, 9)) is None
        assert not a.overlaps(5, 6)

    def test_fact_row_ratio_range(self):
        with pytest.raises(ValueError):
            FactRow(CellId(0, 0), 0, "1", 0, Direction.N, 1.5, 1.0)
        with pytest.raises(ValueError):
            FactRow(CellId(0, 0), 0, "1", 0, Direction.N, 0.5, -1.0)

    def test_tally(self):
        t = DirectionTally((0, 2, 0, 2, 0, 0, 0, 0), 1)
        assert t.majority() is Direction.NE  # tie goes to the earlier direction
        assert t.total() == 4
        assert DirectionTally().majority() is None
        with pytest.raises(ValueError):
            DirectionTally((0,) * 7)
