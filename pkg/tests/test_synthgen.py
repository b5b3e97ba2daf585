from concurrent.futures import ThreadPoolExecutor

import pytest

from trajwh.etl import reconstruct_trajectories
from trajwh.synthgen import GenConfig, _reflect, generate, generate_object, to_csv


def test_minimal():
    pts = generate(GenConfig(seed=1, n_objects=1, samples_per_object=2))
    assert len(pts) == 2
    assert sum(len(t) for t in reconstruct_trajectories(pts)) == 1


def test_same_seed_same_bytes():
    cfg = GenConfig(seed=123, n_objects=20, samples_per_object=10)
    assert to_csv(generate(cfg)) == to_csv(generate(cfg))
    assert to_csv(generate(cfg)) != to_csv(generate(GenConfig(seed=124, n_objects=20, samples_per_object=10)))


def test_parallel_matches_sequential():
    cfg = GenConfig(seed=9, n_objects=16, samples_per_object=20)
    with ThreadPoolExecutor(4) as pool:
        parts = list(pool.map(lambda i: generate_object(cfg, i), reversed(range(cfg.n_objects))))
    assert [p for part in reversed(parts) for p in part] == generate(cfg)


def test_objects_independent_of_count():
    small = generate(GenConfig(seed=4, n_objects=3, samples_per_object=8))
    big = generate(GenConfig(seed=4, n_objects=10, samples_per_object=8))
    assert big[: len(small)] == small


def test_full_scale_validation():
    cfg = GenConfig(seed=42, n_objects=1000, samples_per_object=50)
    pts = generate(cfg)
    assert len(pts) == 50_000
    xmin, ymin, xmax, ymax = cfg.bounds
    assert all(xmin <= p.x <= xmax and ymin <= p.y <= ymax for p in pts)
    last = {}
    for p in pts:
        if p.trajectory_id in last:
            assert p.t > last[p.trajectory_id]
        last[p.trajectory_id] = p.t


def test_small_turn_noise_skews_directions():
    pts = generate(GenConfig(seed=2, n_objects=1, samples_per_object=30, turn_stddev=0.0,
                             bounds=(0, 0, 1e6, 1e6), speed_range=(1, 1)))
    dirs = {s.direction for t in reconstruct_trajectories(pts) for s in t.segments}
    assert len(dirs) == 1


@pytest.mark.parametrize("v,expected", [(5, (5, False)), (-1, (1, True)), (12, (8, True)), (21, (1, False)), (-11, (9, False))])
def test_reflect(v, expected):
    assert _reflect(v, 0, 10) == expected


@pytest.mark.parametrize("kwargs", [
    {"n_objects": 0}, {"samples_per_object": 1}, {"bounds": (0, 0, 0, 5)},
    {"speed_range": (0, 1)}, {"speed_range": (3, 1)}, {"turn_stddev": -1}, {"seed": -1},
])
def test_invalid_config(kwargs):
    with pytest.raises(ValueError):
        GenConfig(**kwargs)
