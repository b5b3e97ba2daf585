"""Warehouse-vs-oracle comparison shared by several test modules."""

import math
import random

from oracle import brute_measures, raw_segments, region_box

from trajwh.measures import region_aggregate
from trajwh.model import DIRECTIONS, CellRange, TimeInterval


def oracle_for(w, raw, region: CellRange, interval: TimeInterval):
    g = w.grid
    box = region_box((g.x0, g.y0, g.cell_width, g.cell_height), *region)
    return brute_measures(raw_segments(raw), box, interval.t_lo, interval.t_hi, w.bucket_width)


def mismatches(w, raw, region, interval, tol=1e-9):
    """Names of measures where the warehouse disagrees with the oracle."""
    agg = region_aggregate(w, region, interval)
    ref = oracle_for(w, raw, region, interval)
    bad = []
    for d in DIRECTIONS:
        if abs(agg.contributions[d] - ref["contrib"][d.name]) > tol:
            bad.append(f"contrib {d.name}: {agg.contributions[d]} vs {ref['contrib'][d.name]}")
        if agg.segment_counts[d] != ref["seg_count"][d.name]:
            bad.append(f"count {d.name}: {agg.segment_counts[d]} vs {ref['seg_count'][d.name]}")
        if agg.object_counts[d] != ref["obj_count"][d.name]:
            bad.append(f"objects {d.name}")
    if agg.segment_counts.undefined != ref["seg_count"][None]:
        bad.append("undefined count")
    if agg.presence_distinct != ref["presence"]:
        bad.append(f"presence {agg.presence_distinct} vs {ref['presence']}")
    if agg.presence_sum != ref["presence_sum"]:
        bad.append(f"presence_sum {agg.presence_sum} vs {ref['presence_sum']}")
    return bad


def random_queries(w, n, seed, max_span=3):
    """Random (cell range, interval) pairs; about a third are bucket-aligned."""
    rng = random.Random(seed)
    lo_t, hi_t = w.time_range()
    out = []
    for i in range(n):
        ix, iy = rng.randrange(w.grid.nx), rng.randrange(w.grid.ny)
        if i % 4 == 3:
            region = CellRange(ix, iy, min(ix + rng.randrange(max_span), w.grid.nx - 1),
                               min(iy + rng.randrange(max_span), w.grid.ny - 1))
        else:
            region = CellRange(ix, iy, ix, iy)
        if i % 3 == 0:
            first = int(lo_t // w.bucket_width)
            b0 = rng.randrange(first, max(first + 1, math.ceil(hi_t / w.bucket_width)))
            interval = TimeInterval(b0 * w.bucket_width, (b0 + rng.randint(1, 4)) * w.bucket_width)
        else:
            a = rng.uniform(lo_t - 1, hi_t - 0.5)
            # may start before the data but must reach into it
            end = max(a + rng.uniform(0.3, (hi_t - lo_t) / 2), lo_t + 0.1)
            interval = TimeInterval(a, end)
        out.append((region, interval))
    return out
