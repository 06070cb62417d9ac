"""Timing harness: FPR against the exact per-obstacle baseline as K grows.

Every K uses the same workspace, grid and candidate paths, so only the
obstacle count changes between rows. Swept areas are rasterised once per
path outside the timed region because both methods consume them.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass
from typing import Sequence

from .fields import DEFAULT_SIGMA_CELLS
from .geometry import DEFAULT_RESOLUTION, GridSpec, swept_indicator
from .io import csv_text
from .paths import generate_paths
from .risk import ExactEvaluator, fpr_bound, precompute_fields
from .scenario import RANDOM_STD, random_scenario

BENCH_SIDE = 80.0
BENCH_HEADER = ("K", "N", "method", "precompute_ms", "per_path_ms")


@dataclass(frozen=True)
class BenchRow:
    k: int
    n: int
    method: str
    precompute_ms: float
    per_path_ms: float


def _ms(t0: float) -> float:
    return (time.perf_counter() - t0) * 1e3


def run_bench(k_list: Sequence[int], n_list: Sequence[int], repeats: int = 3, seed: int = 0,
              sigma_cells: float = DEFAULT_SIGMA_CELLS, resolution: float = DEFAULT_RESOLUTION,
              side: float = BENCH_SIDE, std: float = RANDOM_STD) -> list[BenchRow]:
    """Median precompute and per-path times for every (K, N, method)."""
    if not k_list or not n_list:
        raise ValueError("k_list and n_list must be non-empty")
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    pad = 10.0
    spec = GridSpec.covering((-pad, -pad, side + pad, side + pad), resolution)
    probe = random_scenario(1, std, seed, side=side)
    all_paths = generate_paths(probe.start, probe.goal, max(n_list), seed=seed)
    swept = [swept_indicator(p, probe.robot, spec) for p in all_paths]

    rows = []
    for k in k_list:
        scene = random_scenario(k, std, seed, side=side)
        for n in n_list:
            areas = swept[:n]
            fpr_pre, fpr_path, ex_pre, ex_path = [], [], [], []
            # untimed warm-up so the first K does not pay for cold caches
            fpr_bound(areas[0], precompute_fields(scene.obstacles[:1], spec, sigma_cells))
            for _ in range(repeats):
                t0 = time.perf_counter()
                rf = precompute_fields(scene.obstacles, spec, sigma_cells)
                fpr_pre.append(_ms(t0))
                t0 = time.perf_counter()
                for a in areas:
                    fpr_bound(a, rf)
                fpr_path.append(_ms(t0) / len(areas))

                t0 = time.perf_counter()
                exact = ExactEvaluator(scene.obstacles, spec)
                ex_pre.append(_ms(t0))
                t0 = time.perf_counter()
                for a in areas:
                    exact.per_obstacle(a)
                ex_path.append(_ms(t0) / len(areas))
            rows.append(BenchRow(k, len(areas), "fpr", statistics.median(fpr_pre),
                                 statistics.median(fpr_path)))
            rows.append(BenchRow(k, len(areas), "exact", statistics.median(ex_pre),
                                 statistics.median(ex_path)))
    return rows


def bench_csv(rows: Sequence[BenchRow]) -> str:
    return csv_text(BENCH_HEADER, [(r.k, r.n, r.method, r.precompute_ms, r.per_path_ms)
                                   for r in rows])
