"""Collision-risk bounds over precomputed obstacle fields, plus exact baselines.

The bound for a swept area A is

    F_D = integral(ridge(A) * dG) + integral(I_A * G)

with the obstacle-only fields

    G  = sum_k I_Bk * p_k / area(B_k)
    dG = 1/2 sum_k ridge(B_k) * p_k

so that G and dG are built once and every path costs the same regardless of
the number of obstacles.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.signal import fftconvolve

from .errors import FprError, InvalidInputError, PointObstacleError
from .fields import (DEFAULT_SIGMA_CELLS, LocationDensity, _truncation_warnings,
                     accumulate_density, aligned_copy, kernel_radius, ridge_array)
from .geometry import (GridSpec, Polygon, Pose2, ScalarField, _origin_index, _require_indicator,
                       crop, minkowski_dilate, obstacle_kernel, polygon_area, posed_footprints,
                       rasterize_polygon, swept_indicator)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Obstacle:
    """Tethered obstacle: body-frame shape plus a density for its location."""

    shape: Polygon
    density: LocationDensity
    id: str = ""


@dataclass(frozen=True, eq=False)
class RiskFields:
    g: ScalarField
    dg_sigma: ScalarField
    sigma_cells: float
    k_count: int
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        # aligned copies once, so per-path windows are views at fixed offsets
        object.__setattr__(self, "_dg32", aligned_copy(self.dg_sigma.samples, np.float32))
        object.__setattr__(self, "_g64", aligned_copy(self.g.samples))

    @property
    def spec(self) -> GridSpec:
        return self.g.spec


@dataclass
class RiskReport:
    """Per-path risk figures; ``f_d`` is an expected-count bound and may exceed 1."""

    path_id: str
    f_d: float = math.nan
    p_d_exact: float | None = None
    p_d_bar: float | None = None
    p_d_mc: float | None = None
    mc_stderr: float | None = None
    precompute_ms: float = 0.0
    eval_ms: float = 0.0
    status: str = "ok"
    error: str | None = None

    @property
    def f_d_clamped(self) -> float:
        return min(max(self.f_d, 0.0), 1.0)

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def _body_window(shape: Polygon, spec: GridSpec, pad_cells: int) -> GridSpec:
    """Grid on ``spec``'s lattice covering the shape around the body origin."""
    h = spec.resolution
    (xmin, ymin), (xmax, ymax) = shape.vertices.min(axis=0), shape.vertices.max(axis=0)
    c0 = math.floor((xmin - spec.origin[0]) / h) - pad_cells
    c1 = math.ceil((xmax - spec.origin[0]) / h) + pad_cells
    r0 = math.floor((ymin - spec.origin[1]) / h) - pad_cells
    r1 = math.ceil((ymax - spec.origin[1]) / h) + pad_cells
    return spec.with_window(r0, c0, r1 - r0 + 1, c1 - c0 + 1)


def _check_finite_obstacle(obs: Obstacle, spec: GridSpec):
    if polygon_area(obs.shape) < spec.cell_area:
        raise PointObstacleError(
            f"obstacle {obs.id!r} is smaller than one grid cell; use point_bound for it")


def precompute_fields(obstacles: Sequence[Obstacle], spec: GridSpec,
                      sigma_cells: float = DEFAULT_SIGMA_CELLS) -> RiskFields:
    """Build the path-independent fields G and dG.

    Each obstacle is rasterised in its body frame on a window of the scene
    lattice, convolved with its location density and accumulated in input
    order. ``1 / area(B_k)`` uses the rasterised cell count so that a fully
    covered obstacle contributes exactly one expected collision.
    """
    if len(obstacles) == 0:
        raise InvalidInputError("need at least one obstacle")
    h = spec.resolution
    g = np.zeros(spec.shape)
    dg = np.zeros(spec.shape)
    warnings: list[str] = []
    pad = kernel_radius(sigma_cells) + 1
    for obs in obstacles:
        _check_finite_obstacle(obs, spec)
        local = _body_window(obs.shape, spec, pad)
        ind = rasterize_polygon(obs.shape, Pose2(0.0, 0.0, 0.0), local).samples
        count = float(ind.sum())
        if count == 0:
            raise PointObstacleError(f"obstacle {obs.id!r} covers no cell center")
        lam = 1.0 / (count * spec.cell_area)
        edge = ridge_array(ind, sigma_cells, h)
        kept = accumulate_density(ind, local, obs.density, g, spec, lam)
        accumulate_density(edge, local, obs.density, dg, spec, 0.5)
        warnings.extend(f"{obs.id}: {w}" for w in _truncation_warnings(kept))
    return RiskFields(ScalarField(spec, g), ScalarField(spec, dg), float(sigma_cells),
                      len(obstacles), tuple(warnings))


def _support_box(ind: np.ndarray):
    """Row/column bounds of the non-zero cells of a non-negative array."""
    rows = np.flatnonzero(ind.max(axis=1) > 0)
    if len(rows) == 0:
        return None
    cols = np.flatnonzero(ind[rows[0]:rows[-1] + 1].max(axis=0) > 0)
    return rows[0], rows[-1] + 1, cols[0], cols[-1] + 1


def _field_window(arr: np.ndarray, r0: int, c0: int, hh: int, ww: int) -> np.ndarray:
    """Crop of an aligned field; padded crops are fresh arrays and get realigned."""
    out = crop(arr, r0, c0, hh, ww)
    return out if np.shares_memory(out, arr) else aligned_copy(out, arr.dtype)


def fpr_bound(swept: ScalarField, rf: RiskFields) -> float:
    """Upper bound F_D on the expected number of collisions along a path.

    Only a box around the swept area, padded by the 4 sigma kernel radius, is
    visited; the ridge outside that box is exactly zero.
    """
    if swept.spec != rf.spec:
        raise InvalidInputError("swept area and risk fields live on different grids")
    ind = swept.samples
    box = _support_box(ind) if swept.support is None else swept.support
    if box is None or box[0] >= box[1] or box[2] >= box[3]:
        return 0.0
    pad = kernel_radius(rf.sigma_cells)
    r0, r1, c0, c1 = box
    r0, c0 = r0 - pad, c0 - pad
    hh, ww = r1 - r0 + pad, c1 - c0 + pad
    window = aligned_copy(crop(ind, r0, c0, hh, ww))
    edge = aligned_copy(ridge_array(window, rf.sigma_cells, swept.spec.resolution,
                                    dtype=np.float32), np.float32)
    # products in single precision, sums accumulated in double
    contour = float(np.einsum("ij,ij->", edge, _field_window(rf._dg32, r0, c0, hh, ww),
                              dtype=np.float64))
    interior = float(np.einsum("ij,ij->", window, _field_window(rf._g64, r0, c0, hh, ww)))
    return (contour + interior) * swept.spec.cell_area


def point_field(densities: Sequence[LocationDensity], spec: GridSpec) -> ScalarField:
    """G for point obstacles: the plain sum of their rasterised densities."""
    g = np.zeros(spec.shape)
    warnings: list[str] = []
    for p in densities:
        f = p.rasterize(spec)
        g += f.samples
        warnings.extend(f.warnings)
    return ScalarField(spec, g, tuple(warnings))


def point_bound(points: Sequence[LocationDensity], swept: ScalarField) -> float:
    """Linear bound sum_k P_D(k) for point obstacles, as one integral over A."""
    _require_indicator(swept, "swept area")
    g = point_field(points, swept.spec)
    mask = swept.samples != 0
    return float(g.samples[mask].sum()) * swept.spec.cell_area


def laugier_exact(swept: ScalarField, obs: Obstacle) -> float:
    """Exact probability that one obstacle meets the swept area.

    The swept area is dilated by the reflected obstacle, using conservative
    rasterisation of the shape so the grid sum matches the continuous
    Minkowski sum, and the location density is integrated over the result.
    """
    _require_indicator(swept, "swept area")
    kernel = obstacle_kernel(obs.shape.reflected(), swept.spec.resolution, conservative=True)
    dilated = minkowski_dilate(swept, kernel)
    p = obs.density.rasterize(swept.spec)
    mask = dilated.samples != 0
    value = float(p.samples[mask].sum()) * swept.spec.cell_area
    return min(max(value, 0.0), 1.0)


class ExactEvaluator:
    """Per-obstacle exact probabilities, restricted to each density's support.

    Kernels and rasterised densities are prepared once; every call still
    performs one Minkowski dilation and one integral per obstacle.
    """

    def __init__(self, obstacles: Sequence[Obstacle], spec: GridSpec):
        self.spec = spec
        self.items = []
        self.warnings: list[str] = []
        h = spec.resolution
        for obs in obstacles:
            kern = obstacle_kernel(obs.shape.reflected(), h, conservative=True)
            cj, ci = _origin_index(kern.spec)
            row0, col0, patch = obs.density.sample_patch(h, spec.origin)
            total = patch.sum()
            # clip the density window to the grid
            r0, c0 = max(row0, 0), max(col0, 0)
            r1 = min(row0 + patch.shape[0], spec.height)
            c1 = min(col0 + patch.shape[1], spec.width)
            if r0 >= r1 or c0 >= c1:
                self.items.append(None)
                self.warnings.append(f"{obs.id}: density lies entirely outside the grid")
                continue
            patch = patch[r0 - row0:r1 - row0, c0 - col0:c1 - col0]
            self.warnings.extend(f"{obs.id}: {w}" for w in _truncation_warnings(patch.sum() / total))
            self.items.append((kern.samples, cj, ci, r0, c0, patch))

    def per_obstacle(self, swept: ScalarField) -> list[float]:
        if swept.spec != self.spec:
            raise InvalidInputError("swept area lives on a different grid")
        ind = swept.samples
        area = self.spec.cell_area
        out = []
        for item in self.items:
            if item is None:
                out.append(0.0)
                continue
            kern, cj, ci, r0, c0, patch = item
            kh, kw = kern.shape
            ph, pw = patch.shape
            window = crop(ind, r0 + cj - (kh - 1), c0 + ci - (kw - 1), ph + kh - 1, pw + kw - 1)
            dilated = fftconvolve(window, kern, mode="valid") > 0.5
            value = float(patch[dilated].sum()) * area
            out.append(min(max(value, 0.0), 1.0))
        return out


def exact_total(per_obstacle: Sequence[float]) -> tuple[float, float]:
    """Combine independent per-obstacle probabilities.

    Returns ``(1 - prod(1 - p_k), sum(p_k))``.
    """
    p = np.asarray(per_obstacle, dtype=float)
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise InvalidInputError("per-obstacle probabilities must lie in [0, 1]")
    if len(p) == 0:
        return 0.0, 0.0
    p_d = max(float(-np.expm1(np.sum(np.log1p(-p)))), 0.0) if np.all(p < 1) else 1.0
    p_bar = float(p.sum())
    return min(p_d, p_bar, 1.0), p_bar


@dataclass
class EvalOptions:
    sigma_cells: float = DEFAULT_SIGMA_CELLS
    exact: bool = False
    mc: bool = False
    samples: int = 100_000
    seed: int = 0


def split_obstacles(obstacles: Sequence[Obstacle], spec: GridSpec):
    """Partition into finite obstacles and sub-cell point obstacles."""
    finite, points = [], []
    for obs in obstacles:
        (points if polygon_area(obs.shape) < spec.cell_area else finite).append(obs)
    return finite, points


def evaluate_paths(scenario, paths: Sequence, options: EvalOptions | None = None,
                   spec: GridSpec | None = None) -> list[RiskReport]:
    """Bound (and optionally compute exactly) the collision risk of each path.

    The obstacle fields are built once. A path that fails is reported with
    ``status="error"`` and does not stop the batch.
    """
    from .oracle import mc_total  # local import keeps the oracle optional

    options = options or EvalOptions()
    spec = spec or scenario.resolve_grid(paths, options.sigma_cells)
    finite, points = split_obstacles(scenario.obstacles, spec)

    t0 = time.perf_counter()
    rf = precompute_fields(finite, spec, options.sigma_cells) if finite else None
    g_pt = point_field([o.density for o in points], spec) if points else None
    precompute_ms = (time.perf_counter() - t0) * 1e3
    exact = ExactEvaluator(scenario.obstacles, spec) if options.exact else None

    reports = []
    for index, path in enumerate(paths):
        report = RiskReport(str(path.id), precompute_ms=precompute_ms)
        try:
            swept = swept_indicator(path, scenario.robot, spec)
            t1 = time.perf_counter()
            f_d = fpr_bound(swept, rf) if rf is not None else 0.0
            if g_pt is not None:
                f_d += float(g_pt.samples[swept.samples != 0].sum()) * spec.cell_area
            report.eval_ms = (time.perf_counter() - t1) * 1e3
            report.f_d = f_d
            if exact is not None:
                report.p_d_exact, report.p_d_bar = exact_total(exact.per_obstacle(swept))
            if options.mc and scenario.obstacles:
                polys = posed_footprints(path, scenario.robot, spec.resolution)
                est = mc_total(polys, scenario.obstacles, options.samples,
                               seed=(options.seed, index))
                report.p_d_mc, report.mc_stderr = est.p_hat, est.stderr
        except FprError as exc:
            logger.error("path %s failed: %s", path.id, exc)
            report.status, report.error = "error", str(exc)
        reports.append(report)
    return reports
