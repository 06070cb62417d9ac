"""Monte-Carlo ground truth for collision probabilities.

Obstacle locations are drawn from their densities and each draw is tested
against the footprint polygons along the path with the separating-axis
theorem. Random streams come from :class:`numpy.random.SeedSequence`
(PCG64), one stream per obstacle index, spawned from ``(seed, index)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import InvalidInputError, UnsupportedShapeError
from .geometry import Polygon

DEFAULT_SAMPLES = 100_000
_CHUNK = 4096
_BATCH = 64


@dataclass(frozen=True)
class McEstimate:
    p_hat: float
    stderr: float
    n_samples: int
    seed: object

    @classmethod
    def from_hits(cls, hits: NDArray, seed) -> "McEstimate":
        n = len(hits)
        p = float(np.count_nonzero(hits)) / n
        return cls(p, float(np.sqrt(p * (1 - p) / n)), n, seed)


def _rng(seed, index: int) -> np.random.Generator:
    entropy = list(seed) if isinstance(seed, (tuple, list)) else [int(seed)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy + [index])))


def sample_locations(density, n: int, rng: np.random.Generator) -> NDArray:
    """Draw ``n`` obstacle locations, shape (n, 2)."""
    if density.kind == "gaussian":
        cov = density.cov
        if np.all(cov == 0):
            return np.broadcast_to(density.mean, (n, 2)).copy()
        # eigen-factor handles singular axis-aligned covariances too
        w, v = np.linalg.eigh(cov)
        factor = v * np.sqrt(np.clip(w, 0, None))
        return density.mean + rng.standard_normal((n, 2)) @ factor.T
    grid = density.grid
    weights = grid.samples.ravel()
    cells = rng.choice(len(weights), size=n, p=weights / weights.sum())
    rows, cols = np.divmod(cells, grid.spec.width)
    h = grid.spec.resolution
    jitter = rng.uniform(-0.5, 0.5, size=(n, 2)) * h
    return np.column_stack([grid.spec.xs()[cols], grid.spec.ys()[rows]]) + jitter


def _unique_normals(verts: NDArray) -> NDArray:
    """Edge normals of a convex polygon with parallel duplicates removed."""
    e = np.roll(verts, -1, axis=0) - verts
    n = np.column_stack([e[:, 1], -e[:, 0]])
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    keep: list[NDArray] = []
    for cand in n:
        if not any(abs(cand[0] * k[1] - cand[1] * k[0]) < 1e-12 for k in keep):
            keep.append(cand)
    return np.array(keep)


def _require_convex(shape: Polygon, what: str):
    if not shape.is_convex():
        raise UnsupportedShapeError(f"the Monte-Carlo oracle needs a convex {what}")


class _SweptSat:
    """Separating-axis tests of a translated convex body against many footprints.

    For each footprint and candidate axis, B + r overlaps the footprint along
    that axis iff ``axis . r`` falls in a slab; a collision needs every slab.
    """

    def __init__(self, polys: NDArray, shape: Polygon):
        polys = np.asarray(polys, dtype=float)
        if polys.ndim == 2:
            polys = polys[None]
        self.polys = polys
        b = shape.vertices
        b_normals = _unique_normals(b)
        f_normals = np.stack([_unique_normals(p) for p in polys])  # (P, m, 2)
        axes = np.concatenate(
            [f_normals, np.broadcast_to(b_normals, (len(polys),) + b_normals.shape)], axis=1)
        proj_f = np.einsum("pak,pvk->pav", axes, polys)
        proj_b = np.einsum("pak,vk->pav", axes, b)
        self.axes = axes
        self.lo = proj_f.min(axis=2) - proj_b.max(axis=2)
        self.hi = proj_f.max(axis=2) - proj_b.min(axis=2)
        # bounding boxes of the configuration obstacles, for the broad phase
        self.box_lo = polys.min(axis=1) - b.max(axis=0)
        self.box_hi = polys.max(axis=1) - b.min(axis=0)

    def hits(self, r: NDArray) -> NDArray:
        n = len(r)
        out = np.zeros(n, dtype=bool)
        order = np.argsort(r[:, 0], kind="stable")
        rs = r[order]
        for start in range(0, n, _CHUNK):
            pts = rs[start:start + _CHUNK]
            lo, hi = pts.min(axis=0), pts.max(axis=0)
            near = np.flatnonzero(np.all(self.box_lo <= hi, axis=1)
                                  & np.all(self.box_hi >= lo, axis=1))
            if len(near) == 0:
                continue
            hit = np.zeros(len(pts), dtype=bool)
            for b0 in range(0, len(near), _BATCH):
                sel = near[b0:b0 + _BATCH]
                todo = np.flatnonzero(~hit)
                if len(todo) == 0:
                    break
                q = pts[todo]
                proj = np.einsum("pak,sk->psa", self.axes[sel], q)
                inside = np.all((proj >= self.lo[sel][:, None, :])
                                & (proj <= self.hi[sel][:, None, :]), axis=2)
                hit[todo] |= inside.any(axis=0)
            out[order[start:start + _CHUNK]] = hit
        return out


def _obstacle_hits(polys, obs, n, rng) -> NDArray:
    _require_convex(obs.shape, f"obstacle ({obs.id})")
    return _SweptSat(polys, obs.shape).hits(sample_locations(obs.density, n, rng))


def _check_inputs(polys, n: int):
    if n < 1000:
        raise InvalidInputError("use at least 1000 Monte-Carlo samples")
    polys = np.asarray(polys, dtype=float)
    if polys.ndim == 2:
        polys = polys[None]
    for p in polys[:1]:
        _require_convex(Polygon(p), "robot footprint")
    return polys


def mc_single(swept_polys, obs, n: int = DEFAULT_SAMPLES, seed=0) -> McEstimate:
    """Collision frequency of one obstacle with the posed footprints."""
    polys = _check_inputs(swept_polys, n)
    return McEstimate.from_hits(_obstacle_hits(polys, obs, n, _rng(seed, 0)), seed)


def mc_total(swept_polys, obstacles: Sequence, n: int = DEFAULT_SAMPLES, seed=0) -> McEstimate:
    """Frequency of colliding with at least one of independently placed obstacles."""
    polys = _check_inputs(swept_polys, n)
    any_hit = np.zeros(n, dtype=bool)
    for k, obs in enumerate(obstacles):
        any_hit |= _obstacle_hits(polys, obs, n, _rng(seed, k))
    return McEstimate.from_hits(any_hit, seed)
