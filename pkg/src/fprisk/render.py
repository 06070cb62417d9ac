"""Image output: binary PPM heatmaps and risk-coloured paths, plus PNG figures.

Images have one pixel per grid cell with north up, so row 0 of an image
is the last grid row.
"""

from __future__ import annotations

import logging
import math
import os
from typing import Mapping, Sequence

import numpy as np
from numpy.typing import NDArray

from .geometry import GridSpec, ScalarField
from .io import atomic_write_bytes

logger = logging.getLogger(__name__)

BACKGROUND = (255, 255, 255)
OBSTACLE = (200, 200, 200)
MISSING = (128, 128, 128)
LOG_RANGE = (-5.0, 0.0)


def ppm_bytes(rgb: NDArray) -> bytes:
    """Encode an (H, W, 3) uint8 array as binary PPM (P6)."""
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError("expected an (H, W, 3) array")
    h, w, _ = rgb.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + rgb.tobytes()


def write_ppm(dest: str | os.PathLike, rgb: NDArray):
    atomic_write_bytes(dest, ppm_bytes(rgb))


def read_ppm(data: bytes) -> NDArray:
    """Decode the P6 files written by :func:`ppm_bytes`."""
    magic, dims, maxval, body = data.split(b"\n", 3)
    if magic != b"P6" or maxval != b"255":
        raise ValueError("not an 8-bit P6 image")
    w, h = map(int, dims.split())
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3)


def ramp(t: NDArray) -> NDArray:
    """Blue (t=0) to red (t=1), shape (..., 3) uint8."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    rgb = np.stack([255 * t, np.zeros_like(t), 255 * (1 - t)], axis=-1)
    return np.rint(rgb).astype(np.uint8)


def risk_color(f_d: float) -> tuple[int, int, int]:
    lo, hi = LOG_RANGE
    v = math.log10(f_d) if f_d > 0 else lo
    t = (min(max(v, lo), hi) - lo) / (hi - lo)
    return tuple(int(c) for c in ramp(t))


def _to_image(arr: NDArray) -> NDArray:
    return arr[::-1]


def heatmap(field: ScalarField) -> NDArray:
    """Linear heatmap scaled to the field maximum; zero fields are uniform blue."""
    v = field.samples
    peak = float(v.max()) if v.size else 0.0
    t = v / peak if peak > 0 else np.zeros_like(v)
    return _to_image(ramp(t))


def _stamp(rgb_grid: NDArray, spec: GridSpec, xy: NDArray, color):
    """Colour the cells under a densely sampled polyline (grid orientation)."""
    if len(xy) == 0:
        return
    seg = np.diff(xy, axis=0)
    n = np.maximum(1, np.ceil(np.hypot(seg[:, 0], seg[:, 1]) / (0.5 * spec.resolution))).astype(int)
    pts = [xy[:1]]
    for a, d, k in zip(xy[:-1], seg, n):
        pts.append(a + np.arange(1, k + 1)[:, None] / k * d)
    pts = np.vstack(pts)
    u, v = spec.to_index(pts[:, 0], pts[:, 1])
    cols, rows = np.rint(u).astype(int), np.rint(v).astype(int)
    ok = (rows >= 0) & (rows < spec.height) & (cols >= 0) & (cols < spec.width)
    rgb_grid[rows[ok], cols[ok]] = color


def paths_image(spec: GridSpec, paths: Sequence, risks: Mapping[str, float],
                obstacle_mask: NDArray | None = None) -> tuple[NDArray, list[str]]:
    """Draw path centrelines coloured by log10 risk; returns (image, missing ids).

    Paths without a risk value are drawn grey underneath the others; the
    riskiest paths are drawn last so they stay visible.
    """
    img = np.empty(spec.shape + (3,), dtype=np.uint8)
    img[:] = BACKGROUND
    if obstacle_mask is not None:
        img[obstacle_mask] = OBSTACLE
    missing = [p.id for p in paths if p.id not in risks]
    for p in paths:
        if p.id not in risks:
            _stamp(img, spec, p.poses[:, :2], MISSING)
    known = sorted((p for p in paths if p.id in risks), key=lambda p: (risks[p.id], p.id))
    for p in known:
        _stamp(img, spec, p.poses[:, :2], risk_color(risks[p.id]))
    if missing:
        logger.warning("no risk value for %d path(s): %s", len(missing), ", ".join(missing))
    return _to_image(img), missing


def obstacle_mask(scenario, spec: GridSpec) -> NDArray:
    from .geometry import rasterize_polygon

    mask = np.zeros(spec.shape, dtype=bool)
    for obs in scenario.obstacles:
        pose = (float(obs.density.mean[0]), float(obs.density.mean[1]), 0.0)
        mask |= rasterize_polygon(obs.shape, pose, spec).samples != 0
    return mask


# ---------------------------------------------------------------------------
# matplotlib figures


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _savefig(fig, dest):
    import io

    buf = io.BytesIO()
    # no software tag or timestamp, so reruns are byte-identical
    fig.savefig(buf, format="png", dpi=120, metadata={"Software": None})
    atomic_write_bytes(dest, buf.getvalue())


def risk_map_figure(dest, g: ScalarField, paths: Sequence, risks: Mapping[str, float]):
    """G as a background image with paths coloured on the log-risk scale."""
    plt = _pyplot()
    from matplotlib.colors import LinearSegmentedColormap, Normalize

    cmap = LinearSegmentedColormap.from_list("risk", [(0, 0, 1), (1, 0, 0)])
    norm = Normalize(*LOG_RANGE)
    fig, ax = plt.subplots(figsize=(8, 6))
    x0, y0, x1, y1 = g.spec.extent
    ax.imshow(g.samples, origin="lower", extent=(x0, x1, y0, y1), cmap="Greys")
    order = sorted(paths, key=lambda p: (risks.get(p.id, -1.0), p.id))
    for p in order:
        f = risks.get(p.id)
        if f is None:
            color = "0.5"
        else:
            color = cmap(norm(min(max(math.log10(f) if f > 0 else LOG_RANGE[0], LOG_RANGE[0]),
                                  LOG_RANGE[1])))
        ax.plot(p.poses[:, 0], p.poses[:, 1], color=color, linewidth=0.8)
    sm = plt.cm.ScalarMappable(norm=norm, cmap=cmap)
    fig.colorbar(sm, ax=ax, label="log10 F_D")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal")
    fig.tight_layout()
    _savefig(fig, dest)
    plt.close(fig)


def histogram_figure(dest, f_d: Sequence[float], p_exact: Sequence[float] | None = None):
    """Distribution of log10 F_D, and of the F_D / P_D ratio when exact values exist."""
    plt = _pyplot()
    f = np.asarray(f_d, dtype=float)
    ncols = 2 if p_exact is not None else 1
    fig, axes = plt.subplots(1, ncols, figsize=(5 * ncols, 4), squeeze=False)
    ax = axes[0, 0]
    ax.hist(np.log10(np.clip(f, 1e-12, None)), bins=40, color="tab:blue")
    ax.set_xlabel("log10 F_D")
    ax.set_ylabel("paths")
    if p_exact is not None:
        p = np.asarray(p_exact, dtype=float)
        keep = p >= 1e-3
        ax = axes[0, 1]
        if keep.any():
            ax.hist(f[keep] / p[keep], bins=40, color="tab:red")
        ax.set_xlabel("F_D / P_D (P_D >= 1e-3)")
    fig.tight_layout()
    _savefig(fig, dest)
    plt.close(fig)
