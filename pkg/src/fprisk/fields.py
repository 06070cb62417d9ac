"""Gaussian kernels, convolutions, boundary ridges and grid integration."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import cv2
import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.ndimage import correlate1d
from scipy.signal import fftconvolve

from .errors import InvalidInputError
from .geometry import GridSpec, ScalarField, _require_indicator, place

logger = logging.getLogger(__name__)

DEFAULT_SIGMA_CELLS = 2.0
TRUNCATION_WARN = 1e-3
# densities are sampled out to this many standard deviations per axis
DENSITY_SUPPORT_STDS = 4.0


@dataclass(frozen=True, eq=False)
class Kernel1D:
    """Symmetric 1D filter taps centered on the middle element."""

    taps: NDArray
    sigma_cells: float

    @property
    def radius(self) -> int:
        return len(self.taps) // 2


def kernel_radius(sigma_cells: float) -> int:
    return int(math.ceil(4 * sigma_cells))


def gaussian_kernel(sigma_cells: float = DEFAULT_SIGMA_CELLS) -> Kernel1D:
    """Sampled Gaussian truncated at 4 sigma and renormalised to unit sum."""
    if not sigma_cells > 0:
        raise InvalidInputError(f"sigma must be positive, got {sigma_cells}")
    r = kernel_radius(sigma_cells)
    x = np.arange(-r, r + 1, dtype=float)
    taps = np.exp(-0.5 * (x / sigma_cells) ** 2)
    return Kernel1D(taps / taps.sum(), float(sigma_cells))


def gaussian_derivative_kernel(sigma_cells: float = DEFAULT_SIGMA_CELLS) -> Kernel1D:
    """Analytic derivative-of-Gaussian taps (per cell), odd-symmetric.

    Scaled so that filtering the ramp f(i) = i returns exactly 1.
    """
    g = gaussian_kernel(sigma_cells)
    r = g.radius
    x = np.arange(-r, r + 1, dtype=float)
    d = -x * g.taps
    # correlate1d computes sum_k d[k] f(i + k - r), so the ramp response is sum x d
    d /= float(np.dot(x, d))
    return Kernel1D(d, float(sigma_cells))


def convolve_separable(f: ScalarField, k: Kernel1D) -> ScalarField:
    """Convolve with ``k`` along x then y, zero padding at the grid edge."""
    out = correlate1d(f.samples, k.taps, axis=1, mode="constant")
    out = correlate1d(out, k.taps, axis=0, mode="constant")
    return ScalarField(f.spec, out)


def aligned_copy(a: ArrayLike, dtype=np.float64) -> NDArray:
    """C-contiguous copy starting on a 64-byte boundary.

    SIMD kernels in OpenCV and numpy peel off a start-up loop whose length
    depends on the address, which changes rounding; a fixed alignment makes
    results reproducible run to run. The slack after the data is zeroed
    because OpenCV's vectorised row filter may read a few elements past the
    end.
    """
    a = np.asarray(a)
    size = a.size * np.dtype(dtype).itemsize
    buf = np.zeros(size + 128, dtype=np.uint8)
    off = (-buf.ctypes.data) % 64
    out = buf[off:off + size].view(dtype).reshape(a.shape)
    out[...] = a
    return out


_BORDERS = {"constant": cv2.BORDER_CONSTANT, "nearest": cv2.BORDER_REPLICATE,
            "reflect": cv2.BORDER_REFLECT, "mirror": cv2.BORDER_REFLECT_101}


def ridge_array(ind: NDArray, sigma_cells: float, resolution: float,
                mode: str = "constant", dtype=np.float64) -> NDArray:
    """Gradient magnitude of the Gaussian-smoothed indicator, in 1/m.

    The two separable passes run in single precision through OpenCV;
    ``mode`` names the border rule as in :mod:`scipy.ndimage`.
    """
    if mode not in _BORDERS:
        raise InvalidInputError(f"unsupported border mode {mode!r}")
    g = aligned_copy(gaussian_kernel(sigma_cells).taps, np.float32)
    d = aligned_copy(gaussian_derivative_kernel(sigma_cells).taps, np.float32)
    src = aligned_copy(ind, np.float32)
    border = _BORDERS[mode]
    # sepFilter2D correlates (no kernel flip), matching correlate1d
    gx = cv2.sepFilter2D(src, cv2.CV_32F, d, g, borderType=border)
    gy = cv2.sepFilter2D(src, cv2.CV_32F, g, d, borderType=border)
    # plain IEEE ops round the same in SIMD lanes and scalar tails, unlike
    # cv2.magnitude or np.hypot, so the result does not depend on alignment
    out = gx * gx
    out += gy * gy
    np.sqrt(out, out=out)
    out *= np.float32(1.0 / resolution)
    return out.astype(dtype, copy=False)


def ridge(ind: ScalarField, sigma_cells: float = DEFAULT_SIGMA_CELLS,
          mode: str = "constant") -> ScalarField:
    """Delta-function ridge |grad(g_sigma * I)| around the boundary of a set.

    Integrates to roughly the perimeter of the set. ``mode`` is passed to
    :func:`scipy.ndimage.correlate1d`; the default zero padding treats the
    grid edge as empty space.
    """
    _require_indicator(ind, "ridge input")
    return ScalarField(ind.spec, ridge_array(ind.samples, sigma_cells, ind.spec.resolution, mode))


# ---------------------------------------------------------------------------
# location densities


@dataclass(frozen=True, eq=False)
class LocationDensity:
    """Probability density for an obstacle's position.

    ``kind="gaussian"`` uses ``mean`` and ``cov`` (a zero matrix means a point
    mass); ``kind="gridded"`` uses ``grid``, a non-negative field that
    integrates to one.
    """

    kind: str
    mean: NDArray = field(default_factory=lambda: np.zeros(2))
    cov: NDArray = field(default_factory=lambda: np.zeros((2, 2)))
    grid: ScalarField | None = None

    def __post_init__(self):
        if self.kind == "gaussian":
            mean = np.asarray(self.mean, dtype=float).reshape(2)
            cov = np.asarray(self.cov, dtype=float).reshape(2, 2)
            if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
                raise InvalidInputError("density parameters must be finite")
            if not np.allclose(cov, cov.T, atol=1e-15, rtol=1e-12):
                raise InvalidInputError("covariance must be symmetric")
            cov = 0.5 * (cov + cov.T)
            eig = np.linalg.eigvalsh(cov)
            if eig[0] < -1e-15:
                raise InvalidInputError("covariance must be positive semi-definite")
            if eig[0] <= 0 and cov[0, 1] != 0:
                raise InvalidInputError("singular covariance must be axis-aligned")
            object.__setattr__(self, "mean", mean)
            object.__setattr__(self, "cov", cov)
        elif self.kind == "gridded":
            if self.grid is None:
                raise InvalidInputError("gridded density needs a grid")
            s = self.grid.samples
            if np.any(s < 0):
                raise InvalidInputError("gridded density must be non-negative")
            mass = self.grid.integral()
            if abs(mass - 1.0) > 1e-6:
                raise InvalidInputError(f"gridded density integrates to {mass}, not 1")
            r, c = np.nonzero(s)
            object.__setattr__(self, "mean", np.array([
                float(np.sum(self.grid.spec.xs()[c] * s[r, c]) / s.sum()),
                float(np.sum(self.grid.spec.ys()[r] * s[r, c]) / s.sum()),
            ]))
        else:
            raise InvalidInputError(f"unknown density kind {self.kind!r}")

    @classmethod
    def gaussian(cls, mean: ArrayLike, std: float | ArrayLike = 0.0) -> "LocationDensity":
        """Gaussian from a mean and a scalar (isotropic) or per-axis std."""
        std = np.broadcast_to(np.asarray(std, dtype=float), (2,))
        return cls("gaussian", np.asarray(mean, dtype=float), np.diag(std ** 2))

    @classmethod
    def point(cls, mean: ArrayLike) -> "LocationDensity":
        return cls("gaussian", np.asarray(mean, dtype=float), np.zeros((2, 2)))

    @property
    def is_separable(self) -> bool:
        return self.kind == "gaussian" and self.cov[0, 1] == 0

    @property
    def is_isotropic(self) -> bool:
        return self.is_separable and self.cov[0, 0] == self.cov[1, 1]

    @property
    def std(self) -> NDArray:
        """Per-axis standard deviation (the grid's spread for gridded kinds)."""
        if self.kind == "gaussian":
            return np.sqrt(np.diag(self.cov))
        s = self.grid.samples
        r, c = np.nonzero(s)
        w = s[r, c] / s[r, c].sum()
        xs, ys = self.grid.spec.xs()[c], self.grid.spec.ys()[r]
        return np.sqrt([np.dot(w, (xs - self.mean[0]) ** 2), np.dot(w, (ys - self.mean[1]) ** 2)])

    def support_halfwidth(self) -> NDArray:
        """Half-size (m) of the box holding the sampled mass, about the mean."""
        if self.kind == "gaussian":
            return DENSITY_SUPPORT_STDS * self.std
        spec = self.grid.spec
        x0, y0, x1, y1 = spec.extent
        return np.array([max(x1 - self.mean[0], self.mean[0] - x0),
                         max(y1 - self.mean[1], self.mean[1] - y0)])

    def sample_patch(self, resolution: float, shift: ArrayLike = (0.0, 0.0)):
        """Density sampled on the lattice ``shift + resolution * Z^2``.

        Returns ``(row0, col0, patch)`` where ``patch[j, i]`` is the density
        at ``shift + resolution * (col0 + i, row0 + j)``. The patch is
        normalised so that ``patch.sum() * resolution**2 == 1``.
        """
        h = float(resolution)
        sx, sy = (float(c) for c in shift)
        if self.kind == "gridded":
            spec = self.grid.spec
            lattice = GridSpec((sx, sy), h, 1, 1)
            row0, col0 = lattice.lattice_offset(spec)
            return row0, col0, self.grid.samples.copy()
        if self.is_separable:
            row0, col0, ty, tx = self.separable_taps(h, (sx, sy))
            return row0, col0, np.outer(ty, tx) / h ** 2
        hx, hy = self.support_halfwidth()
        mx, my = self.mean[0] - sx, self.mean[1] - sy
        col0, col1 = math.floor((mx - hx) / h), math.ceil((mx + hx) / h)
        row0, row1 = math.floor((my - hy) / h), math.ceil((my + hy) / h)
        xs = np.arange(col0, col1 + 1) * h - mx
        ys = np.arange(row0, row1 + 1) * h - my
        X, Y = np.meshgrid(xs, ys)
        inv = np.linalg.inv(self.cov)
        q = inv[0, 0] * X * X + 2 * inv[0, 1] * X * Y + inv[1, 1] * Y * Y
        w = np.exp(-0.5 * q)
        return row0, col0, w / (w.sum() * h ** 2)

    def separable_taps(self, resolution: float, shift: ArrayLike = (0.0, 0.0)):
        """Unit-sum 1D factors ``(row0, col0, ty, tx)`` of a separable Gaussian."""
        if not self.is_separable:
            raise InvalidInputError("density is not separable")
        h = float(resolution)
        col0, tx = _taps_1d(self.mean[0] - shift[0], self.cov[0, 0], h)
        row0, ty = _taps_1d(self.mean[1] - shift[1], self.cov[1, 1], h)
        return row0, col0, ty, tx

    def rasterize(self, spec: GridSpec) -> ScalarField:
        """Density sampled at the cell centers of ``spec`` (mass outside is dropped)."""
        row0, col0, patch = self.sample_patch(spec.resolution, spec.origin)
        out = place(patch, row0, col0, spec.shape)
        return ScalarField(spec, out, _truncation_warnings(out.sum() / patch.sum()))


def _taps_1d(mu: float, var: float, h: float) -> tuple[int, NDArray]:
    """Normalised Gaussian weights on the integer lattice ``h * Z``."""
    if var <= 0:
        return int(math.floor(mu / h + 0.5)), np.ones(1)
    std = math.sqrt(var)
    lo = math.floor((mu - DENSITY_SUPPORT_STDS * std) / h)
    hi = math.ceil((mu + DENSITY_SUPPORT_STDS * std) / h)
    x = np.arange(lo, hi + 1) * h - mu
    w = np.exp(-0.5 * x * x / var)
    if w.sum() == 0:
        return int(math.floor(mu / h + 0.5)), np.ones(1)
    return lo, w / w.sum()


def _truncation_warnings(kept_fraction: float) -> tuple[str, ...]:
    lost = 1.0 - float(kept_fraction)
    if lost > TRUNCATION_WARN:
        msg = f"density support truncated by the grid: {lost:.3g} of the mass lost"
        logger.warning(msg)
        return (msg,)
    return ()


def _convolve_density_full(src: NDArray, src_spec: GridSpec, p: LocationDensity,
                           out_spec: GridSpec) -> tuple[NDArray, int, int]:
    """Full convolution ``src * p`` and the ``out_spec`` index of its first cell."""
    h = out_spec.resolution
    drow, dcol = out_spec.lattice_offset(src_spec)
    # src cell j sits at out index j + (drow, dcol); displacements lie on h * Z^2
    if p.is_separable:
        row0, col0, ty, tx = p.separable_taps(h)
        full = fftconvolve(src, tx[None, :], mode="full", axes=1) if len(tx) > 1 else src.copy()
        if len(ty) > 1:
            full = fftconvolve(full, ty[:, None], mode="full", axes=0)
    else:
        row0, col0, patch = p.sample_patch(h)
        full = fftconvolve(src, patch * (h * h), mode="full")
    np.maximum(full, 0.0, out=full)
    return full, row0 + drow, col0 + dcol


def _kept_fraction(full: NDArray, row0: int, col0: int, shape: tuple[int, int]) -> float:
    total = float(full.sum())
    if total <= 0:
        return 1.0
    r0, c0 = max(0, -row0), max(0, -col0)
    r1 = min(full.shape[0], shape[0] - row0)
    c1 = min(full.shape[1], shape[1] - col0)
    inside = float(full[r0:r1, c0:c1].sum()) if r1 > r0 and c1 > c0 else 0.0
    return inside / total


def accumulate_density(src: NDArray, src_spec: GridSpec, p: LocationDensity,
                       out: NDArray, out_spec: GridSpec, weight: float = 1.0) -> float:
    """Add ``weight * (src * p)`` into ``out`` in place; returns the kept mass fraction."""
    full, row0, col0 = _convolve_density_full(src, src_spec, p, out_spec)
    if weight != 1.0:
        full *= weight
    place(full, row0, col0, out_spec.shape, out=out)
    return _kept_fraction(full, row0, col0, out_spec.shape)


def convolve_density_array(src: NDArray, src_spec: GridSpec, p: LocationDensity,
                           out_spec: GridSpec) -> tuple[NDArray, float]:
    """Array-level ``src * p`` placed on ``out_spec``.

    Returns the result and the fraction of the convolved mass that landed
    inside ``out_spec``.
    """
    out = np.zeros(out_spec.shape)
    kept = accumulate_density(src, src_spec, p, out, out_spec)
    return out, kept


def convolve_density(f: ScalarField, p: LocationDensity,
                     out_spec: GridSpec | None = None) -> ScalarField:
    """Convolution ``f * p`` sampled on ``out_spec`` (default: ``f``'s grid).

    Isotropic and axis-aligned Gaussians use two 1D passes; anything else is
    rasterised and convolved in 2D. Mass falling outside the output grid is
    reported in the result's ``warnings`` when it exceeds 1e-3 of the total.
    """
    out_spec = f.spec if out_spec is None else out_spec
    out, kept = convolve_density_array(f.samples, f.spec, p, out_spec)
    return ScalarField(out_spec, out, _truncation_warnings(kept))


# ---------------------------------------------------------------------------
# integration


def _check_same(a: ScalarField, b: ScalarField):
    if a.spec != b.spec:
        raise InvalidInputError(f"grid mismatch: {a.spec} vs {b.spec}")


def integrate(f: ScalarField) -> float:
    """Riemann sum of the samples times the cell area."""
    return f.integral()


def integrate_product(a: ScalarField, b: ScalarField) -> float:
    """Riemann sum of ``a * b``, visiting only cells where ``a`` is nonzero."""
    _check_same(a, b)
    mask = a.samples != 0
    return float(np.dot(a.samples[mask], b.samples[mask])) * a.spec.cell_area


def ridge_crossing_integral(theta: float, sigma_cells: float = DEFAULT_SIGMA_CELLS,
                            domain_cells: int = 256, phases: int = 6) -> float:
    """Overlap integral of two straight boundary ridges crossing at ``theta``.

    Builds the ridges of two half-planes whose edges cross near the domain
    center and integrates their product; for sigma -> 0 the value is
    1 / sin(theta). Distances are in cells. A single crossing aliases with
    the cell lattice (up to ~8% at 45 degrees), so the result is averaged
    over ``phases**2`` sub-cell positions of the crossing point.
    """
    if not 0 < theta <= math.pi / 2 + 1e-12:
        raise InvalidInputError("theta must lie in (0, pi/2]")
    if math.sin(theta) * domain_cells < 16 * sigma_cells:
        raise InvalidInputError("crossing angle too shallow for the integration domain")
    n = int(domain_cells)
    c = np.arange(n) - (n - 1) / 2.0
    X, Y = np.meshgrid(c, c)
    ct, st = math.cos(theta), math.sin(theta)
    total = 0.0
    offsets = (np.arange(phases) + 0.5) / phases
    for ox in offsets:
        # "nearest" extends the half-planes past the domain edge
        r1 = ridge_array((X >= ox).astype(float), sigma_cells, 1.0, mode="nearest")
        for oy in offsets:
            second = ((X - ox) * ct + (Y - oy) * st >= 0).astype(float)
            r2 = ridge_array(second, sigma_cells, 1.0, mode="nearest")
            total += float(np.sum(r1 * r2))
    return total / phases ** 2
