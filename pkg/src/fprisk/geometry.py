"""Shapes, poses and their realisation on uniform grids.

Grid convention: ``GridSpec.origin`` is the world position of the *center* of
cell (0, 0); column index grows with x and row index with y, so
``samples[j, i]`` is the cell centered at ``origin + (i, j) * resolution``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.signal import fftconvolve
from scipy.spatial import ConvexHull

from .errors import InvalidInputError, InvalidShapeError

DEFAULT_RESOLUTION = 0.05
MIN_POLYGON_AREA = 1e-12
# index-space coordinates are snapped to this many decimals so that cell
# centers lying on a polygon edge are classified the same way every time
_SNAP_DECIMALS = 9


def wrap_angle(theta: float | NDArray) -> float | NDArray:
    """Map angles to the half-open interval (-pi, pi]."""
    wrapped = np.remainder(np.asarray(theta, dtype=float) + np.pi, 2 * np.pi) - np.pi
    wrapped = np.where(wrapped <= -np.pi, wrapped + 2 * np.pi, wrapped)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


@dataclass(frozen=True)
class Pose2:
    """Planar pose (x, y in meters, theta in radians)."""

    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.theta)):
            raise InvalidInputError(f"pose must be finite, got {self}")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    def as_array(self) -> NDArray:
        return np.array([self.x, self.y, self.theta])


def _shoelace(v: NDArray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 * d2 < 0 and d3 * d4 < 0:
        return True

    def on_segment(a, b, c):
        return (min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
                and min(a[1], b[1]) <= c[1] <= max(a[1], b[1]))

    for d, a, b, c in ((d1, q1, q2, p1), (d2, q1, q2, p2), (d3, p1, p2, q1), (d4, p1, p2, q2)):
        if d == 0 and on_segment(a, b, c):
            return True
    return False


@dataclass(frozen=True, eq=False)
class Polygon:
    """Simple polygon in its body frame, stored counter-clockwise.

    Clockwise input is reversed rather than rejected.
    """

    vertices: NDArray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise InvalidShapeError("a polygon needs at least 3 (x, y) vertices")
        if not np.all(np.isfinite(v)):
            raise InvalidShapeError("polygon vertices must be finite")
        area = _shoelace(v)
        if abs(area) < MIN_POLYGON_AREA:
            raise InvalidShapeError(f"degenerate polygon (area {abs(area):.3g} m^2)")
        if area < 0:
            v = v[::-1]
        n = len(v)
        for i in range(n):
            for j in range(i + 1, n):
                if j == i + 1 or (i == 0 and j == n - 1):
                    continue
                if _segments_cross(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]):
                    raise InvalidShapeError("polygon edges self-intersect")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @classmethod
    def rectangle(cls, length: float, width: float) -> "Polygon":
        """Axis-aligned rectangle centered on the body origin, length along x."""
        hl, hw = 0.5 * length, 0.5 * width
        return cls(np.array([[-hl, -hw], [hl, -hw], [hl, hw], [-hl, hw]]))

    @property
    def area(self) -> float:
        return _shoelace(self.vertices)

    @property
    def perimeter(self) -> float:
        d = np.diff(np.vstack([self.vertices, self.vertices[:1]]), axis=0)
        return float(np.hypot(d[:, 0], d[:, 1]).sum())

    @property
    def radius(self) -> float:
        """Largest vertex distance from the body origin."""
        return float(np.hypot(self.vertices[:, 0], self.vertices[:, 1]).max())

    def is_convex(self) -> bool:
        v = self.vertices
        e = np.roll(v, -1, axis=0) - v
        cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
        return bool(np.all(cross >= -1e-12))

    def reflected(self) -> "Polygon":
        """Point reflection through the body origin."""
        return Polygon(-self.vertices)

    def inflated(self, radius: float) -> "Polygon":
        """Convex hull of the polygon grown by ``radius``.

        The disc is approximated by a circumscribed 16-gon, so the result
        contains the true Minkowski sum. Non-convex shapes are convexified.
        """
        if radius <= 0:
            return self
        n = 16
        ang = np.arange(n) * 2 * np.pi / n
        r = radius / math.cos(math.pi / n)
        ring = r * np.column_stack([np.cos(ang), np.sin(ang)])
        pts = (self.vertices[:, None, :] + ring[None, :, :]).reshape(-1, 2)
        return Polygon(convex_hull(pts))

    def posed(self, pose: Pose2 | ArrayLike) -> NDArray:
        """World-frame vertices after applying ``pose``."""
        x, y, th = _pose_tuple(pose)
        c, s = math.cos(th), math.sin(th)
        rot = np.array([[c, -s], [s, c]])
        return self.vertices @ rot.T + np.array([x, y])


def _pose_tuple(pose) -> tuple[float, float, float]:
    if isinstance(pose, Pose2):
        return pose.x, pose.y, pose.theta
    x, y, th = np.asarray(pose, dtype=float)[:3]
    return float(x), float(y), float(th)


def convex_hull(points: ArrayLike) -> NDArray:
    """Counter-clockwise hull vertices of a 2D point cloud."""
    pts = np.asarray(points, dtype=float)
    hull = ConvexHull(pts)
    return pts[hull.vertices]


def polygon_area(poly: Polygon) -> float:
    """Shoelace area in square meters."""
    return poly.area


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid georeferencing."""

    origin: tuple[float, float]
    resolution: float = DEFAULT_RESOLUTION
    width: int = 1
    height: int = 1

    def __post_init__(self):
        ox, oy = (float(c) for c in self.origin)
        if not (math.isfinite(ox) and math.isfinite(oy)):
            raise InvalidInputError("grid origin must be finite")
        if not self.resolution > 0:
            raise InvalidInputError("grid resolution must be positive")
        if int(self.width) <= 0 or int(self.height) <= 0:
            raise InvalidInputError("grid width and height must be positive")
        object.__setattr__(self, "origin", (ox, oy))
        object.__setattr__(self, "resolution", float(self.resolution))
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width

    @property
    def cell_area(self) -> float:
        return self.resolution ** 2

    @property
    def extent(self) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) of the cell edges."""
        h = self.resolution
        x0, y0 = self.origin
        return (x0 - h / 2, y0 - h / 2, x0 + (self.width - 0.5) * h, y0 + (self.height - 0.5) * h)

    def xs(self) -> NDArray:
        return self.origin[0] + self.resolution * np.arange(self.width)

    def ys(self) -> NDArray:
        return self.origin[1] + self.resolution * np.arange(self.height)

    def to_index(self, x, y):
        """Continuous (column, row) coordinates of world points."""
        h = self.resolution
        return (np.asarray(x) - self.origin[0]) / h, (np.asarray(y) - self.origin[1]) / h

    def nearest_cell(self, x: float, y: float) -> tuple[int, int]:
        """(row, column) of the cell whose center is nearest (x, y)."""
        u, v = self.to_index(x, y)
        return int(np.floor(v + 0.5)), int(np.floor(u + 0.5))

    def lattice_offset(self, other: "GridSpec") -> tuple[int, int]:
        """Integer (row, column) shift taking cell indices of ``other`` to ours.

        Both grids must share resolution and cell-center lattice.
        """
        if not math.isclose(self.resolution, other.resolution, rel_tol=1e-12):
            raise InvalidInputError("grids have different resolutions")
        du = (other.origin[0] - self.origin[0]) / self.resolution
        dv = (other.origin[1] - self.origin[1]) / self.resolution
        iu, iv = round(du), round(dv)
        if abs(du - iu) > 1e-6 or abs(dv - iv) > 1e-6:
            raise InvalidInputError("grids do not share a cell lattice")
        return int(iv), int(iu)

    def with_window(self, row0: int, col0: int, height: int, width: int) -> "GridSpec":
        """Sub-grid (possibly extending past our bounds) on the same lattice."""
        h = self.resolution
        return GridSpec((self.origin[0] + col0 * h, self.origin[1] + row0 * h), h, width, height)

    @classmethod
    def covering(cls, bounds: Sequence[float], resolution: float = DEFAULT_RESOLUTION,
                 pad: float = 0.0) -> "GridSpec":
        """Smallest grid covering ``bounds`` (xmin, ymin, xmax, ymax) plus ``pad``.

        Cell edges sit on integer multiples of the resolution, so round
        coordinates never land on a cell center.
        """
        xmin, ymin, xmax, ymax = bounds
        h = float(resolution)
        i0 = math.floor((xmin - pad) / h)
        j0 = math.floor((ymin - pad) / h)
        i1 = math.ceil((xmax + pad) / h)
        j1 = math.ceil((ymax + pad) / h)
        return cls(((i0 + 0.5) * h, (j0 + 0.5) * h), h, max(i1 - i0, 1), max(j1 - j0, 1))

    @classmethod
    def centered(cls, half_width: int, half_height: int, resolution: float) -> "GridSpec":
        """Body-frame grid whose central cell is centered on (0, 0)."""
        h = float(resolution)
        return cls((-half_width * h, -half_height * h), h, 2 * half_width + 1, 2 * half_height + 1)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real samples on a :class:`GridSpec`, indexed ``samples[row, column]``.

    ``warnings`` carries non-fatal diagnostics such as truncated density mass.
    ``support``, when set, is a ``(row0, row1, col0, col1)`` box known to hold
    every non-zero sample; consumers may use it to skip a full scan.
    """

    spec: GridSpec
    samples: NDArray
    warnings: tuple[str, ...] = field(default=())
    support: tuple[int, int, int, int] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.shape != self.spec.shape:
            raise InvalidInputError(f"samples shape {s.shape} does not match grid {self.spec.shape}")
        if not np.all(np.isfinite(s)):
            raise InvalidInputError("field samples must be finite")
        object.__setattr__(self, "samples", s)

    @classmethod
    def zeros(cls, spec: GridSpec) -> "ScalarField":
        return cls(spec, np.zeros(spec.shape))

    def is_indicator(self) -> bool:
        s = self.samples
        return bool(np.all((s == 0) | (s == 1)))

    def integral(self) -> float:
        return float(self.samples.sum()) * self.spec.cell_area


def _require_indicator(f: ScalarField, name: str = "field"):
    if not f.is_indicator():
        raise InvalidInputError(f"{name} must be an indicator field with values in {{0, 1}}")


# ---------------------------------------------------------------------------
# scanline fill


def _fill_polygons(polys: Sequence[NDArray], height: int, width: int) -> NDArray:
    """Union of polygons given in continuous index coordinates.

    A cell (i, j) is set when its center (i, j) lies inside or on the boundary
    of any polygon. Polygons are processed in batches sharing a vertex count.
    """
    diff = np.zeros((height, width + 1), dtype=np.int32)
    groups: dict[int, list[NDArray]] = {}
    for p in polys:
        groups.setdefault(len(p), []).append(p)
    for plist in groups.values():
        batch = np.round(np.asarray(plist, dtype=float), _SNAP_DECIMALS)
        for start in range(0, len(batch), 1024):
            _scan_batch(batch[start:start + 1024], diff, height, width)
    return np.cumsum(diff[:, :width], axis=1) > 0


def _add_intervals(diff, rows, starts, ends, height, width):
    starts = np.maximum(starts, 0)
    ends = np.minimum(ends, width - 1)
    ok = (rows >= 0) & (rows < height) & (starts <= ends)
    if not np.any(ok):
        return
    rows, starts, ends = rows[ok], starts[ok], ends[ok]
    flat = diff.reshape(-1)
    stride = width + 1
    np.add.at(flat, rows * stride + starts, 1)
    np.add.at(flat, rows * stride + ends + 1, -1)


def _scan_batch(batch: NDArray, diff: NDArray, height: int, width: int):
    u0, v0 = batch[:, :, 0], batch[:, :, 1]
    u1, v1 = np.roll(u0, -1, axis=1), np.roll(v0, -1, axis=1)
    jlo = np.maximum(np.ceil(v0.min(axis=1)), 0).astype(int)
    jhi = np.minimum(np.floor(v0.max(axis=1)), height - 1).astype(int)
    nrows = int(np.max(jhi - jlo + 1, initial=0))
    if nrows > 0:
        rows = jlo[:, None] + np.arange(nrows)[None, :]
        yy = rows[:, :, None].astype(float)
        vmin = np.minimum(v0, v1)[:, None, :]
        vmax = np.maximum(v0, v1)[:, None, :]
        cross = (vmin <= yy) & (yy < vmax) & (rows[:, :, None] <= jhi[:, None, None])
        dv = (v1 - v0)[:, None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            xs = u0[:, None, :] + (yy - v0[:, None, :]) * (u1 - u0)[:, None, :] / dv
        xs = np.where(cross, np.round(xs, _SNAP_DECIMALS), np.inf)
        xs.sort(axis=2)
        npairs = xs.shape[2] // 2
        xa = xs[:, :, 0:2 * npairs:2]
        xb = xs[:, :, 1:2 * npairs:2]
        valid = np.isfinite(xb)
        rr = np.broadcast_to(rows[:, :, None], xa.shape)[valid]
        _add_intervals(diff, rr, np.ceil(xa[valid]).astype(int),
                       np.floor(xb[valid]).astype(int), height, width)
    # boundary-inclusive extras: horizontal edges and vertices on cell centers
    horiz = (v0 == v1) & (v0 == np.round(v0))
    if np.any(horiz):
        _add_intervals(diff, v0[horiz].astype(int),
                       np.ceil(np.minimum(u0, u1)[horiz]).astype(int),
                       np.floor(np.maximum(u0, u1)[horiz]).astype(int), height, width)
    on = (u0 == np.round(u0)) & (v0 == np.round(v0))
    if np.any(on):
        _add_intervals(diff, v0[on].astype(int), u0[on].astype(int), u0[on].astype(int),
                       height, width)


def _edge_square_hulls(verts_idx: NDArray) -> list[NDArray]:
    """Per-edge hulls of edge (+) unit cell, in index coordinates."""
    corners = np.array([[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]])
    out = []
    n = len(verts_idx)
    for k in range(n):
        a, b = verts_idx[k], verts_idx[(k + 1) % n]
        pts = np.vstack([a + corners, b + corners])
        hull = convex_hull(pts)
        if len(hull) < 8:
            hull = np.vstack([hull, np.repeat(hull[-1:], 8 - len(hull), axis=0)])
        out.append(hull)
    return out


def rasterize_polygon(poly: Polygon, pose: Pose2 | ArrayLike, spec: GridSpec,
                      conservative: bool = False) -> ScalarField:
    """Indicator of a posed polygon on ``spec``.

    By default a cell is inside when its center is inside the polygon, edges
    included. With ``conservative=True`` a cell is inside when its square
    meets the polygon at all; this is the form needed for grid Minkowski sums
    whose result should match the continuous sum.
    """
    world = poly.posed(pose)
    u, v = spec.to_index(world[:, 0], world[:, 1])
    idx = np.column_stack([u, v])
    polys = [idx]
    if conservative:
        polys.extend(_edge_square_hulls(idx))
    mask = _fill_polygons(polys, spec.height, spec.width)
    return ScalarField(spec, mask.astype(float))


# ---------------------------------------------------------------------------
# swept areas


def _pose_array(path) -> NDArray:
    poses = getattr(path, "poses", path)
    if isinstance(poses, Pose2):
        poses = [poses]
    if isinstance(poses, np.ndarray):
        return np.asarray(poses, dtype=float).reshape(-1, 3)
    arr = np.array([_pose_tuple(p) for p in poses], dtype=float) if len(poses) else np.zeros((0, 3))
    return arr.reshape(-1, 3)


def resample_poses(path, footprint: Polygon, resolution: float) -> NDArray:
    """Densify a pose sequence so the footprint moves at most half a cell per step.

    The per-step motion bound counts translation plus rotation times the
    footprint radius. Each segment is interpolated from a canonical endpoint
    so a path and its reversal produce bit-identical pose sets.
    """
    poses = _pose_array(path)
    if len(poses) == 0:
        raise InvalidInputError("path has no poses")
    if len(poses) == 1:
        return poses.copy()
    limit = 0.5 * resolution
    a, b = poses[:-1], poses[1:]
    # lexicographic order of the endpoints picks the canonical start
    rev = (b[:, 0] < a[:, 0]) | ((b[:, 0] == a[:, 0]) & (
        (b[:, 1] < a[:, 1]) | ((b[:, 1] == a[:, 1]) & (b[:, 2] < a[:, 2]))))
    first = np.where(rev[:, None], b, a)
    second = np.where(rev[:, None], a, b)
    dth = wrap_angle(second[:, 2] - first[:, 2])
    motion = np.hypot(second[:, 0] - first[:, 0], second[:, 1] - first[:, 1]) \
        + np.abs(dth) * footprint.radius
    k = np.maximum(1, np.ceil(motion / limit)).astype(int)
    seg = np.repeat(np.arange(len(k)), k)
    step = np.arange(len(seg)) - np.repeat(np.cumsum(k) - k, k) + 1  # 1..k per segment
    ks = k[seg]
    s = np.where(rev[seg], ks - step, step) / ks
    f = first[seg]
    out = np.column_stack([
        f[:, 0] + s * (second[seg, 0] - f[:, 0]),
        f[:, 1] + s * (second[seg, 1] - f[:, 1]),
        wrap_angle(f[:, 2] + s * dth[seg]),
    ])
    # the exact endpoint is kept rather than its interpolated twin
    out[np.cumsum(k) - 1] = b
    return np.vstack([poses[:1], out])


def posed_footprints(path, footprint: Polygon, resolution: float) -> NDArray:
    """World vertices of the footprint at every resampled pose, shape (P, V, 2)."""
    poses = resample_poses(path, footprint, resolution)
    c, s = np.cos(poses[:, 2]), np.sin(poses[:, 2])
    vx, vy = footprint.vertices[:, 0], footprint.vertices[:, 1]
    wx = c[:, None] * vx[None, :] - s[:, None] * vy[None, :] + poses[:, 0:1]
    wy = s[:, None] * vx[None, :] + c[:, None] * vy[None, :] + poses[:, 1:2]
    return np.stack([wx, wy], axis=2)


def swept_indicator(path, footprint: Polygon, spec: GridSpec) -> ScalarField:
    """Indicator of the area swept by ``footprint`` along ``path``."""
    world = posed_footprints(path, footprint, spec.resolution)
    u, v = spec.to_index(world[..., 0], world[..., 1])
    idx = np.stack([u, v], axis=2)
    mask = _fill_polygons(list(idx), spec.height, spec.width)
    # filled cells have their centers inside the polygons, so the index
    # bounds of the vertices (widened by one) enclose them
    r0, r1 = np.clip([np.floor(v.min()) - 1, np.ceil(v.max()) + 2], 0, spec.height).astype(int)
    c0, c1 = np.clip([np.floor(u.min()) - 1, np.ceil(u.max()) + 2], 0, spec.width).astype(int)
    return ScalarField(spec, mask.astype(float), support=(int(r0), int(r1), int(c0), int(c1)))


# ---------------------------------------------------------------------------
# Minkowski dilation


def place(src: NDArray, row0: int, col0: int, shape: tuple[int, int],
          out: NDArray | None = None) -> NDArray:
    """Add ``src`` into an array of ``shape`` at integer offset, clipping."""
    if out is None:
        out = np.zeros(shape)
    h, w = src.shape
    r0, c0 = max(row0, 0), max(col0, 0)
    r1, c1 = min(row0 + h, shape[0]), min(col0 + w, shape[1])
    if r0 < r1 and c0 < c1:
        out[r0:r1, c0:c1] += src[r0 - row0:r1 - row0, c0 - col0:c1 - col0]
    return out


def crop(arr: NDArray, row0: int, col0: int, height: int, width: int) -> NDArray:
    """Window of ``arr`` starting at (row0, col0), zero outside its bounds."""
    if row0 >= 0 and col0 >= 0 and row0 + height <= arr.shape[0] and col0 + width <= arr.shape[1]:
        return arr[row0:row0 + height, col0:col0 + width]
    out = np.zeros((height, width), dtype=arr.dtype)
    return place(arr, -row0, -col0, (height, width), out)


def _origin_index(spec: GridSpec) -> tuple[int, int]:
    """(row, column) of the cell centered on the world origin."""
    u, v = spec.to_index(0.0, 0.0)
    iu, iv = round(float(u)), round(float(v))
    if abs(u - iu) > 1e-6 or abs(v - iv) > 1e-6:
        raise InvalidInputError("kernel grid must have a cell centered on the origin")
    return int(iv), int(iu)


def minkowski_dilate(ind_a: ScalarField, ind_b: ScalarField) -> ScalarField:
    """Grid Minkowski sum A (+) B as the support of ``I_A * I_B``.

    ``ind_b`` is a body-frame kernel whose grid has a cell centered on (0, 0);
    the result lives on ``ind_a``'s grid.
    """
    _require_indicator(ind_a, "ind_a")
    _require_indicator(ind_b, "ind_b")
    if not math.isclose(ind_a.spec.resolution, ind_b.spec.resolution, rel_tol=1e-12):
        raise InvalidInputError("fields have different resolutions")
    cj, ci = _origin_index(ind_b.spec)
    a, b = ind_a.samples, ind_b.samples
    if not a.any() or not b.any():
        return ScalarField.zeros(ind_a.spec)
    full = fftconvolve(a, b, mode="full")
    # full[n] pairs a[n - m] with b[m], i.e. offset (m - c) cells
    out = crop(full, cj, ci, *ind_a.spec.shape)
    return ScalarField(ind_a.spec, (out > 0.5).astype(float))


def obstacle_kernel(poly: Polygon, resolution: float, conservative: bool = False) -> ScalarField:
    """Body-frame indicator of ``poly`` on a grid centered on the origin."""
    vmax = np.abs(poly.vertices).max(axis=0)
    hw = math.ceil(vmax[0] / resolution) + 1
    hh = math.ceil(vmax[1] / resolution) + 1
    spec = GridSpec.centered(hw, hh, resolution)
    return rasterize_polygon(poly, Pose2(0.0, 0.0, 0.0), spec, conservative=conservative)


def grid_for_bounds(bounds: Sequence[float], resolution: float = DEFAULT_RESOLUTION,
                    sigma_cells: float = 2.0, max_std: float = 0.0) -> GridSpec:
    """Scenario grid: ``bounds`` padded by 4 sigma cells plus 3 positional stds."""
    pad = 4 * sigma_cells * resolution + 3 * max_std
    return GridSpec.covering(bounds, resolution, pad)
