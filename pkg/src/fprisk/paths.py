"""Candidate paths: a small seeded sampler and the JSON path-file format.

The sampler is a stand-in for a full kinodynamic planner. Each candidate
follows a few random waypoints between start and goal with a pure-pursuit
tracker whose curvature is clipped to a bound, integrated exactly along
constant-curvature arcs. Obstacles are treated as fixed at their mean
location while planning; candidates that hit one are redrawn a limited
number of times and then emitted anyway, since risky paths are useful
output.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path as FsPath
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import GenerationError, InvalidInputError, SchemaError
from .geometry import Polygon, Pose2, posed_footprints, wrap_angle

MAX_HEADING_STEP = 0.3
DEFAULT_STEP = 0.5
DEFAULT_MAX_CURVATURE = 0.2
DEFAULT_SPEED = 2.0
DEFAULT_SPREAD = 2.0


@dataclass(frozen=True, eq=False)
class Path:
    """Timed pose sequence; ``poses`` has columns (x, y, theta)."""

    id: str
    times: NDArray
    poses: NDArray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        p = np.asarray(self.poses, dtype=float).reshape(-1, 3)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "poses", p)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def length(self) -> float:
        d = np.diff(self.poses[:, :2], axis=0)
        return float(np.hypot(d[:, 0], d[:, 1]).sum())

    def validate(self, max_heading_step: float = MAX_HEADING_STEP):
        """Raise :class:`SchemaError` naming this path if an invariant fails."""
        if len(self.times) != len(self.poses):
            raise SchemaError(f"path {self.id!r}: {len(self.times)} times for {len(self.poses)} poses")
        if len(self.times) == 0:
            raise SchemaError(f"path {self.id!r}: no poses")
        if not (np.all(np.isfinite(self.times)) and np.all(np.isfinite(self.poses))):
            raise SchemaError(f"path {self.id!r}: non-finite values")
        if np.any(np.diff(self.times) <= 0):
            k = int(np.argmax(np.diff(self.times) <= 0)) + 1
            raise SchemaError(f"path {self.id!r}: timestamps not strictly increasing at pose {k}")
        dth = np.abs(wrap_angle(np.diff(self.poses[:, 2])))
        if len(dth) and np.max(dth) > max_heading_step + 1e-9:
            k = int(np.argmax(dth)) + 1
            raise SchemaError(f"path {self.id!r}: heading change {dth[k - 1]:.3f} rad "
                              f"at pose {k} exceeds {max_heading_step}")


@dataclass(frozen=True)
class Kinematics:
    max_curvature: float = DEFAULT_MAX_CURVATURE
    step: float = DEFAULT_STEP
    speed: float = DEFAULT_SPEED


def _arc(x, y, th, kappa, s):
    if abs(kappa) < 1e-12:
        return x + s * math.cos(th), y + s * math.sin(th), th
    th2 = th + kappa * s
    return (x + (math.sin(th2) - math.sin(th)) / kappa,
            y - (math.cos(th2) - math.cos(th)) / kappa, th2)


def _track(start: Pose2, waypoints: NDArray, goal_xy: NDArray, kin: Kinematics,
           max_steps: int) -> NDArray | None:
    """Pure pursuit through ``waypoints`` then to the goal; None if it stalls."""
    x, y, th = start.x, start.y, start.theta
    out = [(x, y, th)]
    targets = list(waypoints) + [goal_xy]
    lookahead = 2.0 * kin.step
    ti = 0
    for _ in range(max_steps):
        tx, ty = targets[ti]
        dist = math.hypot(tx - x, ty - y)
        final = ti == len(targets) - 1
        if final and dist <= kin.step:
            arr = np.array(out)
            arr[:, 2] = wrap_angle(arr[:, 2])
            return arr
        if not final and dist <= lookahead:
            ti += 1
            continue
        alpha = math.remainder(math.atan2(ty - y, tx - x) - th, 2 * math.pi)
        kappa = 2.0 * math.sin(alpha) / max(dist, lookahead)
        if abs(alpha) > math.pi / 2:
            kappa = math.copysign(kin.max_curvature, alpha)
        kappa = min(max(kappa, -kin.max_curvature), kin.max_curvature)
        x, y, th = _arc(x, y, th, kappa, kin.step)
        th = math.remainder(th, 2 * math.pi)
        out.append((x, y, th))
    return None


def _mean_hulls(obstacles) -> list[tuple[Polygon, NDArray]]:
    from .geometry import convex_hull

    out = []
    for obs in obstacles:
        shape = obs.shape if obs.shape.is_convex() else Polygon(convex_hull(obs.shape.vertices))
        out.append((shape, np.asarray(obs.density.mean, dtype=float)))
    return out


def _hits_mean_obstacle(poses: NDArray, robot: Polygon, hulls) -> bool:
    from .oracle import _SweptSat

    if not hulls:
        return False
    polys = posed_footprints(poses, robot, 4 * DEFAULT_STEP)
    lo, hi = polys.min(axis=1), polys.max(axis=1)
    for shape, mean in hulls:
        b = shape.vertices + mean
        near = np.all(lo <= b.max(axis=0), axis=1) & np.all(hi >= b.min(axis=0), axis=1)
        if near.any() and _SweptSat(polys[near], shape).hits(mean[None, :])[0]:
            return True
    return False


def generate_paths(start: Pose2, goal: Pose2, n: int, kin: Kinematics | None = None,
                   seed: int = 0, obstacles: Sequence = (), robot: Polygon | None = None,
                   max_waypoints: int = 3, spread: float = DEFAULT_SPREAD, retries: int = 50,
                   id_prefix: str = "p") -> list[Path]:
    """Sample ``n`` curvature-bounded candidate paths from ``start`` toward ``goal``.

    Candidate ``0`` has no intermediate waypoints, so it is the most direct
    route. Waypoints are placed at random fractions of the start-goal
    segment with Gaussian lateral offsets of standard deviation ``spread`` meters.
    """
    kin = kin or Kinematics()
    if n < 1:
        raise InvalidInputError("n must be at least 1")
    s_xy = np.array([start.x, start.y])
    g_xy = np.array([goal.x, goal.y])
    span = float(np.linalg.norm(g_xy - s_xy))
    if span <= kin.step:
        raise InvalidInputError("start and goal must be further apart than one step")
    direction = (g_xy - s_xy) / span
    normal = np.array([-direction[1], direction[0]])
    max_steps = int(6 * span / kin.step) + int(4 * math.pi / (kin.max_curvature * kin.step)) + 10
    hulls = _mean_hulls(obstacles) if robot is not None else []
    rng = np.random.default_rng(seed)

    paths: list[Path] = []
    for i in range(n):
        chosen = None
        for attempt in range(retries + 1):
            # only candidate 0 may go direct; others would duplicate it
            m = 0 if (i == 0 and attempt == 0) or max_waypoints == 0 \
                else int(rng.integers(1, max_waypoints + 1))
            frac = np.sort(rng.uniform(0.15, 0.85, m))
            lateral = rng.normal(0.0, spread, m)
            wps = s_xy + frac[:, None] * (g_xy - s_xy) + lateral[:, None] * normal
            poses = _track(start, wps, g_xy, kin, max_steps)
            if poses is None:
                continue
            chosen = poses
            if not _hits_mean_obstacle(poses, robot, hulls):
                break
        if chosen is None:
            continue
        times = np.arange(len(chosen)) * kin.step / kin.speed
        paths.append(Path(f"{id_prefix}{i:04d}", times, chosen))
    if not paths:
        raise GenerationError("no candidate path reached the goal within the retry budget")
    return paths


# ---------------------------------------------------------------------------
# path files


def paths_to_dict(paths: Sequence[Path]) -> dict:
    return {"paths": [
        {"id": p.id, "poses": [[float(t), *map(float, q)] for t, q in zip(p.times, p.poses)]}
        for p in paths
    ]}


def dump_paths(paths: Sequence[Path]) -> str:
    return json.dumps(paths_to_dict(paths), separators=(",", ":")) + "\n"


def save_paths(paths: Sequence[Path], dest: str | os.PathLike):
    from .io import atomic_write_text

    atomic_write_text(dest, dump_paths(paths))


def parse_paths(text: str, source: str = "<string>",
                max_heading_step: float = MAX_HEADING_STEP) -> list[Path]:
    if not text.strip():
        return []
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("paths"), list):
        raise SchemaError(f"{source}: expected an object with a 'paths' list")
    out = []
    for k, item in enumerate(doc["paths"]):
        where = f"{source}: paths[{k}]"
        if not isinstance(item, dict) or not isinstance(item.get("id"), str):
            raise SchemaError(f"{where}: each path needs a string 'id'")
        poses = item.get("poses")
        if not isinstance(poses, list):
            raise SchemaError(f"{where} ({item['id']}): 'poses' must be a list")
        for j, row in enumerate(poses):
            if (not isinstance(row, list) or len(row) != 4
                    or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in row)):
                raise SchemaError(f"{where}.poses[{j}] ({item['id']}): expected [t, x, y, theta]")
        arr = np.array(poses, dtype=float).reshape(-1, 4)
        path = Path(item["id"], arr[:, 0], arr[:, 1:])
        path.validate(max_heading_step)
        out.append(path)
    return out


def load_paths(source: str | os.PathLike, max_heading_step: float = MAX_HEADING_STEP) -> list[Path]:
    """Read and validate a path file; an empty file yields an empty list."""
    text = FsPath(source).read_text()
    return parse_paths(text, str(source), max_heading_step)
