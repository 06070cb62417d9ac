"""Scenario files and synthetic scene templates."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import Sequence

import jsonschema
import numpy as np

from .errors import GenerationError, InvalidInputError, SchemaError
from .fields import LocationDensity
from .geometry import DEFAULT_RESOLUTION, GridSpec, Polygon, Pose2, grid_for_bounds
from .io import atomic_write_text
from .risk import Obstacle

CARPARK_STD = 0.3
RANDOM_STD = 0.7
CAR_LENGTH = 4.0
CAR_WIDTH = 2.0
PARKING_YAW_JITTER = 0.15

_POINT = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_POSE = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}
_VERTS = {"type": "array", "items": _POINT, "minItems": 3}

SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["robot", "obstacles", "start", "goal"],
    "additionalProperties": False,
    "properties": {
        "grid": {
            "oneOf": [
                {"const": "auto"},
                {
                    "type": "object",
                    "required": ["resolution"],
                    "additionalProperties": False,
                    "properties": {
                        "resolution": {"type": "number", "exclusiveMinimum": 0},
                        "origin": _POINT,
                        "width": {"type": "integer", "minimum": 1},
                        "height": {"type": "integer", "minimum": 1},
                    },
                    "dependentRequired": {"origin": ["width", "height"],
                                          "width": ["origin", "height"],
                                          "height": ["origin", "width"]},
                },
            ]
        },
        "robot": {
            "type": "object",
            "required": ["vertices"],
            "additionalProperties": False,
            "properties": {"vertices": _VERTS},
        },
        "obstacles": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "vertices", "mean", "cov"],
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "string"},
                    "vertices": _VERTS,
                    "mean": _POINT,
                    "cov": {"type": "array", "items": _POINT, "minItems": 2, "maxItems": 2},
                    "inflation": {"type": "number", "minimum": 0},
                },
            },
        },
        "start": _POSE,
        "goal": _POSE,
        "seed": {"type": "integer"},
    },
}


@dataclass(eq=False)
class Scenario:
    """Robot, tethered obstacles, start/goal and an optional fixed grid.

    ``grid`` is ``None`` for an automatic grid at ``resolution``.
    """

    robot: Polygon
    obstacles: list[Obstacle]
    start: Pose2
    goal: Pose2
    seed: int = 0
    grid: GridSpec | None = None
    resolution: float = DEFAULT_RESOLUTION
    inflation: dict[str, float] = field(default_factory=dict)

    def bounds(self, paths: Sequence = ()) -> tuple[float, float, float, float]:
        """Box holding obstacle supports (shape plus density), paths and endpoints."""
        r = self.robot.radius
        pts = [[self.start.x - r, self.start.y - r], [self.start.x + r, self.start.y + r],
               [self.goal.x - r, self.goal.y - r], [self.goal.x + r, self.goal.y + r]]
        for obs in self.obstacles:
            half = obs.density.support_halfwidth()
            lo = obs.shape.vertices.min(axis=0) + obs.density.mean - half
            hi = obs.shape.vertices.max(axis=0) + obs.density.mean + half
            pts.extend([lo, hi])
        for p in paths:
            xy = p.poses[:, :2]
            pts.extend([xy.min(axis=0) - r, xy.max(axis=0) + r])
        arr = np.asarray(pts, dtype=float)
        lo, hi = arr.min(axis=0), arr.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    def max_std(self) -> float:
        stds = [float(np.max(o.density.std)) for o in self.obstacles]
        return max(stds, default=0.0)

    def resolve_grid(self, paths: Sequence = (), sigma_cells: float = 2.0,
                     resolution: float | None = None) -> GridSpec:
        if self.grid is not None:
            return self.grid
        res = resolution or self.resolution
        return grid_for_bounds(self.bounds(paths), res, sigma_cells, self.max_std())


def _gaussian(mean, cov) -> LocationDensity:
    return LocationDensity("gaussian", np.asarray(mean, dtype=float), np.asarray(cov, dtype=float))


def scenario_from_dict(doc: dict, source: str = "<scenario>") -> Scenario:
    """Validate against :data:`SCENARIO_SCHEMA` and build a :class:`Scenario`."""
    try:
        jsonschema.validate(doc, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaError(f"{source}: {where}: {exc.message}") from exc
    try:
        robot = Polygon(np.asarray(doc["robot"]["vertices"], dtype=float))
        obstacles, inflation = [], {}
        for k, item in enumerate(doc["obstacles"]):
            shape = Polygon(np.asarray(item["vertices"], dtype=float))
            infl = float(item.get("inflation", 0.0))
            if infl > 0:
                shape = shape.inflated(infl)
                inflation[item["id"]] = infl
            obstacles.append(Obstacle(shape, _gaussian(item["mean"], item["cov"]), item["id"]))
        grid, resolution = None, DEFAULT_RESOLUTION
        g = doc.get("grid", "auto")
        if isinstance(g, dict):
            resolution = float(g["resolution"])
            if "origin" in g:
                grid = GridSpec(tuple(g["origin"]), resolution, g["width"], g["height"])
        return Scenario(robot, obstacles, Pose2(*doc["start"]), Pose2(*doc["goal"]),
                        int(doc.get("seed", 0)), grid, resolution, inflation)
    except InvalidInputError as exc:
        raise SchemaError(f"{source}: {exc}") from exc


def scenario_to_dict(sc: Scenario) -> dict:
    if sc.grid is not None:
        grid: object = {"resolution": sc.grid.resolution, "origin": list(sc.grid.origin),
                        "width": sc.grid.width, "height": sc.grid.height}
    elif sc.resolution != DEFAULT_RESOLUTION:
        grid = {"resolution": sc.resolution}
    else:
        grid = "auto"
    obstacles = []
    for o in sc.obstacles:
        if o.density.kind != "gaussian":
            raise InvalidInputError("only Gaussian densities can be written to a scenario file")
        item = {"id": o.id, "vertices": o.shape.vertices.tolist(),
                "mean": o.density.mean.tolist(), "cov": o.density.cov.tolist()}
        obstacles.append(item)
    return {
        "grid": grid,
        "robot": {"vertices": sc.robot.vertices.tolist()},
        "obstacles": obstacles,
        "start": [sc.start.x, sc.start.y, sc.start.theta],
        "goal": [sc.goal.x, sc.goal.y, sc.goal.theta],
        "seed": sc.seed,
    }


def dump_scenario(sc: Scenario) -> str:
    return json.dumps(scenario_to_dict(sc), indent=1) + "\n"


def load_scenario(source: str | os.PathLike) -> Scenario:
    text = FsPath(source).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return scenario_from_dict(doc, str(source))


def save_scenario(sc: Scenario, dest: str | os.PathLike):
    atomic_write_text(dest, dump_scenario(sc))


# ---------------------------------------------------------------------------
# templates


def _iso(std: float) -> np.ndarray:
    return np.eye(2) * std ** 2


def _rotated(poly: Polygon, yaw: float) -> Polygon:
    c, s = math.cos(yaw), math.sin(yaw)
    return Polygon(poly.vertices @ np.array([[c, -s], [s, c]]).T)


def carpark_scenario(k: int = 35, std: float = CARPARK_STD, seed: int = 0,
                     yaw_jitter: float = PARKING_YAW_JITTER) -> Scenario:
    """Three rows of parked 2 x 4 m cars with two aisles between them.

    About a quarter of the bays are left empty and each parked car is
    turned by a uniform random angle of at most ``yaw_jitter`` radians.
    The robot drives the length of the lower aisle, from west of the first
    bay to east of the last.
    """
    if k < 1:
        raise InvalidInputError("k must be at least 1")
    rng = np.random.default_rng(seed)
    rows = 3
    bays_per_row = max(math.ceil(math.ceil(1.3 * k) / rows), 1)
    pitch = CAR_WIDTH + 0.8
    row_y = [0.0, 11.0, 22.0]
    bays = [(r, b) for r in range(rows) for b in range(bays_per_row)]
    taken = np.sort(rng.choice(len(bays), size=k, replace=False))
    shape = Polygon.rectangle(CAR_WIDTH, CAR_LENGTH)
    yaws = rng.uniform(-yaw_jitter, yaw_jitter, size=k)
    obstacles = []
    for n, idx in enumerate(taken):
        r, b = bays[idx]
        mean = [b * pitch, row_y[r]]
        body = _rotated(shape, yaws[n]) if yaws[n] != 0 else shape
        obstacles.append(Obstacle(body, _gaussian(mean, _iso(std)), f"car{n:03d}"))
    length = (bays_per_row - 1) * pitch
    robot = Polygon.rectangle(CAR_LENGTH, CAR_WIDTH)
    start = Pose2(-6.0, 5.5, 0.0)
    goal = Pose2(length + 6.0, 5.5, 0.0)
    return Scenario(robot, obstacles, start, goal, seed)


def random_scenario(k: int = 10, std: float = RANDOM_STD, seed: int = 0,
                    density: float = 60.0, attempts: int = 1000,
                    side: float | None = None) -> Scenario:
    """Randomly placed and oriented car-sized boxes in a square workspace.

    The workspace is ``side`` meters square, or ``density`` square meters
    per obstacle when ``side`` is omitted; start and goal sit on the west
    and east edges and are kept clear.
    """
    if k < 1:
        raise InvalidInputError("k must be at least 1")
    rng = np.random.default_rng(seed)
    side = side if side is not None else max(math.sqrt(density * k), 20.0)
    start = Pose2(0.0, side / 2, 0.0)
    goal = Pose2(side, side / 2, 0.0)
    keep_out = [np.array([start.x, start.y]), np.array([goal.x, goal.y])]
    placed: list[tuple[np.ndarray, float]] = []
    obstacles = []
    for n in range(k):
        for _ in range(attempts):
            length, width = rng.uniform(3.5, 5.0), rng.uniform(1.6, 2.2)
            yaw = rng.uniform(-math.pi, math.pi)
            mean = rng.uniform([0.0, 0.0], [side, side])
            radius = 0.5 * math.hypot(length, width)
            if any(np.linalg.norm(mean - c) < radius + 5.0 for c in keep_out):
                continue
            # circumscribed circles plus a 1 m margin never overlap
            if any(np.linalg.norm(mean - m) < radius + r + 1.0 for m, r in placed):
                continue
            body = _rotated(Polygon.rectangle(length, width), yaw)
            obstacles.append(Obstacle(body, _gaussian(mean, _iso(std)), f"obs{n:03d}"))
            placed.append((mean, radius))
            break
        else:
            raise GenerationError(f"could not place obstacle {n} without overlap "
                                  f"in {attempts} attempts")
    robot = Polygon.rectangle(CAR_LENGTH, CAR_WIDTH)
    return Scenario(robot, obstacles, start, goal, seed)


TEMPLATES = {"carpark": (carpark_scenario, CARPARK_STD), "random": (random_scenario, RANDOM_STD)}


def gen_scenario(template: str, k: int, std: float | None = None, seed: int = 0) -> Scenario:
    if template not in TEMPLATES:
        raise InvalidInputError(f"unknown template {template!r}")
    fn, default_std = TEMPLATES[template]
    return fn(k=k, std=default_std if std is None else std, seed=seed)


__all__ = ["Scenario", "SCENARIO_SCHEMA", "load_scenario", "save_scenario", "dump_scenario",
           "scenario_from_dict", "scenario_to_dict", "carpark_scenario", "random_scenario",
           "gen_scenario"]
