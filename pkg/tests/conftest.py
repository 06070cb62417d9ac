import numpy as np
import pytest

from fprisk.fields import LocationDensity
from fprisk.geometry import GridSpec, Polygon
from fprisk.paths import Path
from fprisk.risk import Obstacle

H = 0.05
CAR = Polygon.rectangle(4.0, 2.0)


def straight_path(x0, x1, y=0.0, pid="p", n=2):
    xs = np.linspace(x0, x1, n)
    poses = np.column_stack([xs, np.full(n, y), np.zeros(n)])
    return Path(pid, np.arange(n, dtype=float), poses)


def box_obstacle(mean, std, length=2.0, width=1.0, yaw=0.0, oid="b"):
    c, s = np.cos(yaw), np.sin(yaw)
    verts = Polygon.rectangle(length, width).vertices @ np.array([[c, -s], [s, c]]).T
    return Obstacle(Polygon(verts), LocationDensity.gaussian(mean, std), oid)


def random_obstacles(rng, k, std_range=(0.05, 0.7), extent=8.0):
    out = []
    for i in range(k):
        out.append(box_obstacle(rng.uniform(-extent, extent, 2), rng.uniform(*std_range),
                                rng.uniform(0.5, 4.0), rng.uniform(0.5, 2.0),
                                rng.uniform(-np.pi, np.pi), f"o{i}"))
    return out


@pytest.fixture
def arena():
    return GridSpec.covering((-14, -14, 14, 14), H)
