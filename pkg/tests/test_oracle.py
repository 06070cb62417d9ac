import numpy as np
import pytest
from conftest import CAR, H, box_obstacle, straight_path
from matplotlib.path import Path as MplPath

from fprisk.errors import InvalidInputError, UnsupportedShapeError
from fprisk.fields import LocationDensity
from fprisk.geometry import GridSpec, Polygon, ScalarField, posed_footprints
from fprisk.oracle import _SweptSat, mc_single, mc_total, sample_locations
from fprisk.risk import Obstacle


def footprints(y=0.0):
    return posed_footprints(straight_path(-5, 5, y), CAR, H)


def two_point_density(a, b):
    """Half the mass in the cell at ``a``, half in the cell at ``b``."""
    spec = GridSpec.covering((min(a[0], b[0]) - 1, min(a[1], b[1]) - 1,
                              max(a[0], b[0]) + 1, max(a[1], b[1]) + 1), H)
    s = np.zeros(spec.shape)
    for x, y in (a, b):
        s[spec.nearest_cell(x, y)] += 0.5 / spec.cell_area
    return LocationDensity("gridded", grid=ScalarField(spec, s))


def test_point_mass_overlapping_is_certain():
    obs = Obstacle(Polygon.rectangle(1, 1), LocationDensity.point([0, 0.5]))
    est = mc_single(footprints(), obs, 2000)
    assert est.p_hat == 1.0 and est.stderr == 0.0


def test_point_mass_disjoint_is_impossible():
    obs = Obstacle(Polygon.rectangle(1, 1), LocationDensity.point([0, 5.0]))
    assert mc_single(footprints(), obs, 2000).p_hat == 0.0


def test_two_independent_coin_flips():
    obstacles = [Obstacle(Polygon.rectangle(1, 1), two_point_density((x, 0.0), (x, 8.0)), f"o{i}")
                 for i, x in enumerate((-2.0, 2.0))]
    est = mc_total(footprints(), obstacles, 20_000, seed=1)
    for obs in obstacles:
        single = mc_single(footprints(), obs, 20_000, seed=2)
        assert abs(single.p_hat - 0.5) <= 3 * single.stderr
    assert abs(est.p_hat - 0.75) <= 3 * est.stderr


def test_single_obstacle_total_equals_single():
    obs = box_obstacle([0, 1.5], 0.5)
    a = mc_single(footprints(), obs, 5000, seed=7)
    b = mc_total(footprints(), [obs], 5000, seed=7)
    assert a == b


def test_total_respects_union_bound():
    obstacles = [box_obstacle([x, 1.8], 0.5, oid=f"o{x}") for x in (-3.0, 0.0, 3.0)]
    fp = footprints()
    total = mc_total(fp, obstacles, 20_000, seed=3)
    singles = [mc_single(fp, o, 20_000, seed=(3, k)) for k, o in enumerate(obstacles)]
    combined = np.sqrt(total.stderr ** 2 + sum(s.stderr ** 2 for s in singles))
    assert total.p_hat <= sum(s.p_hat for s in singles) + 3 * combined


def test_total_matches_product_rule_for_separated_obstacles():
    obstacles = [box_obstacle([x, 2.0], 0.4, oid=f"o{x}") for x in (-4.0, 4.0)]
    fp = footprints()
    n = 40_000
    total = mc_total(fp, obstacles, n, seed=5)
    singles = [mc_single(fp, o, n, seed=(9, k)) for k, o in enumerate(obstacles)]
    p = np.array([s.p_hat for s in singles])
    predicted = 1 - np.prod(1 - p)
    # first-order propagation of the single-estimate errors
    err = np.sqrt(total.stderr ** 2 + sum(((1 - p[1 - k]) * singles[k].stderr) ** 2
                                          for k in range(2)))
    assert abs(total.p_hat - predicted) <= 3 * err


def test_seeded_estimates_repeat_and_differ():
    obs = box_obstacle([0, 1.8], 0.6)
    fp = footprints()
    assert mc_single(fp, obs, 5000, seed=11) == mc_single(fp, obs, 5000, seed=11)
    assert mc_single(fp, obs, 5000, seed=11).p_hat != mc_single(fp, obs, 5000, seed=12).p_hat


def test_stderr_halves_when_samples_quadruple():
    obs = box_obstacle([0, 1.8], 0.6)
    fp = footprints()
    small = mc_single(fp, obs, 10_000, seed=4)
    big = mc_single(fp, obs, 40_000, seed=4)
    assert 0.1 < small.p_hat < 0.9
    assert abs(small.stderr / big.stderr - 2.0) <= 0.2 * 2.0


def test_non_convex_obstacle_rejected():
    l_shape = Polygon([[0, 0], [2, 0], [2, 0.5], [0.5, 0.5], [0.5, 2], [0, 2]])
    with pytest.raises(UnsupportedShapeError):
        mc_single(footprints(), Obstacle(l_shape, LocationDensity.point([0, 0])), 2000)


def test_too_few_samples_rejected():
    with pytest.raises(InvalidInputError):
        mc_single(footprints(), box_obstacle([0, 0], 0.1), 999)


def _segments_cross(p, q, r, s):
    d = lambda a, b, c: (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    return d(p, q, r) * d(p, q, s) < 0 and d(r, s, p) * d(r, s, q) < 0


def _polygons_overlap(a, b):
    """Edge crossings or containment, without separating axes."""
    if MplPath(a).contains_points(b).any() or MplPath(b).contains_points(a).any():
        return True
    ea = list(zip(a, np.roll(a, -1, axis=0)))
    eb = list(zip(b, np.roll(b, -1, axis=0)))
    return any(_segments_cross(p, q, r, s) for p, q in ea for r, s in eb)


def test_separating_axis_matches_polygon_intersection():
    rng = np.random.default_rng(0)
    fp = footprints(0.3)[::7]
    shape = Polygon(Polygon.rectangle(1.5, 0.8).vertices @ np.array([[0.8, -0.6], [0.6, 0.8]]).T)
    pts = rng.uniform([-8, -4], [8, 4], size=(2000, 2))
    got = _SweptSat(fp, shape).hits(pts)
    want = np.array([any(_polygons_overlap(shape.vertices + r, f) for f in fp) for r in pts])
    assert np.array_equal(got, want)


def test_sampled_moments_match_density():
    rng = np.random.default_rng(1)
    p = LocationDensity("gaussian", [1.0, -2.0], [[0.5, 0.2], [0.2, 0.3]])
    r = sample_locations(p, 200_000, rng)
    assert np.allclose(r.mean(axis=0), [1.0, -2.0], atol=0.01)
    assert np.allclose(np.cov(r.T), p.cov, atol=0.01)


def test_singular_axis_aligned_density_sampled_on_a_line():
    rng = np.random.default_rng(2)
    p = LocationDensity.gaussian([0, 3], [0.5, 0.0])
    r = sample_locations(p, 1000, rng)
    assert np.all(r[:, 1] == 3.0) and r[:, 0].std() > 0.3
