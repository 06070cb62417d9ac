import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from matplotlib.path import Path as MplPath

from fprisk.errors import InvalidInputError, InvalidShapeError
from fprisk.geometry import (GridSpec, Polygon, Pose2, ScalarField, grid_for_bounds,
                             minkowski_dilate, obstacle_kernel, polygon_area, rasterize_polygon,
                             resample_poses, swept_indicator, wrap_angle)


def brute_force_raster(world_vertices, spec):
    """Cell-center membership via matplotlib's point-in-polygon, boundary padded."""
    xs, ys = np.meshgrid(spec.xs(), spec.ys())
    pts = np.column_stack([xs.ravel(), ys.ravel()])
    inside = MplPath(world_vertices).contains_points(pts, radius=1e-9) | \
        MplPath(world_vertices).contains_points(pts, radius=-1e-9)
    return inside.reshape(spec.shape)


def random_convex(rng, n=6, scale=1.5):
    pts = rng.normal(size=(40, 2)) * scale
    from fprisk.geometry import convex_hull
    return Polygon(convex_hull(pts))


# -- Pose2 / Polygon ---------------------------------------------------------

@pytest.mark.parametrize("theta,expected", [(math.pi, math.pi), (-math.pi, math.pi),
                                            (3 * math.pi, math.pi), (0.5, 0.5),
                                            (2 * math.pi + 0.1, 0.1)])
def test_pose_heading_wraps_into_half_open_interval(theta, expected):
    assert Pose2(0, 0, theta).theta == pytest.approx(expected)


def test_wrap_angle_vectorised():
    out = wrap_angle(np.array([-math.pi, 0.0, 7.0]))
    assert np.all(out > -math.pi) and np.all(out <= math.pi)


def test_polygon_area_examples():
    assert polygon_area(Polygon([[0, 0], [1, 0], [1, 1], [0, 1]])) == 1.0
    assert polygon_area(Polygon([[0, 0], [1, 0], [0, 1]])) == 0.5
    assert polygon_area(Polygon.rectangle(4, 2)) == 8.0


def test_clockwise_input_is_reoriented():
    p = Polygon([[0, 0], [0, 1], [1, 1], [1, 0]])
    assert p.area > 0
    assert np.array_equal(p.vertices[0], [1, 0])


def test_degenerate_and_self_intersecting_polygons_rejected():
    with pytest.raises(InvalidShapeError):
        Polygon([[0, 0], [1, 1], [2, 2]])
    with pytest.raises(InvalidShapeError):
        Polygon([[0, 0], [1, 1], [1, 0], [0, 1]])
    with pytest.raises(InvalidShapeError):
        Polygon([[0, 0], [1, 0]])


def test_inflated_contains_original_and_disc():
    p = Polygon.rectangle(2, 1).inflated(0.5)
    assert p.is_convex()
    # distance from each original edge midpoint outward by 0.5 stays inside
    for pt in [(1.49, 0), (0, 0.99), (-1.49, 0), (0, -0.99)]:
        assert MplPath(p.vertices).contains_point(pt)


# -- rasterisation -----------------------------------------------------------

def test_unit_square_fills_two_by_two_grid():
    spec = GridSpec((0.25, 0.25), 0.5, 2, 2)
    f = rasterize_polygon(Polygon([[0, 0], [1, 0], [1, 1], [0, 1]]), Pose2(0, 0, 0), spec)
    assert np.all(f.samples == 1)
    assert f.integral() == 1.0


def test_polygon_outside_grid_is_all_zero():
    spec = GridSpec((0.0, 0.0), 0.1, 20, 20)
    f = rasterize_polygon(Polygon.rectangle(1, 1), Pose2(50, 50, 0), spec)
    assert not f.samples.any()


def test_rotated_square_area_mean_over_placements():
    sq = Polygon.rectangle(2, 2)
    spec = GridSpec.covering((-2, -2, 2, 2), 0.05)
    rng = np.random.default_rng(0)
    areas = []
    for _ in range(40):
        dx, dy = rng.uniform(0, 0.05, 2)
        areas.append(rasterize_polygon(sq, (dx, dy, math.pi / 4), spec).integral())
    areas = np.array(areas)
    bound = 2 * sq.perimeter * 0.05
    assert np.all(np.abs(areas - 4.0) <= bound)
    assert abs(areas.mean() - 4.0) / 4.0 < 0.005


def test_matches_brute_force_point_in_polygon():
    rng = np.random.default_rng(1)
    spec = GridSpec.covering((-3, -3, 3, 3), 0.1)
    for _ in range(20):
        poly = random_convex(rng)
        pose = (rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-3, 3))
        got = rasterize_polygon(poly, pose, spec).samples.astype(bool)
        want = brute_force_raster(poly.posed(pose), spec)
        assert np.array_equal(got, want)


def test_non_convex_polygon_matches_brute_force():
    l_shape = Polygon([[0, 0], [2, 0], [2, 0.5], [0.5, 0.5], [0.5, 2], [0, 2]])
    spec = GridSpec.covering((-1, -1, 3, 3), 0.05)
    got = rasterize_polygon(l_shape, (0.013, 0.021, 0.3), spec).samples.astype(bool)
    assert np.array_equal(got, brute_force_raster(l_shape.posed((0.013, 0.021, 0.3)), spec))


def test_boundary_cells_count_as_inside():
    # edges pass exactly through cell centers
    spec = GridSpec((0.0, 0.0), 0.5, 5, 5)
    f = rasterize_polygon(Polygon([[0, 0], [1, 0], [1, 1], [0, 1]]), Pose2(0, 0, 0), spec)
    assert f.samples[:3, :3].all() and f.samples.sum() == 9


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.02, 0.2))
def test_raster_area_error_bounded_by_perimeter(seed, res):
    poly = random_convex(np.random.default_rng(seed))
    spec = GridSpec.covering((-6, -6, 6, 6), res)
    area = rasterize_polygon(poly, (0.0, 0.0, 0.0), spec).integral()
    assert abs(area - poly.area) <= 2 * poly.perimeter * res


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(-50, 50), st.floats(-50, 50))
def test_translating_polygon_and_grid_together_is_bit_identical(seed, tx, ty):
    rng = np.random.default_rng(seed)
    poly = random_convex(rng)
    pose = (rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-3, 3))
    spec = GridSpec((-4.0, -4.0), 0.1, 80, 80)
    moved = GridSpec((-4.0 + tx, -4.0 + ty), 0.1, 80, 80)
    a = rasterize_polygon(poly, pose, spec).samples
    b = rasterize_polygon(poly, (pose[0] + tx, pose[1] + ty, pose[2]), moved).samples
    assert np.array_equal(a, b)


def test_conservative_raster_contains_centre_raster():
    rng = np.random.default_rng(3)
    spec = GridSpec.covering((-3, -3, 3, 3), 0.1)
    for _ in range(10):
        poly = random_convex(rng)
        c = rasterize_polygon(poly, (0, 0, 0), spec).samples
        k = rasterize_polygon(poly, (0, 0, 0), spec, conservative=True).samples
        assert np.all(k >= c)


# -- swept areas --------------------------------------------------------------

ROBOT = Polygon.rectangle(4, 2)


def test_single_pose_sweep_equals_rasterisation():
    spec = GridSpec.covering((-5, -5, 5, 5), 0.05)
    pose = (0.3, -0.2, 0.7)
    a = swept_indicator(np.array([pose]), ROBOT, spec).samples
    b = rasterize_polygon(ROBOT, pose, spec).samples
    assert np.array_equal(a, b)


def test_straight_sweep_area_closed_form():
    spec = GridSpec.covering((-5, -5, 16, 5), 0.05)
    path = np.array([[0, 0, 0], [10, 0, 0]], dtype=float)
    area = swept_indicator(path, ROBOT, spec).integral()
    assert abs(area - 28.0) / 28.0 < 0.01


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.floats(-9, 9), st.floats(-9, 9), st.floats(-math.pi, math.pi)),
                min_size=1, max_size=5))
def test_sweep_support_box_holds_every_cell(poses):
    # the grid is smaller than the pose range, so boxes get clipped too
    spec = GridSpec.covering((-6, -4, 6, 4), 0.05)
    field = swept_indicator(np.array(poses), ROBOT, spec)
    r0, r1, c0, c1 = field.support
    assert 0 <= r0 <= r1 <= spec.height and 0 <= c0 <= c1 <= spec.width
    rows, cols = np.nonzero(field.samples)
    assert np.all((rows >= r0) & (rows < r1) & (cols >= c0) & (cols < c1))


def test_forward_then_back_equals_forward():
    spec = GridSpec.covering((-5, -6, 16, 6), 0.05)
    fwd = np.array([[0, 0, 0], [3, 0.5, 0.2], [6, 1.5, 0.4], [9, 2.0, 0.1]])
    both = np.vstack([fwd, fwd[-2::-1]])
    a = swept_indicator(fwd, ROBOT, spec).samples
    b = swept_indicator(both, ROBOT, spec).samples
    assert np.array_equal(a, b)


def test_reversal_invariance():
    spec = GridSpec.covering((-5, -6, 16, 6), 0.05)
    path = np.array([[0, 0, 0], [2, 0.3, 0.25], [4, 1.0, 0.5], [6, 2.2, 0.6]])
    assert np.array_equal(swept_indicator(path, ROBOT, spec).samples,
                          swept_indicator(path[::-1], ROBOT, spec).samples)


def test_refinement_changes_only_boundary_cells():
    spec = GridSpec.covering((-5, -6, 16, 6), 0.05)
    coarse = np.array([[0, 0, 0], [10, 0, 0]], dtype=float)
    fine = np.column_stack([np.linspace(0, 10, 41), np.zeros(41), np.zeros(41)])
    a = swept_indicator(coarse, ROBOT, spec).samples
    b = swept_indicator(fine, ROBOT, spec).samples
    assert np.array_equal(a, b)


def test_resampling_bounds_footprint_motion():
    path = np.array([[0, 0, 0], [5, 1, 1.0], [7, 4, 2.5]])
    res = 0.05
    poses = resample_poses(path, ROBOT, res)
    step = np.hypot(*np.diff(poses[:, :2], axis=0).T) + \
        np.abs(wrap_angle(np.diff(poses[:, 2]))) * ROBOT.radius
    assert step.max() <= 0.5 * res + 1e-12


def test_empty_path_rejected():
    spec = GridSpec.covering((-1, -1, 1, 1), 0.05)
    with pytest.raises(InvalidInputError):
        swept_indicator(np.zeros((0, 3)), ROBOT, spec)


# -- Minkowski dilation -------------------------------------------------------

def test_dilation_by_single_cell_is_identity():
    spec = GridSpec.covering((-3, -3, 3, 3), 0.05)
    a = rasterize_polygon(Polygon([[0, 0], [2, 0.3], [1, 2]]), (0, 0, 0), spec)
    point = ScalarField(GridSpec.centered(0, 0, 0.05), np.ones((1, 1)))
    assert np.array_equal(minkowski_dilate(a, point).samples, a.samples)


def test_square_plus_square_area():
    spec = GridSpec.covering((-4, -4, 4, 4), 0.05)
    a = rasterize_polygon(Polygon.rectangle(2, 2), (0, 0, 0), spec)
    b = obstacle_kernel(Polygon.rectangle(1, 1), 0.05)
    area = minkowski_dilate(a, b).integral()
    assert abs(area - 9.0) / 9.0 < 0.02


def test_conservative_kernel_gives_continuous_sum_width():
    # 2 x 1 swept rectangle dilated by a 1 x 1 square: continuous sum is 3 x 2
    spec = GridSpec.covering((-4, -4, 4, 4), 0.05)
    a = rasterize_polygon(Polygon.rectangle(2, 1), (0, 0, 0), spec)
    b = obstacle_kernel(Polygon.rectangle(1, 1), 0.05, conservative=True)
    d = minkowski_dilate(a, b).samples
    assert d.sum(axis=1).max() == 60 and d.sum(axis=0).max() == 40


def test_dilation_area_commutes():
    spec = GridSpec.centered(60, 60, 0.05)
    a = rasterize_polygon(Polygon([[0, 0], [1.5, 0.2], [0.4, 1.1]]), (0, 0, 0), spec)
    b = rasterize_polygon(Polygon.rectangle(0.8, 0.3), (0, 0, 0.4), spec)
    assert minkowski_dilate(a, b).samples.sum() == minkowski_dilate(b, a).samples.sum()


def test_dilation_matches_brute_force_set_sum():
    from scipy.signal import convolve2d
    rng = np.random.default_rng(5)
    a = (rng.random((30, 30)) < 0.1).astype(float)
    b = (rng.random((5, 7)) < 0.4).astype(float)
    b[2, 3] = 1
    fa = ScalarField(GridSpec((0, 0), 1.0, 30, 30), a)
    fb = ScalarField(GridSpec.centered(3, 2, 1.0), b)
    got = minkowski_dilate(fa, fb).samples
    want = np.zeros_like(a)
    for j, i in zip(*np.nonzero(a)):
        for bj, bi in zip(*np.nonzero(b)):
            r, c = j + bj - 2, i + bi - 3
            if 0 <= r < 30 and 0 <= c < 30:
                want[r, c] = 1
    assert np.array_equal(got, want)
    assert np.array_equal(got, convolve2d(a, b, mode="same") > 0.5)


def test_dilation_rejects_non_indicator():
    spec = GridSpec((0, 0), 1.0, 4, 4)
    with pytest.raises(InvalidInputError):
        minkowski_dilate(ScalarField(spec, np.full((4, 4), 0.5)), ScalarField(spec, np.ones((4, 4))))


def test_scenario_grid_padding_rule():
    spec = grid_for_bounds((0, 0, 10, 5), 0.05, sigma_cells=2, max_std=0.3)
    x0, y0, x1, y1 = spec.extent
    pad = 4 * 2 * 0.05 + 3 * 0.3
    assert x0 <= -pad and y0 <= -pad and x1 >= 10 + pad and y1 >= 5 + pad
    assert x1 - x0 < 10 + 2 * pad + 2 * 0.05
