import numpy as np
import pytest
from conftest import CAR, box_obstacle, straight_path

from fprisk import render
from fprisk.geometry import GridSpec, Pose2, ScalarField
from fprisk.risk import precompute_fields
from fprisk.scenario import Scenario


def test_ppm_header_is_bit_exact():
    data = render.ppm_bytes(np.zeros((3, 5, 3), dtype=np.uint8))
    assert data.startswith(b"P6\n5 3\n255\n")
    assert len(data) == len(b"P6\n5 3\n255\n") + 45


def test_ppm_round_trip():
    rng = np.random.default_rng(0)
    img = rng.integers(0, 256, (7, 4, 3), dtype=np.uint8)
    assert np.array_equal(render.read_ppm(render.ppm_bytes(img)), img)


def test_ppm_rejects_bad_shape():
    with pytest.raises(ValueError):
        render.ppm_bytes(np.zeros((3, 3)))


def test_ramp_endpoints_and_log_scale():
    assert tuple(render.ramp(0.0)) == (0, 0, 255)
    assert tuple(render.ramp(1.0)) == (255, 0, 0)
    assert render.risk_color(1.0) == (255, 0, 0)
    assert render.risk_color(1e-5) == (0, 0, 255)
    assert render.risk_color(0.0) == (0, 0, 255)
    assert render.risk_color(50.0) == (255, 0, 0)
    assert render.risk_color(10 ** -2.5) == (128, 0, 128)


def test_zero_field_heatmap_is_uniform():
    spec = GridSpec((0, 0), 0.05, 30, 20)
    img = render.heatmap(ScalarField.zeros(spec))
    assert img.shape == (20, 30, 3)
    assert np.all(img == img[0, 0])


def test_empty_scene_paths_image_is_background():
    spec = GridSpec((0, 0), 0.05, 30, 20)
    img, missing = render.paths_image(spec, [], {})
    assert np.all(img == render.BACKGROUND) and missing == []


def test_heatmap_peak_sits_on_density_mean():
    spec = GridSpec.covering((-6, -6, 6, 6), 0.05)
    rf = precompute_fields([box_obstacle([1.3, -0.7], 0.3, 2.0, 2.0)], spec)
    img = render.heatmap(rf.g)
    # 8-bit quantisation flattens the peak, so take the centroid of the
    # brightest pixels, in grid orientation
    red = img[..., 0][::-1]
    rows, cols = np.nonzero(red == red.max())
    r, c = rows.mean(), cols.mean()
    mr, mc = spec.nearest_cell(1.3, -0.7)
    assert abs(r - mr) <= 2 and abs(c - mc) <= 2


def test_image_is_north_up():
    spec = GridSpec((0, 0), 1.0, 4, 4)
    a = np.zeros((4, 4))
    a[3, 0] = 1.0  # top-left in world terms
    img = render.heatmap(ScalarField(spec, a))
    assert tuple(img[0, 0]) == (255, 0, 0)


def test_missing_risk_drawn_grey_and_reported():
    spec = GridSpec.covering((-9, -3, 9, 3), 0.05)
    paths = [straight_path(-8, 8, -1.0, "known"), straight_path(-8, 8, 1.0, "lost")]
    img, missing = render.paths_image(spec, paths, {"known": 1.0})
    assert missing == ["lost"]
    grid = img[::-1]
    r_known = spec.nearest_cell(0, -1.0)
    r_lost = spec.nearest_cell(0, 1.0)
    assert tuple(grid[r_known]) == (255, 0, 0)
    assert tuple(grid[r_lost]) == render.MISSING


def test_obstacle_mask_marks_mean_footprints():
    sc = Scenario(CAR, [box_obstacle([2, 0], 0.3, 2, 1)], Pose2(-5, 0, 0), Pose2(5, 0, 0))
    spec = GridSpec.covering((-6, -3, 6, 3), 0.05)
    mask = render.obstacle_mask(sc, spec)
    assert abs(mask.sum() * spec.cell_area - 2.0) < 0.1
    assert mask[spec.nearest_cell(2, 0)] and not mask[spec.nearest_cell(-2, 0)]


def test_figures_are_written_and_reproducible(tmp_path):
    spec = GridSpec.covering((-9, -3, 9, 3), 0.05)
    g = precompute_fields([box_obstacle([0, 2], 0.3)], spec).g
    paths = [straight_path(-8, 8, y, f"p{i}") for i, y in enumerate((-1, 0, 1))]
    risks = {"p0": 1e-4, "p1": 0.03}
    for run in ("a", "b"):
        render.risk_map_figure(tmp_path / f"map_{run}.png", g, paths, risks)
        render.histogram_figure(tmp_path / f"hist_{run}.png", [1e-4, 0.03, 0.5], [5e-5, 0.01, 0.2])
    for name in ("map", "hist"):
        a = (tmp_path / f"{name}_a.png").read_bytes()
        assert a[:8] == b"\x89PNG\r\n\x1a\n"
        assert a == (tmp_path / f"{name}_b.png").read_bytes()
