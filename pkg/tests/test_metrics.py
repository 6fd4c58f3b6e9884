import math

import numpy as np
import pytest

from photosr import metrics
from photosr.core import CameraIntrinsics, ColorGrid, LightingVector, ScalarGrid
from photosr.operators import SizeMismatchError

from conftest import small_dataset


def test_rmse_identity_offset_and_naive_oracle(rng):
    z = ScalarGrid.from_array(rng.random((8, 9)) + 1)
    assert metrics.rmse_depth(z, z) == 0.0
    assert metrics.rmse_depth(ScalarGrid.from_array(z.values + 0.25), z) == pytest.approx(0.25)
    a = rng.random((8, 9))
    b = rng.random((8, 9))
    valid = rng.random((8, 9)) > 0.3
    total, count = 0.0, 0
    for y in range(8):
        for x in range(9):
            if valid[y, x]:
                total += (a[y, x] - b[y, x]) ** 2
                count += 1
    assert metrics.rmse_depth(ScalarGrid(a, valid), ScalarGrid.from_array(b)) == pytest.approx(math.sqrt(total / count))


def test_metric_errors():
    a = ScalarGrid.from_array(np.ones((4, 4)))
    with pytest.raises(SizeMismatchError):
        metrics.rmse_depth(a, ScalarGrid.from_array(np.ones((4, 5))))
    with pytest.raises(ValueError):
        metrics.rmse_depth(a, ScalarGrid(np.ones((4, 4)), np.zeros((4, 4), bool)))


def test_mae_identity_and_global_scaling():
    d = small_dataset(n=4)
    z = d.ground_truth.depth
    cam = d.intrinsics
    assert metrics.mae_normals(z, z, cam) == 0.0
    # every component of the perspective normal scales with the depth
    scaled = ScalarGrid.from_array(1.7 * z.values)
    assert metrics.mae_normals(scaled, z, cam) < 1e-6
    relief = ScalarGrid.from_array(10.0 + 1.7 * (z.values - 10.0))
    assert metrics.mae_normals(relief, z, cam) > 1.0


def test_slanted_plane_is_45_degrees_off_fronto_parallel():
    cam = CameraIntrinsics(2000.0, (31.5, 31.5))
    ys, xs = np.mgrid[0:64, 0:64].astype(float)
    # 3-D plane Z = Z0 + X seen through the pinhole
    slanted = 50.0 / (1.0 - (xs - 31.5) / cam.f)
    err = metrics.angular_error_map(
        ScalarGrid.from_array(slanted), ScalarGrid.from_array(np.full((64, 64), 50.0)), cam
    )
    assert np.max(np.abs(err[1:-1, 1:-1] - 45.0)) < 0.05


def test_relight_reproduces_input_image():
    d = small_dataset(n=4)
    gt = d.ground_truth
    img = metrics.relight(gt.depth, gt.albedo, gt.lighting[2], d.intrinsics, clamp=False)
    assert np.max(np.abs(img.values - d.images[2].values)) < 1e-6


def test_relight_ambient_only_gives_albedo_and_is_linear(rng):
    d = small_dataset(n=4)
    gt = d.ground_truth
    amb = LightingVector(np.array([[0, 0, 0, 1.0]] * 3))
    assert np.allclose(metrics.relight(gt.depth, gt.albedo, amb, d.intrinsics).values, gt.albedo.values)
    l1, l2 = LightingVector(rng.normal(size=(3, 4))), LightingVector(rng.normal(size=(3, 4)))
    r = lambda l: metrics.relight(gt.depth, gt.albedo, l, d.intrinsics, clamp=False).values
    assert np.allclose(r(l1) + r(l2), r(LightingVector(l1.coeffs + l2.coeffs)), atol=1e-12)
    clamped = metrics.relight(gt.depth, gt.albedo, LightingVector(3 * l1.coeffs), d.intrinsics)
    assert clamped.values.min() >= 0 and clamped.values.max() <= 1


def test_eval_report_validation():
    rep = metrics.EvalReport(0.1, 2.0, [3.0, 2.0], 2, 1.5, {"lambda": 0.1})
    assert rep.as_dict()["config_echo"] == {"lambda": 0.1}
    with pytest.raises(ValueError):
        metrics.EvalReport(-1.0, 0.0)
    with pytest.raises(ValueError):
        metrics.EvalReport(0.0, 181.0)
