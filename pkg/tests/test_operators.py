import numpy as np
import pytest

from photosr import operators as ops
from photosr.core import ScalarGrid
from photosr.operators import DownsampleKernel, SizeMismatchError


def dense_gradient(valid):
    """Row-by-row forward-difference matrices built with explicit loops."""
    h, w = valid.shape
    gx = np.zeros((h * w, h * w))
    gy = np.zeros((h * w, h * w))
    for y in range(h):
        for x in range(w):
            i = y * w + x
            if x + 1 < w and valid[y, x] and valid[y, x + 1]:
                gx[i, i], gx[i, i + 1] = -1.0, 1.0
            if y + 1 < h and valid[y, x] and valid[y + 1, x]:
                gy[i, i], gy[i, i + w] = -1.0, 1.0
    return gx, gy


def test_gradient_of_ramp():
    h, w = 5, 6
    ys, xs = np.mgrid[0:h, 0:w]
    zx, zy = ops.gradient(ScalarGrid.from_array(2.0 * xs + 3.0 * ys))
    assert np.all(zx.values[:, :-1] == 2.0) and np.all(zx.values[:, -1] == 0.0)
    assert np.all(zy.values[:-1] == 3.0) and np.all(zy.values[-1] == 0.0)


def test_gradient_matches_dense_oracle(rng):
    valid = rng.random((6, 7)) > 0.2
    z = rng.normal(size=valid.shape)
    gx, gy = dense_gradient(valid)
    ex, ey = ops.difference_masks(valid)
    zx, zy = ops.gradient_arrays(z, ex, ey)
    assert np.allclose(zx.ravel(), gx @ z.ravel(), atol=1e-14)
    assert np.allclose(zy.ravel(), gy @ z.ravel(), atol=1e-14)
    u, v = rng.normal(size=(2,) + valid.shape)
    adj = ops.gradient_adjoint_arrays(u, v, ex, ey)
    assert np.allclose(adj.ravel(), gx.T @ u.ravel() + gy.T @ v.ravel(), atol=1e-13)


def test_gradient_output_mask_equals_input_mask():
    valid = np.ones((4, 4), bool)
    valid[1, 2] = False
    zx, zy = ops.gradient(ScalarGrid(np.ones((4, 4)), valid))
    assert np.array_equal(zx.valid, valid) and np.array_equal(zy.valid, valid)
    assert zx.values[1, 1] == 0.0  # neighbour invalid


def test_downsample_constant_and_weights():
    k = DownsampleKernel.for_shape((6, 8), 2)
    out = ops.downsample(ScalarGrid.from_array(np.full((6, 8), 3.0)), k)
    assert out.shape == (3, 4) and np.all(out.values == 3.0)
    wts = k.weights(1, 2)
    assert [p for p, _ in wts] == [(2, 4), (3, 4), (2, 5), (3, 5)]
    assert sum(v for _, v in wts) == pytest.approx(1.0)


def test_downsample_ignores_masked_hr_pixels():
    vals = np.array([[1.0, 5.0], [3.0, 100.0]])
    valid = np.array([[1, 1], [1, 0]], bool)
    out = ops.downsample(ScalarGrid(vals, valid), 2)
    assert out.values[0, 0] == pytest.approx(3.0)
    empty = ops.downsample(ScalarGrid(vals, np.zeros((2, 2), bool)), 2)
    assert not empty.valid.any()


def test_downsample_matrix_and_adjoint(rng):
    valid = rng.random((12, 9)) > 0.3
    k = DownsampleKernel(3, valid)
    m = k.as_matrix().toarray()
    x = rng.normal(size=valid.shape)
    y = rng.normal(size=k.lr_shape)
    assert np.allclose(m @ x.ravel(), k.apply(x).ravel(), atol=1e-14)
    assert np.allclose(m.T @ y.ravel(), k.adjoint(y).ravel(), atol=1e-14)
    assert np.isclose(np.vdot(k.apply(x), y), np.vdot(x, k.adjoint(y)), rtol=1e-12)


def test_downsample_size_errors():
    with pytest.raises(SizeMismatchError):
        ops.downsample(ScalarGrid.from_array(np.ones((5, 4))), 2)
    k = DownsampleKernel.for_shape((4, 4), 2)
    with pytest.raises(SizeMismatchError):
        k.apply(np.ones((6, 4)))
    with pytest.raises(SizeMismatchError):
        ops.downsample_adjoint(ScalarGrid.from_array(np.ones((3, 3))), k)


def test_bilaplacian_exact_on_polynomials():
    ys, xs = np.mgrid[0:9, 0:9].astype(float)
    assert np.allclose(ops.bilaplacian(xs ** 2 * ys ** 2)[2:-2, 2:-2], 8.0)
    assert np.allclose(ops.bilaplacian(xs ** 4)[2:-2, 2:-2], 24.0)
    assert np.allclose(ops.bilaplacian(3 * xs ** 3 - xs * ys ** 2 + 2)[2:-2, 2:-2], 0.0, atol=1e-9)
    assert np.isnan(ops.bilaplacian(xs)[1, 4])


def test_inpaint_reproduces_interior_quadratic(rng):
    ys, xs = np.mgrid[0:20, 0:24].astype(float)
    u = 0.01 * xs ** 2 - 0.02 * xs * ys + 0.5 * ys + 2.0
    valid = np.ones(u.shape, bool)
    valid[4:15, 5:12] = False
    valid[2:18:3, 15:22:2] = False
    out = ops.inpaint_biharmonic(ScalarGrid(u, valid))
    assert out.valid.all()
    assert np.max(np.abs(out.values - u)) < 1e-9


def test_inpaint_border_holes_use_harmonic_rows():
    u = np.full((10, 10), 4.0)
    valid = np.ones_like(u, bool)
    valid[0, :3] = False
    valid[:2, -1] = False
    out = ops.inpaint_biharmonic(ScalarGrid(u, valid))
    assert np.allclose(out.values, 4.0, atol=1e-12)


def test_inpaint_iterative_path_matches_direct(monkeypatch, rng):
    u = rng.normal(size=(16, 16)).cumsum(axis=0).cumsum(axis=1) * 0.1
    valid = rng.random(u.shape) > 0.4
    direct = ops.inpaint_biharmonic(ScalarGrid(u, valid)).values
    monkeypatch.setattr(ops, "DIRECT_SOLVE_MAX_UNKNOWNS", 0)
    iterative = ops.inpaint_biharmonic(ScalarGrid(u, valid)).values
    assert np.max(np.abs(direct - iterative)) < 1e-5 * np.max(np.abs(direct))


def test_inpaint_needs_a_valid_pixel():
    with pytest.raises(ValueError):
        ops.inpaint_biharmonic(ScalarGrid(np.ones((4, 4)), np.zeros((4, 4), bool)))


def test_bicubic_reproduces_constants_and_samples():
    lr = ScalarGrid.from_array(np.full((4, 5), 7.0))
    assert np.allclose(ops.upsample_bicubic(lr, 2).values, 7.0, atol=1e-14)
    vals = np.random.default_rng(3).normal(size=(5, 6))
    hr = ops.upsample_bicubic(ScalarGrid.from_array(vals), 3).values
    # odd factor: HR pixel 3x + 1 sits exactly on LR centre x
    assert np.allclose(hr[1::3, 1::3], vals, atol=1e-14)
    assert np.allclose(ops.upsample_bicubic(ScalarGrid.from_array(vals), 1).values, vals)


def test_bicubic_reproduces_linear_ramp_away_from_border():
    ys, xs = np.mgrid[0:8, 0:10].astype(float)
    hr = ops.upsample_bicubic(ScalarGrid.from_array(2 * xs - ys), 2).values
    hys, hxs = np.mgrid[0:16, 0:20].astype(float)
    exact = 2 * (hxs - 0.5) / 2 - (hys - 0.5) / 2
    assert np.allclose(hr[3:-3, 3:-3], exact[3:-3, 3:-3], atol=1e-12)


def test_bicubic_rejects_holes():
    g = ScalarGrid(np.ones((3, 3)), np.eye(3, dtype=bool))
    with pytest.raises(ValueError):
        ops.upsample_bicubic(g, 2)
