import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from photosr import io
from photosr.core import CameraIntrinsics, ColorGrid, LightingVector, ScalarGrid
from photosr.operators import DownsampleKernel, difference_masks, gradient_adjoint_arrays, gradient_arrays
from photosr.photometry import pde_residual, render

seeds = st.integers(0, 2 ** 32 - 1)


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 4), st.integers(1, 6), st.integers(1, 6), st.floats(0.0, 0.9))
def test_downsample_adjoint_identity(seed, sf, h, w, hole):
    rng = np.random.default_rng(seed)
    valid = rng.random((sf * h, sf * w)) >= hole
    k = DownsampleKernel(sf, valid)
    x = rng.normal(size=valid.shape)
    y = rng.normal(size=k.lr_shape)
    lhs, rhs = np.vdot(k.apply(x), y), np.vdot(x, k.adjoint(y))
    assert abs(lhs - rhs) <= 1e-12 * (1 + np.linalg.norm(x) * np.linalg.norm(y))


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 12), st.integers(1, 12))
def test_gradient_adjoint_identity(seed, h, w):
    rng = np.random.default_rng(seed)
    ex, ey = difference_masks(rng.random((h, w)) > 0.25)
    z, u, v = rng.normal(size=(3, h, w))
    zx, zy = gradient_arrays(z, ex, ey)
    lhs = np.vdot(zx, u) + np.vdot(zy, v)
    rhs = np.vdot(z, gradient_adjoint_arrays(u, v, ex, ey))
    assert abs(lhs - rhs) <= 1e-12 * (1 + np.linalg.norm(z) * np.linalg.norm(np.stack([u, v])))


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(2, 20), st.integers(2, 20))
def test_residual_equals_render_minus_image(seed, h, w):
    rng = np.random.default_rng(seed)
    cam = CameraIntrinsics(rng.uniform(5, 100), (rng.uniform(0, w - 1), rng.uniform(0, h - 1)))
    z = ScalarGrid.from_array(rng.uniform(1, 5, (h, w)))
    rho = ColorGrid.from_array(rng.random((h, w, 3)))
    l = LightingVector(rng.normal(size=(3, 4)))
    img = ColorGrid.from_array(rng.random((h, w, 3)))
    r = pde_residual(z, rho, l, img, cam).values
    assert np.max(np.abs(r - (render(z, rho, l, cam).values - img.values))) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 9), st.integers(1, 9), st.booleans())
def test_pfm_round_trip(tmp_path_factory, seed, h, w, color):
    rng = np.random.default_rng(seed)
    shape = (h, w, 3) if color else (h, w)
    a = (rng.normal(size=shape) * 10.0 ** rng.integers(-30, 30, size=shape)).astype(np.float32).astype(float)
    path = tmp_path_factory.mktemp("pfm") / "a.pfm"
    io.write_pfm(path, a)
    assert np.array_equal(io.read_pfm(path), a)


@given(st.lists(st.floats(-1e6, 1e6), min_size=12, max_size=12))
def test_lighting_flat_round_trip(values):
    l = LightingVector.from_flat(values)
    assert LightingVector.from_flat(l.to_flat()) == l
