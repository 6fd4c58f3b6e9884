import numpy as np
import pytest

from photosr import photometry as ph
from photosr.core import CameraIntrinsics, ColorGrid, LightingVector, ScalarGrid
from photosr.operators import SizeMismatchError


def surface_normal_by_cross_product(z_fn, zx, zy, xs, ys, cam):
    """Normal of the back-projected surface X(x, y) = z (x - x0, y - y0, f) / f."""
    x0, y0 = cam.p0
    z = z_fn(xs, ys)
    ray = np.stack([(xs - x0) / cam.f, (ys - y0) / cam.f, np.ones_like(xs)], axis=-1)
    tx = zx[..., None] * ray + z[..., None] * np.array([1 / cam.f, 0, 0])
    ty = zy[..., None] * ray + z[..., None] * np.array([0, 1 / cam.f, 0])
    n = np.cross(tx, ty)
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    return np.where(n[..., 2:3] > 0, -n, n)


def test_fronto_parallel_plane_faces_camera():
    cam = CameraIntrinsics(50.0, (4.0, 3.0))
    nf = ph.normals_from_depth(ScalarGrid.from_array(np.full((7, 9), 2.0)), cam)
    assert np.allclose(nf.n, [0.0, 0.0, -1.0])
    assert np.allclose(nf.d, 2.0)


def test_linear_depth_normals_match_cross_product():
    cam = CameraIntrinsics(30.0, (6.0, 4.0))
    ys, xs = np.mgrid[0:9, 0:13].astype(float)
    z_fn = lambda x, y: 5.0 + 0.3 * x - 0.2 * y
    nf = ph.normals_from_depth(ScalarGrid.from_array(z_fn(xs, ys)), cam)
    ref = surface_normal_by_cross_product(z_fn, 0.3 * np.ones_like(xs), -0.2 * np.ones_like(xs), xs, ys, cam)
    assert np.max(np.abs(nf.n[:-1, :-1] - ref[:-1, :-1])) < 1e-12


def test_normals_are_unit_and_nan_off_mask(rng):
    cam = CameraIntrinsics(20.0, (5.0, 5.0))
    vals = 3.0 + 0.1 * rng.normal(size=(10, 10))
    valid = rng.random((10, 10)) > 0.2
    nf = ph.normals_from_depth(ScalarGrid(vals, valid), cam)
    assert np.allclose(np.linalg.norm(nf.n[valid], axis=-1), 1.0)
    assert np.isnan(nf.n[~valid]).all()


def test_zero_depth_is_degenerate():
    cam = CameraIntrinsics(20.0, (1.0, 1.0))
    with pytest.raises(ValueError):
        ph.normals_from_depth(ScalarGrid.from_array(np.zeros((3, 3))), cam)


def test_shading_and_ambient_only_render():
    cam = CameraIntrinsics(20.0, (3.0, 3.0))
    z = ScalarGrid.from_array(np.full((6, 6), 1.0))
    nf = ph.normals_from_depth(z, cam)
    assert np.allclose(ph.shading(nf, [0.2, 0.1, -0.5, 0.3]).values, 0.8)
    rho = ColorGrid.from_array(np.random.default_rng(1).random((6, 6, 3)))
    amb = LightingVector(np.array([[0, 0, 0, 1.0]] * 3))
    assert np.allclose(ph.render(z, rho, amb, cam).values, rho.values)


def test_pde_residual_equals_render_minus_image(rng):
    cam = CameraIntrinsics(25.0, (7.5, 5.0))
    z = ScalarGrid.from_array(4.0 + 0.3 * rng.random((11, 16)))
    rho = ColorGrid.from_array(rng.random((11, 16, 3)))
    l = LightingVector(rng.normal(size=(3, 4)))
    img = ColorGrid.from_array(rng.random((11, 16, 3)))
    r = ph.pde_residual(z, rho, l, img, cam)
    direct = ph.render(z, rho, l, cam).values - img.values
    assert np.max(np.abs(r.values - direct)) < 1e-12


def test_pde_fields_right_hand_side():
    cam = CameraIntrinsics(10.0, (2.0, 2.0))
    z = ScalarGrid.from_array(np.full((5, 5), 2.0))
    rho = ColorGrid.from_array(np.full((5, 5, 3), 0.5))
    l = LightingVector(np.tile([0.1, 0.2, -0.7, 0.25], (3, 1)))
    f = ph.pde_fields(z, rho, l, cam)
    assert f.A.shape == (5, 5, 3, 3)
    img = ColorGrid.from_array(np.ones((5, 5, 3)))
    assert np.allclose(f.rhs(img), 1.0 - 0.125)


def test_render_size_mismatch():
    cam = CameraIntrinsics(10.0, (1.0, 1.0))
    with pytest.raises(SizeMismatchError):
        ph.render(
            ScalarGrid.from_array(np.ones((3, 3))),
            ColorGrid.from_array(np.ones((3, 4, 3))),
            LightingVector(np.zeros((3, 4))),
            cam,
        )
