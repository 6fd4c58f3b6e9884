"""Lambertian image formation under first-order spherical-harmonics lighting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CameraIntrinsics, ColorGrid, LightingVector, ScalarGrid
from .operators import SizeMismatchError, difference_masks, gradient_arrays


@dataclass(frozen=True, eq=False)
class NormalField:
    """Unit normals ``n`` (H, W, 3) and the normaliser ``d`` (H, W); NaN off-mask."""

    n: np.ndarray
    d: np.ndarray
    valid: np.ndarray


@dataclass(frozen=True, eq=False)
class PdeFields:
    """Per-pixel 3x3 matrix ``A`` and the ambient term ``Diag(l4) rho`` (H, W, 3).

    The PDE right-hand side is ``b = I - ambient`` for an image ``I``.
    """

    A: np.ndarray
    ambient: np.ndarray
    valid: np.ndarray

    def rhs(self, image: ColorGrid) -> np.ndarray:
        return image.values - self.ambient


def normal_bracket(z: np.ndarray, zx: np.ndarray, zy: np.ndarray, cam: CameraIntrinsics, xc=None, yc=None) -> np.ndarray:
    """Unnormalised perspective normal ``[f zx, f zy, -z - zx (x - x0) - zy (y - y0)]``."""
    if xc is None:
        xc, yc = cam.centered_coords(z.shape)
    return np.stack([cam.f * zx, cam.f * zy, -z - zx * xc - zy * yc], axis=-1)


def normals_arrays(z: np.ndarray, valid: np.ndarray, cam: CameraIntrinsics) -> tuple:
    """Unit normals and normaliser for a depth array (finite everywhere)."""
    ex, ey = difference_masks(valid)
    zx, zy = gradient_arrays(z, ex, ey)
    br = normal_bracket(z, zx, zy, cam)
    d = np.sqrt(np.einsum("...k,...k->...", br, br))
    with np.errstate(invalid="ignore", divide="ignore"):
        n = br / d[..., None]
    return n, d


def normals_from_depth(z: ScalarGrid, cam: CameraIntrinsics) -> NormalField:
    """Perspective normals of a depth map; fronto-parallel surfaces get (0, 0, -1)."""
    n, d = normals_arrays(z.filled(1.0), z.valid, cam)
    if np.any(d[z.valid] == 0):
        raise ValueError("degenerate normal (d = 0) at a valid pixel; depth must be > 0")
    n[~z.valid] = np.nan
    d = np.where(z.valid, d, np.nan)
    return NormalField(n, d, z.valid.copy())


def shading_arrays(n: np.ndarray, l4) -> np.ndarray:
    l4 = np.asarray(l4, dtype=np.float64)
    return l4[0] * n[..., 0] + l4[1] * n[..., 1] + l4[2] * n[..., 2] + l4[3]


def shading(nf: NormalField, l4) -> ScalarGrid:
    """``l1 nx + l2 ny + l3 nz + l4`` per pixel, unclamped."""
    return ScalarGrid(shading_arrays(nf.n, l4), nf.valid)


def render_arrays(n: np.ndarray, rho: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """``rho_c * (l_c . [n; 1])`` for an (H, W, 3) albedo and (3, 4) coefficients."""
    s = np.einsum("...k,ck->...c", n, coeffs[:, :3]) + coeffs[:, 3]
    return rho * s


def _check_sizes(z, *grids):
    for g in grids:
        if g.shape != z.shape:
            raise SizeMismatchError(f"grid size {g.shape} does not match depth size {z.shape}")


def render(z: ScalarGrid, rho: ColorGrid, l: LightingVector, cam: CameraIntrinsics) -> ColorGrid:
    """Noise-free Lambertian image of surface ``z`` with albedo ``rho`` under ``l``."""
    _check_sizes(z, rho)
    nf = normals_from_depth(z, cam)
    valid = z.valid & rho.valid
    return ColorGrid(render_arrays(nf.n, rho.values, l.coeffs), valid)


def pde_fields(z: ScalarGrid, rho: ColorGrid, l: LightingVector, cam: CameraIntrinsics) -> PdeFields:
    """Per-pixel matrix fields of the linear-in-(grad z, z) form of the image model."""
    _check_sizes(z, rho)
    nf = normals_from_depth(z, cam)
    xc, yc = cam.centered_coords(z.shape)
    L = l.coeffs
    h, w = z.shape
    focal = np.zeros((3, 3))
    focal[0] = L[:, 0]
    focal[1] = L[:, 1]
    focal = np.broadcast_to(cam.f * focal, (h, w, 3, 3))
    aug = np.stack([xc, yc, np.ones_like(xc)], axis=-1)
    outer = aug[..., :, None] * L[:, 2][None, None, None, :]
    A = (focal - outer) / nf.d[..., None, None] * rho.values[..., None, :]
    ambient = L[:, 3] * rho.values
    valid = z.valid & rho.valid
    A[~valid] = np.nan
    ambient[~valid] = np.nan
    return PdeFields(A, ambient, valid)


def pde_residual(z: ScalarGrid, rho: ColorGrid, l: LightingVector, image: ColorGrid, cam: CameraIntrinsics) -> ColorGrid:
    """``A^T [grad z; z] - b`` per pixel and channel."""
    _check_sizes(z, image)
    fields = pde_fields(z, rho, l, cam)
    ex, ey = difference_masks(z.valid)
    zx, zy = gradient_arrays(z.filled(0.0), ex, ey)
    g = np.stack([zx, zy, z.filled(0.0)], axis=-1)
    r = np.einsum("...kc,...k->...c", fields.A, g) - fields.rhs(image)
    return ColorGrid(r, fields.valid & image.valid)
