"""Pure numpy versions of the depth-system kernels.

``coef`` has shape (H, W, m, 3): for each pixel, m rows ``(a, b, c)`` such that the
row's residual is ``a * zx + b * zy + c * z - rhs``.  ``ex``/``ey`` are the
forward-difference masks as float arrays.
"""

import numpy as np


def _grad(z, ex, ey):
    zx = np.zeros_like(z)
    zy = np.zeros_like(z)
    zx[:, :-1] = z[:, 1:] - z[:, :-1]
    zy[:-1, :] = z[1:, :] - z[:-1, :]
    return zx * ex, zy * ey


def _grad_t(h, ex, ey):
    gx = h[..., 0] * ex
    gy = h[..., 1] * ey
    out = h[..., 2] - gx - gy
    out[:, 1:] += gx[:, :-1]
    out[1:, :] += gy[:-1, :]
    return out


def apply_normal(z, coef, ex, ey):
    """``G^T sum_k c_k c_k^T G z``."""
    zx, zy = _grad(z, ex, ey)
    g = np.stack([zx, zy, z], axis=-1)
    u = np.einsum("hwkj,hwj->hwk", coef, g)
    h = np.einsum("hwkj,hwk->hwj", coef, u)
    return _grad_t(h, ex, ey)


def normal_rhs(coef, b, ex, ey):
    """``G^T sum_k c_k b_k`` for per-row targets ``b`` of shape (H, W, m)."""
    h = np.einsum("hwkj,hwk->hwj", coef, b)
    return _grad_t(h, ex, ey)


def residual_sq(z, coef, b, ex, ey):
    """Per-pixel ``sum_k (c_k . G z - b_k)^2``."""
    zx, zy = _grad(z, ex, ey)
    g = np.stack([zx, zy, z], axis=-1)
    r = np.einsum("hwkj,hwj->hwk", coef, g) - b
    return np.einsum("hwk,hwk->hw", r, r)


def jacobi_diag(coef, ex, ey):
    """Diagonal of ``G^T sum_k c_k c_k^T G``."""
    a = coef[..., 0] * ex[..., None]
    bb = coef[..., 1] * ey[..., None]
    c = coef[..., 2]
    out = ((c - a - bb) ** 2).sum(axis=-1)
    out[:, 1:] += (a[:, :-1] ** 2).sum(axis=-1)
    out[1:, :] += (bb[:-1, :] ** 2).sum(axis=-1)
    return out
