"""Linear operators on pixel grids.

Functions ending in ``_arrays`` take plain ndarrays and serve the solver's
inner loops.  The grid-level functions wrap them with mask bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import ScalarGrid

DIRECT_SOLVE_MAX_UNKNOWNS = 10_000
INPAINT_CG_TOL = 1e-8


# -- finite differences -------------------------------------------------------

def difference_masks(valid: np.ndarray) -> tuple:
    """Where the forward x / y difference is defined: pixel and forward neighbour valid."""
    ex = np.zeros_like(valid)
    ey = np.zeros_like(valid)
    ex[:, :-1] = valid[:, :-1] & valid[:, 1:]
    ey[:-1, :] = valid[:-1, :] & valid[1:, :]
    return ex, ey


def gradient_arrays(z: np.ndarray, ex: np.ndarray, ey: np.ndarray) -> tuple:
    """Forward differences of ``z``; zero wherever the difference mask is off.

    ``z`` must be finite everywhere (fill invalid pixels beforehand).
    """
    zx = np.zeros_like(z)
    zy = np.zeros_like(z)
    zx[:, :-1] = z[:, 1:] - z[:, :-1]
    zy[:-1, :] = z[1:, :] - z[:-1, :]
    zx *= ex
    zy *= ey
    return zx, zy


def gradient_adjoint_arrays(gx: np.ndarray, gy: np.ndarray, ex: np.ndarray, ey: np.ndarray) -> np.ndarray:
    """Transpose of :func:`gradient_arrays` for fixed masks."""
    gx = gx * ex
    gy = gy * ey
    out = -gx - gy
    out[:, 1:] += gx[:, :-1]
    out[1:, :] += gy[:-1, :]
    return out


def gradient(z: ScalarGrid) -> tuple:
    """Forward-difference gradient with a replicate boundary.

    The x difference at ``(x, y)`` is ``z(x+1, y) - z(x, y)``; it is zero where the
    forward neighbour is outside the grid or invalid.  Output masks equal the input mask.
    """
    ex, ey = difference_masks(z.valid)
    zx, zy = gradient_arrays(z.filled(0.0), ex, ey)
    return ScalarGrid(zx, z.valid), ScalarGrid(zy, z.valid)


# -- downsampling kernel ------------------------------------------------------

def _block_sum(a: np.ndarray, sf: int) -> np.ndarray:
    h, w = a.shape[0] // sf, a.shape[1] // sf
    return a.reshape(h, sf, w, sf, *a.shape[2:]).sum(axis=(1, 3))


def _block_expand(a: np.ndarray, sf: int) -> np.ndarray:
    return np.repeat(np.repeat(a, sf, axis=0), sf, axis=1)


class SizeMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DownsampleKernel:
    """Mask-aware SFxSF box average from the HR grid to the LR grid."""

    scale_factor: int
    hr_valid: np.ndarray

    def __post_init__(self):
        sf = int(self.scale_factor)
        if sf < 1:
            raise ValueError("scale factor must be a positive integer")
        hv = np.array(self.hr_valid, dtype=bool)
        if hv.shape[0] % sf or hv.shape[1] % sf:
            raise SizeMismatchError(f"HR size {hv.shape[1]}x{hv.shape[0]} not divisible by {sf}")
        hv.setflags(write=False)
        counts = _block_sum(hv.astype(np.float64), sf)
        counts.setflags(write=False)
        object.__setattr__(self, "scale_factor", sf)
        object.__setattr__(self, "hr_valid", hv)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def for_shape(cls, hr_shape, sf: int) -> "DownsampleKernel":
        return cls(sf, np.ones(hr_shape, dtype=bool))

    @property
    def hr_shape(self) -> tuple:
        return self.hr_valid.shape

    @property
    def lr_shape(self) -> tuple:
        return self.counts.shape

    @property
    def lr_valid(self) -> np.ndarray:
        return self.counts > 0

    def weights(self, qx: int, qy: int) -> list:
        """``[((x, y), weight), ...]`` for the HR pixels averaged into LR pixel (qx, qy)."""
        sf = self.scale_factor
        c = self.counts[qy, qx]
        out = []
        for y in range(qy * sf, (qy + 1) * sf):
            for x in range(qx * sf, (qx + 1) * sf):
                if self.hr_valid[y, x]:
                    out.append(((x, y), 1.0 / c))
        return out

    def apply(self, z: np.ndarray) -> np.ndarray:
        """K z on arrays; LR pixels with an empty block come out as 0."""
        if z.shape != self.hr_shape:
            raise SizeMismatchError(f"expected HR shape {self.hr_shape}, got {z.shape}")
        s = _block_sum(np.where(self.hr_valid, z, 0.0), self.scale_factor)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.counts > 0, s / self.counts, 0.0)

    def adjoint(self, r: np.ndarray) -> np.ndarray:
        """K^T r on arrays."""
        if r.shape != self.lr_shape:
            raise SizeMismatchError(f"expected LR shape {self.lr_shape}, got {r.shape}")
        with np.errstate(invalid="ignore", divide="ignore"):
            w = np.where(self.counts > 0, r / self.counts, 0.0)
        return _block_expand(w, self.scale_factor) * self.hr_valid

    def as_matrix(self) -> sp.csr_matrix:
        """Sparse (LR pixels x HR pixels) matrix, row-major flattening on both sides."""
        h, w = self.hr_shape
        sf = self.scale_factor
        ys, xs = np.nonzero(self.hr_valid)
        rows = (ys // sf) * (w // sf) + xs // sf
        cols = ys * w + xs
        vals = 1.0 / self.counts[ys // sf, xs // sf]
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.counts.size, h * w))


def _check_divisible(shape, sf):
    if shape[0] % sf or shape[1] % sf:
        raise SizeMismatchError(f"HR size {shape[1]}x{shape[0]} not divisible by scale factor {sf}")


def downsample(hr: ScalarGrid, k) -> ScalarGrid:
    """Box-average ``hr`` onto the LR grid.

    ``k`` is a :class:`DownsampleKernel` or a bare integer scale factor (the kernel is
    then built from ``hr``'s mask).  An LR pixel is invalid iff its whole block is.
    """
    if not isinstance(k, DownsampleKernel):
        _check_divisible(hr.shape, int(k))
        k = DownsampleKernel(int(k), hr.valid)
    if hr.shape != k.hr_shape:
        raise SizeMismatchError(f"grid {hr.shape} does not match kernel HR shape {k.hr_shape}")
    valid = k.lr_valid
    return ScalarGrid(k.apply(hr.filled(0.0)), valid)


def downsample_adjoint(lr: ScalarGrid, k: DownsampleKernel) -> ScalarGrid:
    """Exact transpose of :func:`downsample` for kernel ``k``; invalid LR entries count as 0."""
    if lr.shape != k.lr_shape:
        raise SizeMismatchError(f"grid {lr.shape} does not match kernel LR shape {k.lr_shape}")
    return ScalarGrid(k.adjoint(lr.filled(0.0)), k.hr_valid)


# -- biharmonic inpainting ----------------------------------------------------

_BILAPLACIAN = [
    (0, 0, 20.0),
    (0, 1, -8.0), (0, -1, -8.0), (1, 0, -8.0), (-1, 0, -8.0),
    (1, 1, 2.0), (1, -1, 2.0), (-1, 1, 2.0), (-1, -1, 2.0),
    (0, 2, 1.0), (0, -2, 1.0), (2, 0, 1.0), (-2, 0, 1.0),
]
_NEIGHBOURS4 = [(0, 1), (0, -1), (1, 0), (-1, 0)]


def bilaplacian(u: np.ndarray) -> np.ndarray:
    """13-point discrete bilaplacian; NaN within two pixels of the border."""
    h, w = u.shape
    out = np.full_like(u, np.nan, dtype=np.float64)
    if h < 5 or w < 5:
        return out
    acc = np.zeros((h - 4, w - 4))
    for dy, dx, c in _BILAPLACIAN:
        acc += c * u[2 + dy:h - 2 + dy, 2 + dx:w - 2 + dx]
    out[2:-2, 2:-2] = acc
    return out


def _inpaint_system(u: np.ndarray, valid: np.ndarray):
    h, w = u.shape
    ys, xs = np.nonzero(~valid)
    m = ys.size
    index = -np.ones((h, w), dtype=np.int64)
    index[ys, xs] = np.arange(m)
    interior = (xs >= 2) & (xs <= w - 3) & (ys >= 2) & (ys <= h - 3)

    rows, cols, vals = [], [], []
    rhs = np.zeros(m)

    def couple(sel, ny, nx, coef):
        r = np.nonzero(sel)[0]
        j = index[ny, nx]
        unknown = j >= 0
        rows.append(r[unknown])
        cols.append(j[unknown])
        vals.append(np.broadcast_to(coef, r.shape)[unknown])
        np.subtract.at(rhs, r[~unknown], (np.broadcast_to(coef, r.shape) * u[ny, nx])[~unknown])

    for dy, dx, c in _BILAPLACIAN:
        sel = interior
        couple(sel, ys[sel] + dy, xs[sel] + dx, c)

    border = ~interior
    bys, bxs = ys[border], xs[border]
    degree = np.zeros(bys.size)
    for dy, dx in _NEIGHBOURS4:
        ny, nx = bys + dy, bxs + dx
        inside = (ny >= 0) & (ny < h) & (nx >= 0) & (nx < w)
        degree += inside
        sel = border.copy()
        sel[border] = inside
        couple(sel, ys[sel] + dy, xs[sel] + dx, 1.0)
    r = np.nonzero(border)[0]
    rows.append(r)
    cols.append(r)
    vals.append(-degree)

    a = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m, m)
    )
    return a, rhs, ys, xs


def inpaint_biharmonic(g: ScalarGrid) -> ScalarGrid:
    """Fill invalid pixels with the discrete biharmonic interpolant of the valid ones.

    Unknown pixels whose 13-point stencil fits inside the grid satisfy a zero
    bilaplacian; unknowns closer than two pixels to the border satisfy a zero
    5-point Laplacian over their in-grid neighbours instead.
    """
    if not g.valid.any():
        raise ValueError("cannot inpaint a grid without any valid pixel")
    if g.valid.all():
        return g
    u = g.filled(0.0)
    a, rhs, ys, xs = _inpaint_system(u, g.valid)
    if ys.size <= DIRECT_SOLVE_MAX_UNKNOWNS:
        sol = spla.spsolve(a.tocsc(), rhs)
    else:
        # the mixed stencil is not symmetric; CG runs on the normal equations
        at = a.T.tocsr()
        sol, info = spla.cg(at @ a, at @ rhs, rtol=INPAINT_CG_TOL, maxiter=20 * ys.size)
        if info != 0:
            raise RuntimeError(f"biharmonic inpainting CG did not converge (info={info})")
    u[ys, xs] = sol
    return ScalarGrid(u, np.ones_like(g.valid))


# -- bicubic upsampling -------------------------------------------------------

def _cubic_kernel(s: np.ndarray, a: float = -0.5) -> np.ndarray:
    s = np.abs(s)
    out = np.zeros_like(s)
    near = s <= 1
    far = (s > 1) & (s < 2)
    out[near] = (a + 2) * s[near] ** 3 - (a + 3) * s[near] ** 2 + 1
    out[far] = a * s[far] ** 3 - 5 * a * s[far] ** 2 + 8 * a * s[far] - 4 * a
    return out


def bicubic_matrix(n_lr: int, sf: int) -> np.ndarray:
    """(sf*n_lr, n_lr) 1-D Catmull-Rom interpolation matrix with clamped taps."""
    hr = np.arange(sf * n_lr, dtype=np.float64)
    u = (hr - (sf - 1) / 2.0) / sf
    base = np.floor(u).astype(np.int64)
    t = u - base
    m = np.zeros((hr.size, n_lr))
    rows = np.arange(hr.size)
    for off in (-1, 0, 1, 2):
        w = _cubic_kernel(t - off)
        idx = np.clip(base + off, 0, n_lr - 1)
        np.add.at(m, (rows, idx), w)
    return m


def upsample_bicubic(lr: ScalarGrid, sf: int) -> ScalarGrid:
    """Catmull-Rom upsampling; LR centre (x, y) lands on HR (sf*x + (sf-1)/2, sf*y + (sf-1)/2)."""
    if not lr.valid.all():
        raise ValueError("upsample_bicubic needs an all-valid grid; inpaint first")
    sf = int(sf)
    ry = bicubic_matrix(lr.height, sf)
    rx = bicubic_matrix(lr.width, sf)
    out = ry @ lr.values @ rx.T
    return ScalarGrid(out, np.ones(out.shape, dtype=bool))
