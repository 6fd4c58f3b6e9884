"""Alternating minimisation of the joint super-resolution / photometric-stereo energy.

The energy of a state ``(z, rho, l)`` is::

    lam * sum_i || rho * (l_i . [n(z); 1]) - I_i ||^2      (HR pixels)
        + sum_i || K z - z0_i ||^2                         (LR pixels)

Each outer iteration updates lighting, then albedo (both exact linear least
squares), then depth.  The depth step freezes the normaliser ``d(z)`` of the
perspective normal, which makes the photometric residual linear in
``(grad z, z)``, and solves the resulting normal equations by conjugate gradient.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .core import (
    ColorGrid,
    Dataset,
    DatasetError,
    LightingVector,
    ScalarGrid,
    SolutionState,
    SolverConfig,
    validate_dataset,
)
from .operators import DownsampleKernel, difference_masks, inpaint_biharmonic, upsample_bicubic
from .photometry import normal_bracket, gradient_arrays

log = logging.getLogger(__name__)

ALBEDO_EPS = 1e-12
# energies this far below the data scale are treated as an exact fit
ZERO_ENERGY_RTOL = 1e-20


class DegeneracyWarning(UserWarning):
    """Lighting normal equations were rank deficient; a pseudoinverse was used."""


class ConvergenceWarning(UserWarning):
    """Conjugate gradient hit its iteration cap before reaching the tolerance."""


# -- conjugate gradient -------------------------------------------------------

@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    rel_residual: float
    converged: bool


def conjugate_gradient(apply, b, x0, rel_tol=1e-6, max_iters=500, precond=None) -> CGResult:
    """Matrix-free (preconditioned) CG for a symmetric PSD operator.

    Warm-started at ``x0``; stops once ``||b - A x|| <= rel_tol * ||b - A x0||``.
    An exactly zero initial residual returns ``x0`` untouched.  ``precond`` is an
    array of inverse diagonal entries (Jacobi) or None.
    """
    x = x0.copy()
    r = b - apply(x)
    rnorm = np.linalg.norm(r)
    if rnorm == 0 or rnorm <= np.finfo(float).eps * np.linalg.norm(b):
        return CGResult(x, 0, 0.0, True)
    r0norm = rnorm
    z = r * precond if precond is not None else r
    p = z.copy()
    rz = np.vdot(r, z)
    for it in range(1, max_iters + 1):
        ap = apply(p)
        pap = np.vdot(p, ap)
        if pap <= 0:
            # direction in the null space; nothing left to gain
            return CGResult(x, it, rnorm / r0norm, False)
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        rnorm = np.linalg.norm(r)
        if rnorm <= rel_tol * r0norm:
            return CGResult(x, it, rnorm / r0norm, True)
        z = r * precond if precond is not None else r
        rz_new = np.vdot(r, z)
        p *= rz_new / rz
        p += z
        rz = rz_new
    return CGResult(x, max_iters, rnorm / r0norm, False)


# -- problem data ---------------------------------------------------------------

class Problem:
    """Dataset arrays plus the machinery shared by all update steps.

    Depth is handled as a finite (H, W) array; pixels outside ``mask`` keep
    whatever value they hold and are ignored by every term.
    """

    def __init__(self, dataset: Dataset):
        self.cam = dataset.intrinsics
        self.sf = int(dataset.scale_factor)
        self.mask = dataset.hr_mask()
        self.n = dataset.n
        self.images = dataset.image_stack() * self.mask[None, :, :, None]
        self.kernel = DownsampleKernel(self.sf, self.mask)
        z0, m0 = dataset.depth_stack()
        m0 = m0 & self.kernel.lr_valid[None]
        self.z0 = np.where(m0, z0, 0.0)
        self.lr_masks = m0
        self.lr_count = m0.sum(axis=0).astype(np.float64)
        self.sr_rhs = self.kernel.adjoint(self.z0.sum(axis=0))
        ex, ey = difference_masks(self.mask)
        self.ex_b, self.ey_b = ex, ey
        self.ex = ex.astype(np.float64)
        self.ey = ey.astype(np.float64)
        self.xc, self.yc = self.cam.centered_coords(self.mask.shape)
        self.scale = float((self.images ** 2).sum() + (self.z0 ** 2).sum())

    # geometry
    def normals(self, z):
        zx, zy = gradient_arrays(z, self.ex_b, self.ey_b)
        br = normal_bracket(z, zx, zy, self.cam, self.xc, self.yc)
        d = np.sqrt(np.einsum("...k,...k->...", br, br))
        d = np.where(self.mask, d, 1.0)
        if np.any(d == 0):
            raise ValueError("degenerate normal: d(z) = 0 inside the mask")
        return br / d[..., None], d

    def shading(self, n, L):
        """(n_images, H, W, 3) shading ``l_ic . [n; 1]``."""
        return np.einsum("hwk,ick->ihwc", n, L[:, :, :3]) + L[:, None, None, :, 3]

    def system(self, z, rho, L):
        """Per-row coefficients and targets of the depth-linear photometric residual.

        Row ``k = 3 i + c`` reads ``a zx + b zy + c z - t`` with ``d`` frozen at ``z``.
        """
        _, d = self.normals(z)
        f = self.cam.f
        w = (self.mask / d)[:, :, None, None] * rho[:, :, None, :]  # (H, W, 1, 3)
        l1 = L[None, None, :, :, 0]
        l2 = L[None, None, :, :, 1]
        l3 = L[None, None, :, :, 2]
        xc = self.xc[:, :, None, None]
        yc = self.yc[:, :, None, None]
        a = w * (f * l1 - xc * l3)
        b = w * (f * l2 - yc * l3)
        c = -w * l3
        h, wd = self.mask.shape
        coef = np.ascontiguousarray(np.stack([a, b, c], axis=-1).reshape(h, wd, 3 * self.n, 3))
        amb = rho[None] * L[:, None, None, :, 3]  # (n, H, W, 3)
        t = (self.images - amb) * self.mask[None, :, :, None]
        t = np.ascontiguousarray(t.transpose(1, 2, 0, 3).reshape(h, wd, 3 * self.n))
        return coef, t

    # energy
    def sr_energy(self, z):
        kz = self.kernel.apply(z)
        r = (kz[None] - self.z0) * self.lr_masks
        return float((r ** 2).sum())

    def photometric_energy(self, z, rho, L):
        n, _ = self.normals(z)
        r = rho[None] * self.shading(n, L) - self.images
        r *= self.mask[None, :, :, None]
        return float((r ** 2).sum())

    def energy(self, z, rho, L, lam):
        return lam * self.photometric_energy(z, rho, L) + self.sr_energy(z)

    def surrogate(self, z, coef, t, lam):
        """Frozen-normaliser quadratic minimised by the depth step."""
        photo = kernels.residual_sq(z, coef, t, self.ex, self.ey)
        return lam * float(photo.sum()) + self.sr_energy(z)

    # updates
    def update_lighting(self, z, rho):
        n, _ = self.normals(z)
        phi = np.concatenate([n, np.ones(n.shape[:2] + (1,))], axis=-1)
        phi = phi * self.mask[..., None]
        L = np.empty((self.n, 3, 4))
        for c in range(3):
            rows = phi * rho[..., c, None]
            gram = np.einsum("hwj,hwk->jk", rows, rows)
            rhs = np.einsum("hwj,ihw->ij", rows, self.images[..., c])
            L[:, c, :] = _solve_gram(gram, rhs.T).T
        return L

    def update_albedo(self, z, L, floor=0.0):
        n, _ = self.normals(z)
        s = self.shading(n, L)
        num = (s * self.images).sum(axis=0)
        den = np.maximum((s * s).sum(axis=0), ALBEDO_EPS)
        rho = np.maximum(floor, num / den)
        return np.where(self.mask[..., None], rho, 1.0)

    def depth_operator(self, coef, lam):
        k = self.kernel

        def apply(x):
            out = k.adjoint(self.lr_count * k.apply(x))
            if lam:
                out += lam * kernels.apply_normal(x, coef, self.ex, self.ey)
            return out

        return apply

    def depth_rhs(self, coef, t, lam):
        out = self.sr_rhs.copy()
        if lam:
            out += lam * kernels.normal_rhs(coef, t, self.ex, self.ey)
        return out

    def jacobi(self, coef, lam):
        diag = self.kernel.adjoint(self.lr_count / np.maximum(self.kernel.counts, 1.0))
        diag = diag + lam * kernels.jacobi_diag(coef, self.ex, self.ey)
        with np.errstate(divide="ignore"):
            return np.where(diag > 0, 1.0 / diag, 0.0)

    def update_depth(self, z, rho, L, config: SolverConfig):
        coef, t = self.system(z, rho, L)
        apply = self.depth_operator(coef, config.lam)
        rhs = self.depth_rhs(coef, t, config.lam)
        precond = self.jacobi(coef, config.lam) if config.jacobi else None
        res = conjugate_gradient(apply, rhs, z, config.cg_rel_tol, config.cg_max_iters, precond)
        if not res.converged:
            warnings.warn(
                f"depth CG stopped after {res.iterations} iterations at relative residual "
                f"{res.rel_residual:.3e}",
                ConvergenceWarning,
                stacklevel=3,
            )
        return res.x, res


def _solve_gram(gram, rhs):
    """Solve ``gram x = rhs`` (columns of rhs), falling back to a pseudoinverse."""
    evals = np.linalg.eigvalsh(gram)
    top = evals[-1]
    if top <= 0 or evals[0] <= 1e-12 * top:
        warnings.warn(
            "lighting normal equations are rank deficient; using the pseudoinverse",
            DegeneracyWarning,
            stacklevel=3,
        )
        return np.linalg.pinv(gram, rcond=1e-12, hermitian=True) @ rhs
    return np.linalg.solve(gram, rhs)


# -- grid-level API -------------------------------------------------------------

def _lighting_array(lighting) -> np.ndarray:
    return np.stack([l.coeffs for l in lighting])


def _lighting_list(L) -> list:
    return [LightingVector(l) for l in L]


def init_depth(depths, sf: int) -> ScalarGrid:
    """Mean of the LR maps, biharmonic hole filling, then bicubic upsampling."""
    vals = np.stack([d.filled(0.0) for d in depths])
    masks = np.stack([d.valid for d in depths])
    count = masks.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = vals.sum(axis=0) / count
    lr = ScalarGrid(mean, count > 0)
    if not lr.valid.any():
        raise ValueError("no LR pixel is valid in any depth map")
    hr = upsample_bicubic(inpaint_biharmonic(lr), sf)
    if not (hr.values > 0).all():
        raise ValueError("initial depth is not strictly positive")
    return hr


def _images_dataset(images, z: ScalarGrid, cam, valid=None) -> Problem:
    """Minimal problem around a set of images (for the standalone update functions)."""
    p = Problem.__new__(Problem)
    p.cam = cam
    p.n = len(images)
    mask = np.ones(z.shape, dtype=bool) if valid is None else valid.copy()
    for im in images:
        mask &= im.valid
    mask &= z.valid
    p.mask = mask
    p.images = np.stack([im.filled(0.0) for im in images]) * mask[None, :, :, None]
    p.ex_b, p.ey_b = difference_masks(mask)
    p.xc, p.yc = cam.centered_coords(mask.shape)
    return p


def update_lighting(images, z: ScalarGrid, rho: ColorGrid, cam) -> list:
    """Per-image, per-channel least-squares lighting for fixed depth and albedo."""
    p = _images_dataset(images, z, cam, rho.valid)
    L = p.update_lighting(z.filled(1.0), rho.filled(0.0))
    return _lighting_list(L)


def update_albedo(images, z: ScalarGrid, lighting, cam, floor: float = 0.0) -> ColorGrid:
    """Closed-form per-pixel albedo for fixed depth and lighting."""
    p = _images_dataset(images, z, cam)
    rho = p.update_albedo(z.filled(1.0), _lighting_array(lighting), floor)
    return ColorGrid(rho, p.mask)


def update_depth(dataset: Dataset, state: SolutionState, config: SolverConfig) -> ScalarGrid:
    p = Problem(dataset)
    z, _ = p.update_depth(
        state.depth.filled(1.0), state.albedo.filled(1.0), _lighting_array(state.lighting), config
    )
    return ScalarGrid(z, p.mask)


def energy(dataset: Dataset, state: SolutionState, lam: float) -> float:
    p = Problem(dataset)
    return p.energy(state.depth.filled(1.0), state.albedo.filled(1.0), _lighting_array(state.lighting), lam)


def solve(dataset: Dataset, config: Optional[SolverConfig] = None, init: Optional[SolutionState] = None) -> SolutionState:
    """Run the alternating scheme from white albedo and the upsampled LR depth.

    ``init`` replaces the standard initialisation (its depth and albedo are used;
    lighting is always re-estimated first).
    """
    config = config or SolverConfig()
    problems = validate_dataset(dataset)
    if problems:
        raise DatasetError(problems)
    p = Problem(dataset)
    lam = config.lam
    if init is None:
        z = init_depth(dataset.depths, p.sf).values.copy()
        rho = np.ones(p.mask.shape + (3,))
    else:
        z = init.depth.filled(1.0).copy()
        rho = init.albedo.filled(1.0).copy()

    trace, subs = [], []
    converged = False
    cg_warnings = 0
    zero_level = ZERO_ENERGY_RTOL * max(p.scale * max(lam, 1.0), np.finfo(float).tiny)
    k = 0
    for k in range(1, config.max_outer_iters + 1):
        L = p.update_lighting(z, rho)
        e_light = p.energy(z, rho, L, lam)
        rho = p.update_albedo(z, L, config.albedo_floor)
        e_albedo = p.energy(z, rho, L, lam)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ConvergenceWarning)
            z, cg = p.update_depth(z, rho, L, config)
        cg_warnings += sum(issubclass(w.category, ConvergenceWarning) for w in caught)
        e = p.energy(z, rho, L, lam)
        subs.append((e_light, e_albedo, e))
        trace.append(e)
        log.info("iter %d: energy %.6e (cg %d its, rel res %.1e)", k, e, cg.iterations, cg.rel_residual)
        if e <= zero_level:
            converged = True
            break
        if k >= 2 and abs(e - trace[-2]) < config.rel_energy_tol * trace[-2]:
            converged = True
            break

    if cg_warnings:
        warnings.warn(f"depth CG hit its cap in {cg_warnings} outer iteration(s)", ConvergenceWarning, stacklevel=2)
    return SolutionState(
        depth=ScalarGrid(z, p.mask),
        albedo=ColorGrid(rho, p.mask),
        lighting=_lighting_list(L),
        energy_trace=trace,
        substep_energies=subs,
        iterations_run=k,
        converged=converged,
        cg_warnings=cg_warnings,
    )
