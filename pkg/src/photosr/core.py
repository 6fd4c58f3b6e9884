"""Domain types shared by every other module.

Grids are stored row-major as ``values[y, x]`` (scalar) or ``values[y, x, c]``
(colour), with pixel centres at integer zero-based coordinates.  Invalid
pixels hold NaN and are flagged ``False`` in ``valid``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

MIN_IMAGES = 4


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ScalarGrid:
    """Scalar field over a pixel domain with a validity mask."""

    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError(f"ScalarGrid needs a non-empty 2-D array, got shape {values.shape}")
        valid = np.array(self.valid, dtype=bool)
        if valid.shape != values.shape:
            raise ValueError(f"mask shape {valid.shape} != values shape {values.shape}")
        valid &= np.isfinite(values)
        values[~valid] = np.nan
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "valid", _frozen(valid))

    @classmethod
    def from_array(cls, values, valid=None) -> "ScalarGrid":
        values = np.asarray(values, dtype=np.float64)
        if valid is None:
            valid = np.isfinite(values)
        return cls(values, valid)

    @classmethod
    def from_depth(cls, values) -> "ScalarGrid":
        """Sensor convention: zero or non-finite depth is missing."""
        values = np.asarray(values, dtype=np.float64)
        return cls(values, np.isfinite(values) & (values != 0))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple:
        return self.values.shape

    def flat_index(self, x, y):
        return np.asarray(y) * self.width + np.asarray(x)

    def coords(self, index):
        y, x = np.divmod(index, self.width)
        return x, y

    def filled(self, fill: float = 0.0) -> np.ndarray:
        """Copy of the values with invalid pixels replaced by ``fill``."""
        return np.where(self.valid, self.values, fill)


@dataclass(frozen=True, eq=False)
class ColorGrid:
    """RGB field over a pixel domain; ``values`` has shape (H, W, 3)."""

    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 3 or values.shape[2] != 3 or min(values.shape[:2]) < 1:
            raise ValueError(f"ColorGrid needs an (H, W, 3) array, got shape {values.shape}")
        valid = np.array(self.valid, dtype=bool)
        if valid.shape != values.shape[:2]:
            raise ValueError(f"mask shape {valid.shape} != grid shape {values.shape[:2]}")
        valid &= np.isfinite(values).all(axis=2)
        values[~valid] = np.nan
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "valid", _frozen(valid))

    @classmethod
    def from_array(cls, values, valid=None) -> "ColorGrid":
        values = np.asarray(values, dtype=np.float64)
        if valid is None:
            valid = np.isfinite(values).all(axis=-1)
        return cls(values, valid)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple:
        return self.values.shape[:2]

    def filled(self, fill: float = 0.0) -> np.ndarray:
        return np.where(self.valid[..., None], self.values, fill)


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics of the HR camera: one focal length, one principal point."""

    f: float
    p0: tuple

    def __post_init__(self):
        f = float(self.f)
        if not np.isfinite(f) or f <= 0:
            raise ValueError(f"focal length must be > 0, got {self.f}")
        p0 = tuple(float(v) for v in self.p0)
        if len(p0) != 2:
            raise ValueError("principal point needs two coordinates")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "p0", p0)

    def check_domain(self, width: int, height: int) -> Optional[str]:
        x0, y0 = self.p0
        if not (0 <= x0 < width and 0 <= y0 < height):
            return f"principal point {self.p0} outside [0, {width}) x [0, {height})"
        return None

    def centered_coords(self, shape) -> tuple:
        """Per-pixel ``(x - x0, y - y0)`` arrays for an (H, W) grid."""
        h, w = shape
        ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
        return xs - self.p0[0], ys - self.p0[1]


@dataclass(frozen=True, eq=False)
class LightingVector:
    """First-order SH lighting for one image: a (3, 4) array, one row per RGB channel.

    Columns 0..2 hold the directional part, column 3 the ambient term.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.float64).reshape(3, 4)
        if not np.isfinite(c).all():
            raise ValueError("lighting coefficients must be finite")
        object.__setattr__(self, "coeffs", _frozen(c))

    @classmethod
    def from_channels(cls, lR, lG, lB) -> "LightingVector":
        return cls(np.stack([lR, lG, lB]))

    @classmethod
    def from_flat(cls, values) -> "LightingVector":
        values = np.asarray(values, dtype=np.float64)
        if values.size != 12:
            raise ValueError(f"expected 12 lighting coefficients, got {values.size}")
        return cls(values.reshape(3, 4))

    def to_flat(self) -> list:
        return [float(v) for v in self.coeffs.ravel()]

    @property
    def lR(self):
        return self.coeffs[0]

    @property
    def lG(self):
        return self.coeffs[1]

    @property
    def lB(self):
        return self.coeffs[2]

    def __eq__(self, other):
        if not isinstance(other, LightingVector):
            return NotImplemented
        return bool(np.array_equal(self.coeffs, other.coeffs))

    __hash__ = None


@dataclass(frozen=True)
class GroundTruth:
    depth: ScalarGrid
    albedo: ColorGrid
    lighting: tuple


@dataclass(frozen=True)
class Dataset:
    """n HR RGB images and n aligned LR depth maps seen from one viewpoint."""

    images: tuple
    depths: tuple
    intrinsics: CameraIntrinsics
    scale_factor: int
    ground_truth: Optional[GroundTruth] = None

    def __post_init__(self):
        object.__setattr__(self, "images", tuple(self.images))
        object.__setattr__(self, "depths", tuple(self.depths))

    @property
    def n(self) -> int:
        return len(self.images)

    @property
    def hr_shape(self) -> tuple:
        return self.images[0].shape

    @property
    def lr_shape(self) -> tuple:
        return self.depths[0].shape

    def hr_mask(self) -> np.ndarray:
        """Pixels valid in every image."""
        mask = np.ones(self.hr_shape, dtype=bool)
        for im in self.images:
            mask &= im.valid
        return mask

    def image_stack(self) -> np.ndarray:
        """(n, H, W, 3) array with invalid pixels zeroed."""
        return np.stack([im.filled(0.0) for im in self.images])

    def depth_stack(self) -> tuple:
        """(n, h, w) values (invalid zeroed) and the matching masks."""
        vals = np.stack([d.filled(0.0) for d in self.depths])
        masks = np.stack([d.valid for d in self.depths])
        return vals, masks


def validate_dataset(d: Dataset) -> list:
    """Return human-readable descriptions of every violated dataset invariant."""
    out = []
    n = len(d.images)
    if n < MIN_IMAGES:
        out.append(f"n >= {MIN_IMAGES} required, got n={n} images")
    if len(d.depths) != n:
        out.append(f"got {n} images but {len(d.depths)} depth maps")
    if not isinstance(d.scale_factor, (int, np.integer)) or d.scale_factor < 1:
        out.append(f"scale_factor must be a positive integer, got {d.scale_factor!r}")
        sf = None
    else:
        sf = int(d.scale_factor)
    if not d.images or not d.depths:
        return out

    hr = d.images[0].shape
    for i, im in enumerate(d.images):
        if im.shape != hr:
            out.append(f"image {i} has size {im.shape[1]}x{im.shape[0]}, expected {hr[1]}x{hr[0]}")
    lr = d.depths[0].shape
    for i, z in enumerate(d.depths):
        if z.shape != lr:
            out.append(f"depth map {i} has size {z.shape[1]}x{z.shape[0]}, expected {lr[1]}x{lr[0]}")
        bad = z.valid & ~(z.values > 0)
        if bad.any():
            ys, xs = np.nonzero(bad)
            out.append(
                f"depth map {i}: {bad.sum()} valid pixel(s) with non-positive depth, "
                f"first at (x={xs[0]}, y={ys[0]})"
            )
    if sf is not None and (hr[0] != sf * lr[0] or hr[1] != sf * lr[1]):
        out.append(
            f"HR != SF x LR: HR {hr[1]}x{hr[0]}, LR {lr[1]}x{lr[0]}, scale_factor {sf}"
        )
    msg = d.intrinsics.check_domain(hr[1], hr[0])
    if msg:
        out.append(msg)

    gt = d.ground_truth
    if gt is not None:
        if gt.depth.shape != hr:
            out.append("ground-truth depth does not match the HR size")
        if gt.albedo.shape != hr:
            out.append("ground-truth albedo does not match the HR size")
        if len(gt.lighting) != n:
            out.append(f"ground truth holds {len(gt.lighting)} lighting vectors for {n} images")
    return out


class DatasetError(ValueError):
    """Raised when a dataset violates its invariants."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class SolverConfig:
    lam: float = 0.1
    max_outer_iters: int = 50
    rel_energy_tol: float = 0.01
    cg_max_iters: int = 500
    cg_rel_tol: float = 1e-6
    albedo_floor: float = 0.0
    jacobi: bool = False

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if not (self.rel_energy_tol > 0 and self.cg_rel_tol > 0):
            raise ValueError("tolerances must be > 0")
        if self.max_outer_iters < 1 or self.cg_max_iters < 1:
            raise ValueError("iteration caps must be >= 1")

    def as_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "max_outer_iters": self.max_outer_iters,
            "rel_energy_tol": self.rel_energy_tol,
            "cg_max_iters": self.cg_max_iters,
            "cg_rel_tol": self.cg_rel_tol,
            "albedo_floor": self.albedo_floor,
            "jacobi": self.jacobi,
        }


@dataclass
class SolutionState:
    """Current estimate plus the energy history of the outer loop.

    ``substep_energies`` holds one ``(after_lighting, after_albedo, after_depth)``
    triple per outer iteration.
    """

    depth: ScalarGrid
    albedo: ColorGrid
    lighting: list
    energy_trace: list = field(default_factory=list)
    substep_energies: list = field(default_factory=list)
    iterations_run: int = 0
    converged: bool = False
    cg_warnings: int = 0
