"""Accuracy metrics, frontal relighting, and the evaluation report."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .core import CameraIntrinsics, ColorGrid, LightingVector, ScalarGrid
from .operators import SizeMismatchError
from .photometry import normals_from_depth, render


@dataclass
class EvalReport:
    rmse_depth: float
    mae_normals: float
    energy_trace: list = field(default_factory=list)
    iterations: int = 0
    runtime_seconds: float = 0.0
    config_echo: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.rmse_depth >= 0:
            raise ValueError("rmse_depth must be >= 0")
        if not 0 <= self.mae_normals <= 180:
            raise ValueError("mae_normals must lie in [0, 180]")

    def as_dict(self) -> dict:
        return asdict(self)


def _shared_mask(a: ScalarGrid, b: ScalarGrid) -> np.ndarray:
    if a.shape != b.shape:
        raise SizeMismatchError(f"grid sizes differ: {a.shape} vs {b.shape}")
    mask = a.valid & b.valid
    if not mask.any():
        raise ValueError("the two grids share no valid pixel")
    return mask


def rmse_depth(z: ScalarGrid, z_gt: ScalarGrid) -> float:
    mask = _shared_mask(z, z_gt)
    diff = z.values[mask] - z_gt.values[mask]
    return float(np.sqrt(np.mean(diff * diff)))


def angular_error_map(z: ScalarGrid, z_gt: ScalarGrid, cam: CameraIntrinsics) -> np.ndarray:
    """Per-pixel angle in degrees between the two surfaces' normals; NaN off the shared mask."""
    mask = _shared_mask(z, z_gt)
    n = normals_from_depth(ScalarGrid(z.values, mask), cam).n
    m = normals_from_depth(ScalarGrid(z_gt.values, mask), cam).n
    # atan2 form: same angle as arccos(n . m) but accurate near 0 and 180 degrees
    dots = np.einsum("...k,...k->...", n, m)
    cross = np.linalg.norm(np.cross(n, m), axis=-1)
    return np.where(mask, np.degrees(np.arctan2(cross, dots)), np.nan)


def mae_normals(z: ScalarGrid, z_gt: ScalarGrid, cam: CameraIntrinsics) -> float:
    """Mean angular error of the normals, in degrees."""
    return float(np.nanmean(angular_error_map(z, z_gt, cam)))


def relight(z: ScalarGrid, rho: ColorGrid, l_new: LightingVector, cam: CameraIntrinsics, clamp: bool = True) -> ColorGrid:
    """Render the estimate under new lighting, clipped to [0, 1] unless ``clamp`` is off."""
    img = render(z, rho, l_new, cam)
    if not clamp:
        return img
    return ColorGrid(np.clip(img.values, 0.0, 1.0), img.valid)
