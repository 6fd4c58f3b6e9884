"""Synthetic benchmark generation: analytic surfaces, albedos, SH lighting, noise.

Surfaces are written in pixel coordinates ``(x, y)`` of the HR grid; depth is
unitless.  Every random draw comes from a Philox stream keyed on
``(seed, purpose, image index)``, so results do not depend on generation order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from PIL import Image

from .core import CameraIntrinsics, ColorGrid, Dataset, GroundTruth, LightingVector, ScalarGrid
from .operators import DownsampleKernel, SizeMismatchError
from .photometry import render

SURFACES = ("plane", "sphere_cap", "gaussian_bumps", "sine_waves")
ALBEDOS = ("uniform", "checker", "patches", "from_file")

_STREAM_LIGHTING = 1
_STREAM_IMAGE_NOISE = 2
_STREAM_DEPTH_NOISE = 3
_STREAM_SURFACE = 4
_STREAM_ALBEDO = 5


def rng_stream(seed: int, purpose: int, index: int = 0) -> np.random.Generator:
    """Independent counter-based generator for one (purpose, index) pair."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), purpose, index])))


@dataclass(frozen=True)
class NoiseParams:
    sigma_I: float = 0.0
    alpha_z: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma_I < 0 or self.alpha_z < 0:
            raise ValueError("noise levels must be >= 0")


# -- surfaces ---------------------------------------------------------------------

def _pixel_grid(size):
    w, h = size
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    return xs, ys


def plane(size, z0=1.0, gx=0.0, gy=0.0):
    """``z = z0 + gx (x - cx) + gy (y - cy)`` around the grid centre."""
    xs, ys = _pixel_grid(size)
    cx, cy = (size[0] - 1) / 2, (size[1] - 1) / 2
    return z0 + gx * (xs - cx) + gy * (ys - cy)


def sphere_cap(size, center=None, radius=None, height=0.3, base=1.0):
    """Ellipsoidal bulge toward the camera: ``base - height * sqrt(1 - r^2 / R^2)`` inside R."""
    w, h = size
    xs, ys = _pixel_grid(size)
    cx, cy = center if center is not None else ((w - 1) / 2, (h - 1) / 2)
    R = radius if radius is not None else 0.4 * min(w, h)
    q = 1.0 - ((xs - cx) ** 2 + (ys - cy) ** 2) / R ** 2
    return base - height * np.sqrt(np.clip(q, 0.0, None))


def gaussian_bumps(size, bumps, base=1.0):
    """``base - sum_k a_k exp(-((x - cx_k)^2 + (y - cy_k)^2) / (2 s_k^2))``.

    ``bumps`` is a sequence of ``(cx, cy, a, s)``; positive ``a`` moves toward the camera.
    """
    xs, ys = _pixel_grid(size)
    z = np.full(xs.shape, float(base))
    for cx, cy, a, s in bumps:
        z -= a * np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2.0 * s ** 2))
    return z


def random_bumps(size, count, rng, amplitude=(0.05, 0.15), width=(0.06, 0.15)):
    """Draw ``count`` bump tuples for :func:`gaussian_bumps`; widths are fractions of min(W, H)."""
    w, h = size
    m = min(w, h)
    return [
        (
            float(rng.uniform(0.15 * w, 0.85 * w)),
            float(rng.uniform(0.15 * h, 0.85 * h)),
            float(rng.uniform(*amplitude)),
            float(rng.uniform(*width) * m),
        )
        for _ in range(count)
    ]


def sine_waves(size, base=1.0, amplitude=0.02, period=(24.0, 32.0), phase=(0.0, 0.0)):
    """``base + amplitude * sin(2 pi x / px + phx) * sin(2 pi y / py + phy)``."""
    xs, ys = _pixel_grid(size)
    return base + amplitude * np.sin(2 * np.pi * xs / period[0] + phase[0]) * np.sin(
        2 * np.pi * ys / period[1] + phase[1]
    )


def make_surface(kind: str, params: dict, size) -> ScalarGrid:
    """Analytic depth map of ``size = (width, height)``; rejects non-positive depth."""
    w, h = size
    if w < 16 or h < 16:
        raise ValueError(f"surface size must be at least 16x16, got {w}x{h}")
    params = dict(params or {})
    if kind == "plane":
        z = plane(size, **params)
    elif kind == "sphere_cap":
        z = sphere_cap(size, **params)
    elif kind == "gaussian_bumps":
        if "bumps" not in params:
            rng = rng_stream(params.pop("seed", 0), _STREAM_SURFACE)
            params["bumps"] = random_bumps(size, params.pop("count", 3), rng)
        z = gaussian_bumps(size, **params)
    elif kind == "sine_waves":
        z = sine_waves(size, **params)
    else:
        raise ValueError(f"unknown surface kind {kind!r}; choose from {SURFACES}")
    if not (z > 0).all():
        raise ValueError(f"{kind} parameters give non-positive depth (min {z.min():.3g})")
    return ScalarGrid(z, np.ones(z.shape, dtype=bool))


# -- albedo -----------------------------------------------------------------------

def checker(size, colors=((0.9, 0.3, 0.2), (0.2, 0.5, 0.9)), cell=8):
    """Two-colour checkerboard with ``cell``-pixel squares."""
    xs, ys = _pixel_grid(size)
    parity = ((xs // cell + ys // cell) % 2).astype(bool)
    c0, c1 = np.asarray(colors[0], float), np.asarray(colors[1], float)
    return np.where(parity[..., None], c1, c0)


def patches(size, count=12, seed=0, low=0.15, high=0.95):
    """Random axis-aligned coloured rectangles over a random background."""
    w, h = size
    rng = rng_stream(seed, _STREAM_ALBEDO)
    out = np.empty((h, w, 3))
    out[:] = rng.uniform(low, high, 3)
    for _ in range(count):
        x0, x1 = np.sort(rng.integers(0, w + 1, 2))
        y0, y1 = np.sort(rng.integers(0, h + 1, 2))
        out[y0:y1, x0:x1] = rng.uniform(low, high, 3)
    return out


def load_png(path) -> np.ndarray:
    """8-bit RGB PNG as floats in [0, 1] (plain division by 255)."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0


def make_albedo(kind: str, params: dict, size) -> ColorGrid:
    params = dict(params or {})
    w, h = size
    if kind == "uniform":
        rgb = np.asarray(params.get("color", (1.0, 1.0, 1.0)), dtype=np.float64)
        a = np.broadcast_to(rgb, (h, w, 3)).copy()
    elif kind == "checker":
        a = checker(size, **params)
    elif kind == "patches":
        a = patches(size, **params)
    elif kind == "from_file":
        a = load_png(params["path"])
        if a.shape[:2] != (h, w):
            with Image.open(params["path"]) as im:
                im = im.convert("RGB").resize((w, h), Image.BICUBIC)
                a = np.asarray(im, dtype=np.float64) / 255.0
    else:
        raise ValueError(f"unknown albedo kind {kind!r}; choose from {ALBEDOS}")
    if a.min() < 0 or a.max() > 1:
        raise ValueError("albedo values must lie in [0, 1]")
    return ColorGrid(a, np.ones((h, w), dtype=bool))


# -- lighting ---------------------------------------------------------------------

def hemisphere_direction(rng) -> np.ndarray:
    """Uniform direction on the camera-facing hemisphere (z < 0)."""
    v = rng.normal(size=3)
    v /= np.linalg.norm(v)
    if v[2] > 0:
        v[2] = -v[2]
    return v


def sample_lighting(n: int, seed) -> list:
    """``n`` random coloured first-order SH lighting vectors.

    Per image: direction uniform on the hemisphere facing the camera, intensity in
    [0.5, 1.5], ambient in [0.1, 0.4]; each channel scales both by an independent
    factor in [0.9, 1.1].  ``seed`` is an int; image ``i`` uses its own stream.
    """
    if n < 4:
        raise ValueError(f"need n >= 4 lighting vectors, got {n}")
    out = []
    for i in range(n):
        rng = rng_stream(seed, _STREAM_LIGHTING, i)
        u = hemisphere_direction(rng)
        intensity = rng.uniform(0.5, 1.5)
        ambient = rng.uniform(0.1, 0.4)
        jitter_dir = rng.uniform(0.9, 1.1, 3)
        jitter_amb = rng.uniform(0.9, 1.1, 3)
        coeffs = np.empty((3, 4))
        coeffs[:, :3] = (intensity * jitter_dir)[:, None] * u[None, :]
        coeffs[:, 3] = ambient * jitter_amb
        out.append(LightingVector(coeffs))
    return out


# -- dataset ----------------------------------------------------------------------

def generate_dataset(
    z_gt: ScalarGrid,
    albedo_gt: ColorGrid,
    lighting: Sequence[LightingVector],
    sf: int,
    noise: NoiseParams,
    cam: CameraIntrinsics,
) -> Dataset:
    """Render noisy HR images and noisy LR depth maps from ground truth."""
    if z_gt.shape != albedo_gt.shape:
        raise SizeMismatchError("depth and albedo sizes differ")
    h, w = z_gt.shape
    if h % sf or w % sf:
        raise SizeMismatchError(f"scale factor {sf} does not divide {w}x{h}")
    images = []
    for i, l in enumerate(lighting):
        img = render(z_gt, albedo_gt, l, cam)
        vals = img.values
        if noise.sigma_I > 0:
            vals = vals + noise.sigma_I * rng_stream(noise.seed, _STREAM_IMAGE_NOISE, i).normal(size=vals.shape)
        images.append(ColorGrid(vals, img.valid))

    kernel = DownsampleKernel(sf, z_gt.valid)
    kz = kernel.apply(z_gt.filled(0.0))
    sigma_z = noise.alpha_z * float(np.nanmax(np.abs(z_gt.values)))
    depths = []
    for i in range(len(lighting)):
        vals = kz
        if sigma_z > 0:
            vals = kz + sigma_z * rng_stream(noise.seed, _STREAM_DEPTH_NOISE, i).normal(size=kz.shape)
        depths.append(ScalarGrid(vals, kernel.lr_valid))
    gt = GroundTruth(z_gt, albedo_gt, tuple(lighting))
    return Dataset(images, depths, cam, int(sf), gt)


# -- standard benchmark -------------------------------------------------------------

DESK_SIZE = (160, 120)
DESK_BASE = 10.0
# large relief of the desk benchmark, in HR pixels: (cx, cy, amplitude, width)
DESK_BUMPS = (
    (52.0, 44.0, 1.2, 11.0),
    (108.0, 70.0, 1.5, 14.0),
    (70.0, 88.0, 0.8, 7.0),
    (118.0, 32.0, 0.6, 5.0),
)
DESK_FINE_BUMPS = 150
DESK_FINE_SEED = 2017
DESK_FOCAL = 150.0
# noise of the "noisy desk" variant used for the lambda, n and alpha_z sweeps
DESK_SIGMA_I = 0.01
DESK_ALPHA_Z = 1e-3


def desk_bumps() -> list:
    """Large bumps plus fine relief (1.5-3 px wide) that SF=2 sampling cannot resolve."""
    rng = rng_stream(DESK_FINE_SEED, _STREAM_SURFACE)
    w, h = DESK_SIZE
    fine = []
    for _ in range(DESK_FINE_BUMPS):
        cx, cy = rng.uniform(10, w - 10), rng.uniform(10, h - 10)
        a = rng.uniform(0.05, 0.2) * rng.choice([-1.0, 1.0])
        fine.append((float(cx), float(cy), float(a), float(rng.uniform(1.5, 3.0))))
    return list(DESK_BUMPS) + fine


def desk_camera(size=DESK_SIZE) -> CameraIntrinsics:
    w, h = size
    return CameraIntrinsics(DESK_FOCAL * w / DESK_SIZE[0], ((w - 1) / 2.0, (h - 1) / 2.0))


def desk_surface(kind: str = "gaussian_bumps") -> ScalarGrid:
    if kind == "gaussian_bumps":
        return make_surface("gaussian_bumps", {"bumps": desk_bumps(), "base": DESK_BASE}, DESK_SIZE)
    # other kinds at the same depth scale as the bumps
    params = {
        "plane": {"z0": DESK_BASE},
        "sphere_cap": {"base": DESK_BASE, "height": 0.3 * DESK_BASE},
        "sine_waves": {"base": DESK_BASE, "amplitude": 0.02 * DESK_BASE},
    }.get(kind, {})
    return make_surface(kind, params, DESK_SIZE)


def desk_benchmark(n=20, sf=2, seed=0, sigma_I=0.0, alpha_z=0.0, surface="gaussian_bumps", albedo="checker") -> Dataset:
    """The standard 160x120 test scene; ``seed`` drives lighting and noise only."""
    z = desk_surface(surface)
    rho = make_albedo(albedo, {"seed": seed} if albedo == "patches" else {}, DESK_SIZE)
    lights = sample_lighting(n, seed)
    return generate_dataset(z, rho, lights, sf, NoiseParams(sigma_I, alpha_z, seed), desk_camera())
