"""File formats and directory layouts.

Dataset directory::

    intrinsics.json            {"f": ..., "p0": [x, y], "scale_factor": sf}
    image_000.png ...          8-bit RGB, read back as value / 255
    depth_000.pfm ...          grayscale PFM, 0 marks a missing sample
    gt/depth.pfm, gt/albedo.pfm, gt/lighting.json   (optional)

Solution directory: ``depth.pfm``, ``albedo.pfm``, ``lighting.json``,
``report.json``, ``energy.csv``.
"""

from __future__ import annotations

import csv
import json
import re
from pathlib import Path

import numpy as np
from PIL import Image

from .core import CameraIntrinsics, ColorGrid, Dataset, GroundTruth, LightingVector, ScalarGrid


class FormatError(ValueError):
    pass


# -- PFM --------------------------------------------------------------------------

def write_pfm(path, data) -> None:
    """Little-endian PFM; (H, W) writes ``Pf``, (H, W, 3) writes ``PF``.  Rows go bottom-up."""
    a = np.asarray(data)
    if a.ndim == 2:
        header = "Pf"
    elif a.ndim == 3 and a.shape[2] == 3:
        header = "PF"
    else:
        raise FormatError(f"PFM holds (H, W) or (H, W, 3) arrays, got {a.shape}")
    h, w = a.shape[:2]
    body = np.ascontiguousarray(a[::-1], dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(f"{header}\n{w} {h}\n-1.0\n".encode("ascii"))
        fh.write(body.tobytes())


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    m = re.match(rb"(PF|Pf)\s+(\d+)\s+(\d+)\s+([-+0-9.eE]+)\s", raw)
    if not m:
        raise FormatError(f"{path}: not a PFM file")
    channels = 3 if m.group(1) == b"PF" else 1
    w, h = int(m.group(2)), int(m.group(3))
    scale = float(m.group(4))
    dtype = "<f4" if scale < 0 else ">f4"
    count = w * h * channels
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=m.end())
    shape = (h, w, 3) if channels == 3 else (h, w)
    return data.reshape(shape)[::-1].astype(np.float64)


# -- PNG / JSON ---------------------------------------------------------------------

def write_png(path, rgb) -> None:
    a = np.nan_to_num(np.asarray(rgb, dtype=np.float64), nan=0.0)
    Image.fromarray(np.round(np.clip(a, 0.0, 1.0) * 255.0).astype(np.uint8), "RGB").save(path)


def read_png(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def lighting_to_json(cam: CameraIntrinsics, lighting) -> dict:
    return {"f": cam.f, "p0": list(cam.p0), "lights": [l.to_flat() for l in lighting]}


def lighting_from_json(obj) -> tuple:
    try:
        cam = CameraIntrinsics(obj["f"], obj["p0"])
        lights = [LightingVector.from_flat(v) for v in obj["lights"]]
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed lighting JSON: {exc}") from exc
    return cam, lights


# -- dataset directory -------------------------------------------------------------

def _depth_for_file(grid: ScalarGrid) -> np.ndarray:
    return grid.filled(0.0)


def write_dataset(d: Dataset, root, extra: dict | None = None) -> Path:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    meta = {"f": d.intrinsics.f, "p0": list(d.intrinsics.p0), "scale_factor": int(d.scale_factor)}
    write_json(root / "intrinsics.json", meta)
    for i, (im, z) in enumerate(zip(d.images, d.depths)):
        write_png(root / f"image_{i:03d}.png", im.filled(0.0))
        write_pfm(root / f"depth_{i:03d}.pfm", _depth_for_file(z))
    if d.ground_truth is not None:
        gt = root / "gt"
        gt.mkdir(exist_ok=True)
        write_pfm(gt / "depth.pfm", _depth_for_file(d.ground_truth.depth))
        write_pfm(gt / "albedo.pfm", d.ground_truth.albedo.filled(0.0))
        write_json(gt / "lighting.json", lighting_to_json(d.intrinsics, d.ground_truth.lighting))
    if extra is not None:
        write_json(root / "synth.json", extra)
    return root


def read_dataset(root) -> Dataset:
    root = Path(root)
    if not (root / "intrinsics.json").is_file():
        raise FormatError(f"{root}: missing intrinsics.json")
    meta = read_json(root / "intrinsics.json")
    try:
        cam = CameraIntrinsics(meta["f"], meta["p0"])
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{root}/intrinsics.json: {exc}") from exc
    images = [ColorGrid.from_array(read_png(p)) for p in sorted(root.glob("image_[0-9][0-9][0-9].png"))]
    depths = [ScalarGrid.from_depth(read_pfm(p)) for p in sorted(root.glob("depth_[0-9][0-9][0-9].pfm"))]
    if not images or not depths:
        raise FormatError(f"{root}: no image_###.png / depth_###.pfm files")
    sf = meta.get("scale_factor")
    if sf is None:
        sf = images[0].height // depths[0].height
    gt = None
    gdir = root / "gt"
    if (gdir / "depth.pfm").is_file():
        _, lights = lighting_from_json(read_json(gdir / "lighting.json"))
        gt = GroundTruth(
            ScalarGrid.from_depth(read_pfm(gdir / "depth.pfm")),
            ColorGrid.from_array(read_pfm(gdir / "albedo.pfm")),
            tuple(lights),
        )
    return Dataset(images, depths, cam, int(sf), gt)


# -- solution directory -------------------------------------------------------------

ENERGY_HEADER = ["iteration", "energy", "after_lighting", "after_albedo", "after_depth"]


def write_solution(state, cam: CameraIntrinsics, root, report: dict) -> Path:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    write_pfm(root / "depth.pfm", _depth_for_file(state.depth))
    write_pfm(root / "albedo.pfm", state.albedo.filled(0.0))
    write_json(root / "lighting.json", lighting_to_json(cam, state.lighting))
    write_json(root / "report.json", report)
    with open(root / "energy.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ENERGY_HEADER)
        for k, (e, sub) in enumerate(zip(state.energy_trace, state.substep_energies), start=1):
            w.writerow([k, repr(e), *(repr(v) for v in sub)])
    return root


def read_solution(root) -> tuple:
    """``(depth, albedo, lighting, cam, report)`` from a solution directory."""
    root = Path(root)
    depth = ScalarGrid.from_depth(read_pfm(root / "depth.pfm"))
    albedo = ColorGrid.from_array(read_pfm(root / "albedo.pfm"))
    cam, lights = lighting_from_json(read_json(root / "lighting.json"))
    report = read_json(root / "report.json") if (root / "report.json").is_file() else {}
    return depth, albedo, lights, cam, report


def write_csv_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([row[h] for h in header])
