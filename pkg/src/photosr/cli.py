"""Command-line interface: ``photosr {synth,solve,eval,relight,sweep}``.

Exit codes: 0 success, 1 malformed input, 2 dataset validation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
import warnings
from pathlib import Path

from . import io, metrics, solver, synth
from .core import DatasetError, LightingVector, SolverConfig, validate_dataset

log = logging.getLogger("photosr")

EVAL_HEADER = ["rmse_depth", "mae_normals", "iterations", "final_energy", "runtime_seconds"]
SWEEP_HEADER = [
    "lambda", "n", "alpha_z", "sigma_i", "seed", "sf", "iterations", "converged",
    "final_energy", "init_rmse_depth", "init_mae_normals", "rmse_depth", "mae_normals",
    "runtime_seconds",
]


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _add_solver_flags(p, with_lambda=True):
    if with_lambda:
        p.add_argument("--lambda", dest="lam", default="0.1", help="photometric weight (default 0.1; ~1 for real data)")
    p.add_argument("--max-iters", type=int, default=50)
    p.add_argument("--tol", type=float, default=0.01, help="relative energy change that stops the outer loop")
    p.add_argument("--cg-tol", type=float, default=1e-6)
    p.add_argument("--cg-max-iters", type=int, default=500)
    p.add_argument("--jacobi", action="store_true", help="Jacobi-preconditioned CG")
    p.add_argument("--albedo-floor", type=float, default=0.0)


def _config(args, lam=None) -> SolverConfig:
    return SolverConfig(
        lam=float(args.lam) if lam is None else lam,
        max_outer_iters=args.max_iters,
        rel_energy_tol=args.tol,
        cg_max_iters=args.cg_max_iters,
        cg_rel_tol=args.cg_tol,
        albedo_floor=args.albedo_floor,
        jacobi=args.jacobi,
    )


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="photosr", description="Joint depth super-resolution and uncalibrated photometric stereo."
    )
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic dataset directory")
    p.add_argument("--surface", choices=synth.SURFACES, default="gaussian_bumps")
    p.add_argument("--albedo", choices=("uniform", "checker", "patches"), default="checker")
    p.add_argument("--albedo-file", help="PNG used as ground-truth albedo (overrides --albedo)")
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--sf", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma-i", type=float, default=0.0)
    p.add_argument("--alpha-z", type=float, default=0.0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("solve", help="estimate depth, albedo and lighting for a dataset")
    p.add_argument("dataset")
    _add_solver_flags(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="compare a solution against the dataset ground truth")
    p.add_argument("solution")
    p.add_argument("dataset")
    p.add_argument("--out", help="directory for eval.json / eval.csv (default: the solution directory)")

    p = sub.add_parser("relight", help="render a solution under new lighting to PNG")
    p.add_argument("solution")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--light", help="12 comma-separated coefficients (R, G, B blocks of 4)")
    g.add_argument("--light-index", type=int, help="reuse the i-th estimated lighting")
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep", help="grid of synthetic runs, one CSV row each")
    p.add_argument("--lambda", dest="lam", default="0.1", help="comma-separated values")
    p.add_argument("--n", default="20")
    p.add_argument("--alpha-z", default=str(synth.DESK_ALPHA_Z))
    p.add_argument("--sigma-i", default=str(synth.DESK_SIGMA_I))
    p.add_argument("--seed", default="0")
    p.add_argument("--sf", type=int, default=2)
    p.add_argument("--surface", choices=synth.SURFACES, default="gaussian_bumps")
    p.add_argument("--albedo", choices=("uniform", "checker", "patches"), default="checker")
    p.add_argument("--jobs", type=int, default=1)
    _add_solver_flags(p, with_lambda=False)
    p.add_argument("--out", required=True)
    return ap


# -- subcommands ------------------------------------------------------------------

def cmd_synth(args) -> int:
    albedo = args.albedo
    if args.albedo_file:
        albedo = None
    size = synth.DESK_SIZE
    w, h = size
    if w % args.sf or h % args.sf:
        raise ValueError(f"--sf {args.sf} does not divide the {w}x{h} benchmark size")
    if albedo is None:
        z = synth.desk_surface(args.surface)
        rho = synth.make_albedo("from_file", {"path": args.albedo_file}, size)
        lights = synth.sample_lighting(args.n, args.seed)
        d = synth.generate_dataset(
            z, rho, lights, args.sf, synth.NoiseParams(args.sigma_i, args.alpha_z, args.seed), synth.desk_camera()
        )
    else:
        d = synth.desk_benchmark(
            n=args.n, sf=args.sf, seed=args.seed, sigma_I=args.sigma_i, alpha_z=args.alpha_z,
            surface=args.surface, albedo=albedo,
        )
    extra = {
        "surface": args.surface,
        "albedo": args.albedo_file or args.albedo,
        "n": args.n,
        "sf": args.sf,
        "seed": args.seed,
        "sigma_i": args.sigma_i,
        "alpha_z": args.alpha_z,
    }
    io.write_dataset(d, args.out, extra)
    print(f"wrote {d.n} images and depth maps to {args.out}")
    return 0


def cmd_solve(args) -> int:
    d = io.read_dataset(args.dataset)
    problems = validate_dataset(d)
    if problems:
        raise DatasetError(problems)
    config = _config(args)
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", solver.ConvergenceWarning)
        state = solver.solve(d, config)
    runtime = time.perf_counter() - t0
    synth_meta = Path(args.dataset) / "synth.json"
    report = {
        "config": config.as_dict(),
        "dataset": {
            "path": str(args.dataset),
            "n": d.n,
            "scale_factor": d.scale_factor,
            "hr_size": list(d.hr_shape[::-1]),
            "lr_size": list(d.lr_shape[::-1]),
            "synth": io.read_json(synth_meta) if synth_meta.is_file() else None,
        },
        "iterations": state.iterations_run,
        "converged": state.converged,
        "cg_capped_iterations": state.cg_warnings,
        "energy_trace": state.energy_trace,
        "runtime_seconds": runtime,
    }
    io.write_solution(state, d.intrinsics, args.out, report)
    print(f"{state.iterations_run} iterations, final energy {state.energy_trace[-1]:.6g}; wrote {args.out}")
    return 0


def evaluate(solution_dir, dataset_dir) -> metrics.EvalReport:
    depth, _, _, cam, report = io.read_solution(solution_dir)
    d = io.read_dataset(dataset_dir)
    if d.ground_truth is None:
        raise ValueError(f"{dataset_dir} has no gt/ directory")
    return metrics.EvalReport(
        rmse_depth=metrics.rmse_depth(depth, d.ground_truth.depth),
        mae_normals=metrics.mae_normals(depth, d.ground_truth.depth, cam),
        energy_trace=list(report.get("energy_trace", [])),
        iterations=int(report.get("iterations", 0)),
        runtime_seconds=float(report.get("runtime_seconds", 0.0)),
        config_echo=report.get("config", {}),
    )


def cmd_eval(args) -> int:
    rep = evaluate(args.solution, args.dataset)
    out = Path(args.out or args.solution)
    out.mkdir(parents=True, exist_ok=True)
    io.write_json(out / "eval.json", rep.as_dict())
    row = {
        "rmse_depth": repr(rep.rmse_depth),
        "mae_normals": repr(rep.mae_normals),
        "iterations": rep.iterations,
        "final_energy": repr(rep.energy_trace[-1]) if rep.energy_trace else "",
        "runtime_seconds": repr(rep.runtime_seconds),
    }
    io.write_csv_rows(out / "eval.csv", EVAL_HEADER, [row])
    print(json.dumps({"rmse_depth": rep.rmse_depth, "mae_normals": rep.mae_normals}))
    return 0


def cmd_relight(args) -> int:
    depth, albedo, lights, cam, _ = io.read_solution(args.solution)
    if args.light is not None:
        coeffs = _floats(args.light)
        light = LightingVector.from_flat(coeffs)
    else:
        if not 0 <= args.light_index < len(lights):
            raise ValueError(f"--light-index must lie in [0, {len(lights)})")
        light = lights[args.light_index]
    img = metrics.relight(depth, albedo, light, cam)
    io.write_png(args.out, img.filled(0.0))
    print(f"wrote {args.out}")
    return 0


def run_one(params: dict) -> dict:
    """One sweep cell; independent of any other cell (own seed, own dataset)."""
    d = synth.desk_benchmark(
        n=params["n"], sf=params["sf"], seed=params["seed"], sigma_I=params["sigma_i"],
        alpha_z=params["alpha_z"], surface=params["surface"], albedo=params["albedo"],
    )
    gt = d.ground_truth
    z_init = solver.init_depth(d.depths, d.scale_factor)
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", solver.ConvergenceWarning)
        st = solver.solve(d, params["config"])
    runtime = time.perf_counter() - t0
    return {
        "lambda": params["config"].lam,
        "n": params["n"],
        "alpha_z": params["alpha_z"],
        "sigma_i": params["sigma_i"],
        "seed": params["seed"],
        "sf": params["sf"],
        "iterations": st.iterations_run,
        "converged": int(st.converged),
        "final_energy": repr(st.energy_trace[-1]),
        "init_rmse_depth": repr(metrics.rmse_depth(z_init, gt.depth)),
        "init_mae_normals": repr(metrics.mae_normals(z_init, gt.depth, d.intrinsics)),
        "rmse_depth": repr(metrics.rmse_depth(st.depth, gt.depth)),
        "mae_normals": repr(metrics.mae_normals(st.depth, gt.depth, d.intrinsics)),
        "runtime_seconds": f"{runtime:.3f}",
    }


def cmd_sweep(args) -> int:
    cells = []
    for lam in _floats(args.lam):
        for n in _ints(args.n):
            for az in _floats(args.alpha_z):
                for si in _floats(args.sigma_i):
                    for seed in _ints(args.seed):
                        cells.append({
                            "config": _config(args, lam), "n": n, "alpha_z": az, "sigma_i": si,
                            "seed": seed, "sf": args.sf, "surface": args.surface, "albedo": args.albedo,
                        })
    if args.jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(run_one, cells))
    else:
        rows = []
        for c in cells:
            rows.append(run_one(c))
            log.info("sweep cell %d/%d done", len(rows), len(cells))
    io.write_csv_rows(args.out, SWEEP_HEADER, rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "solve": cmd_solve,
    "eval": cmd_eval,
    "relight": cmd_relight,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except DatasetError as exc:
        for v in exc.violations:
            print(f"error: {v}", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError, io.FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
