"""Time the depth-system kernels: compiled extension vs numpy fallback.

    python3 benchmarks/bench_kernels.py [--n 20] [--repeat 20]

Uses the desk scene (160x120 HR) and reports the median wall time per call.
"""

import argparse
import statistics
import time

import numpy as np

from photosr import _kernels_py, synth
from photosr.solver import Problem, init_depth

try:
    from photosr import _kernels_c
except ImportError:
    _kernels_c = None


def timed(fn, repeat):
    fn()  # warm-up
    samples = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20, help="number of images")
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)

    d = synth.desk_benchmark(n=args.n)
    prob = Problem(d)
    z = init_depth(d.depths, d.scale_factor).values
    rho = np.ones(z.shape + (3,))
    L = np.stack([l.coeffs for l in d.ground_truth.lighting])
    coef, t = prob.system(z, rho, L)
    ex, ey = prob.ex, prob.ey

    backends = {"python": _kernels_py}
    if _kernels_c is not None:
        backends["cython"] = _kernels_c
    else:
        print("compiled extension not built; timing the numpy fallback only")

    calls = {
        "apply_normal": lambda m: m.apply_normal(z, coef, ex, ey),
        "normal_rhs": lambda m: m.normal_rhs(coef, t, ex, ey),
        "residual_sq": lambda m: m.residual_sq(z, coef, t, ex, ey),
        "jacobi_diag": lambda m: m.jacobi_diag(coef, ex, ey),
    }
    print(f"HR {z.shape[1]}x{z.shape[0]}, n={args.n}, median of {args.repeat} calls (ms)")
    print(f"{'kernel':<14}" + "".join(f"{b:>10}" for b in backends) + ("   speedup" if len(backends) > 1 else ""))
    for name, call in calls.items():
        times = {b: timed(lambda m=m: call(m), args.repeat) for b, m in backends.items()}
        line = f"{name:<14}" + "".join(f"{1e3 * times[b]:>10.2f}" for b in backends)
        if len(backends) > 1:
            line += f"{times['python'] / times['cython']:>9.1f}x"
            ref = call(_kernels_py)
            err = np.max(np.abs(call(_kernels_c) - ref)) / max(np.max(np.abs(ref)), 1e-300)
            line += f"   (max rel diff {err:.1e})"
        print(line)


if __name__ == "__main__":
    main()
