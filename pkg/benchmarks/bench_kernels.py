"""Compare the compiled kernel backend against the NumPy fallback.

Times the hot kernels head to head (both implementations are importable side
by side), then runs the full nominal closed loop once per backend in a
subprocess, since the backend is fixed at import time.

Usage: python3 benchmarks/bench_kernels.py [--skip-full-run]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from gppursuit import _kernels_py

try:
    from gppursuit import _kernels
except ImportError:
    _kernels = None

_FULL_RUN = """
import time
import gppursuit
from gppursuit.config import (default_config, pose_from_config,
                              profiles_from_config, scenario_from_config)
from gppursuit.simulate import generate_training, run_scenario, train_switched

cfg = default_config()
tr = cfg["training"]
datasets = generate_training(profiles_from_config(cfg), tr["points_per_profile"],
                             tr["noise_std"], seed=0,
                             start=pose_from_config(tr["start"]))
t0 = time.perf_counter()
models = train_switched(datasets, seed=0, noise_std=tr["noise_std"])
fit = time.perf_counter() - t0
trace = run_scenario(scenario_from_config(cfg, models, case="switched"))
print(f"{gppursuit.active_backend()} fit={fit:.3f}s run={trace.elapsed:.3f}s")
"""


def timeit(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_micro(repeat: int) -> None:
    rng = np.random.default_rng(0)
    w = rng.normal(size=3)
    xi = rng.normal(size=6)
    xa = rng.normal(size=(30, 6))
    xb = rng.normal(size=(420, 6))
    lam = np.full(6, 0.5)
    y = rng.normal(size=(30, 6))
    sn2 = np.full(6, 1e-4)

    # a factorized toy model for gp_eval
    k = _kernels_py.sqexp_mat(xa, xa, lam, 1.0)
    chols = np.empty((6, 30, 30))
    alpha = np.empty((30, 6))
    for i in range(6):
        low = np.linalg.cholesky(k + (sn2[i] + 1e-10) * np.eye(30))
        chols[i] = low
        alpha[:, i] = np.linalg.solve(k + (sn2[i] + 1e-10) * np.eye(30), y[:, i])
    chols = np.ascontiguousarray(chols)
    alpha = np.ascontiguousarray(alpha)
    x1 = np.ascontiguousarray(xb[0])

    cases = [
        ("so3_exp", lambda m: lambda: [m.so3_exp(w) for _ in range(1000)]),
        ("se3_exp", lambda m: lambda: [m.se3_exp(xi, 0.02) for _ in range(1000)]),
        ("sqexp_mat 30x420", lambda m: lambda: m.sqexp_mat(xa, xb, lam, 1.0)),
        ("gp_eval x1000", lambda m: lambda: [m.gp_eval(xa, lam, 1.0, alpha,
                                                       chols, x1)
                                             for _ in range(1000)]),
        ("lml_total M=30", lambda m: lambda: m.lml_total(xa, y, lam, 1.0, sn2,
                                                         1e-10)),
    ]
    print(f"{'kernel':<18}{'python':>12}{'compiled':>12}{'speedup':>10}")
    for name, make in cases:
        t_py = timeit(make(_kernels_py), repeat)
        if _kernels is None:
            print(f"{name:<18}{t_py * 1e3:>10.2f}ms{'n/a':>12}{'':>10}")
            continue
        t_c = timeit(make(_kernels), repeat)
        print(f"{name:<18}{t_py * 1e3:>10.2f}ms{t_c * 1e3:>10.2f}ms"
              f"{t_py / t_c:>9.1f}x")


def bench_full_run() -> None:
    print("\nfull nominal run (training fit + 20 s closed loop):")
    for backend in ("python", "compiled"):
        if backend == "compiled" and _kernels is None:
            print("compiled backend not built; skipping")
            continue
        env = dict(os.environ, PURSUIT_BACKEND=backend)
        out = subprocess.run([sys.executable, "-c", _FULL_RUN], env=env,
                             capture_output=True, text=True)
        print(out.stdout.strip() or out.stderr.strip())


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5,
                    help="timing repetitions per kernel (best is kept)")
    ap.add_argument("--skip-full-run", action="store_true")
    args = ap.parse_args()
    if _kernels is None:
        print("note: compiled extension not available, timing fallback only")
    bench_micro(args.repeat)
    if not args.skip_full_run:
        bench_full_run()


if __name__ == "__main__":
    main()
