"""Compare the compiled and numpy kernels.

    python3 benchmarks/bench_kernels.py [--cells 100000] [--repeat 5] [--simulate]
"""

import argparse
import time

import numpy as np

from lowmach import kernels
from lowmach.initdata import make_well_prepared
from lowmach.models import ModelId, RunConfig, default_params
from lowmach.scheme import simulate


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def random_cells(n, seed=0, lo=0.1, hi=10.0):
    rng = np.random.default_rng(seed)
    return dict(
        Rp=rng.uniform(lo, hi, n), Rm=rng.uniform(lo, hi, n),
        Sp=rng.uniform(-1, 1, n), Sm=rng.uniform(-1, 1, n),
    )


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cells", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--simulate", action="store_true", help="also time a full M3 run per backend")
    args = ap.parse_args(argv)

    backends = [("python", kernels.python_backend)]
    if kernels.compiled_backend is not None:
        backends.append(("compiled", kernels.compiled_backend))
    else:
        print("compiled extension not built; timing the numpy backend only")

    c = random_cells(args.cells)
    gp, gm = 1.4, 2.0
    # relaxation cells: moderate masses, fraction displaced from equilibrium
    r = random_cells(args.cells // 10, seed=1, lo=0.25, hi=1.0)
    astar, _, _ = kernels.python_backend.closure_solve(r["Rp"], r["Rm"], r["Sp"], r["Sm"], gp, gm)
    a0 = np.clip(astar + np.random.default_rng(2).uniform(-0.1, 0.1, astar.size), 0.05, 0.95)

    cases = [
        ("closure_solve", lambda b: b.closure_solve(c["Rp"], c["Rm"], c["Sp"], c["Sm"], gp, gm)),
        ("relax_solve h=0.05", lambda b: b.relax_solve(r["Rp"], r["Rm"], r["Sp"], r["Sm"], a0, astar,
                                                       0.05, gp, gm)),
        ("relax_solve h=2", lambda b: b.relax_solve(r["Rp"], r["Rm"], r["Sp"], r["Sm"], a0, astar,
                                                    2.0, gp, gm)),
    ]
    print(f"{'kernel':<22}" + "".join(f"{name:>14}" for name, _ in backends) + f"{'speedup':>10}")
    for label, fn in cases:
        times = [best_of(lambda: fn(b), args.repeat) for _, b in backends]
        speed = f"{times[0] / times[-1]:9.1f}x" if len(times) > 1 else ""
        print(f"{label:<22}" + "".join(f"{t * 1e3:12.1f}ms" for t in times) + speed)

    if args.simulate:
        cfg = RunConfig(ModelId.M3, default_params(ModelId.M3, tau_relax=1.0), epsilon=0.1,
                        output_stride=10 ** 9)
        init = make_well_prepared(cfg)
        saved = kernels.backend
        try:
            times = []
            for _, b in backends:
                kernels.backend = b
                times.append(best_of(lambda: simulate(cfg, init), 1))
        finally:
            kernels.backend = saved
        speed = f"{times[0] / times[-1]:9.1f}x" if len(times) > 1 else ""
        print(f"{'M3 simulate eps=0.1':<22}" + "".join(f"{t:13.2f}s" for t in times) + speed)


if __name__ == "__main__":
    main()
