"""Compare the numba and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--n 10] [--repeat 5]
"""

import argparse
import time

import numpy as np

from annealbench import _kernels
from annealbench.instance_gen import GeneratorConfig, generate_usa_instance
from annealbench.spin_core import transverse_ground_state


def best_of(fn, repeat):
    fn()  # warm-up, also triggers compilation
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(backend, inst):
    n = inst.n_spins
    diag = np.ascontiguousarray(0.5 * inst.diagonal)
    psi = transverse_ground_state(n)
    out = np.empty_like(psi)
    steps = 200
    return {
        "matvec": lambda: backend.matvec(diag, -0.5, n, psi, out),
        "krylov step": lambda: backend.krylov_expm(diag, -0.5, n, psi, 0.02, _kernels.KRYLOV_DIM, _kernels.KRYLOV_TOL),
        f"quench trace ({steps} steps)": lambda: backend.observe_trace(
            diag, -0.5, n, psi, 0.02, steps, np.zeros(inst.dim), 1.0 / n, _kernels.KRYLOV_DIM, _kernels.KRYLOV_TOL
        ),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=10)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    inst = generate_usa_instance(GeneratorConfig(args.n, seed=0))
    backends = [_kernels.NUMPY] + ([_kernels.NUMBA] if _kernels.NUMBA is not None else [])
    timings = {b.name: {k: best_of(f, args.repeat) for k, f in cases(b, inst).items()} for b in backends}

    print(f"N = {args.n}, dim = {inst.dim}")
    print(f"{'kernel':<26}" + "".join(f"{b.name:>12}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for name in timings["numpy"]:
        row = [timings[b.name][name] for b in backends]
        line = f"{name:<26}" + "".join(f"{t * 1e3:>10.3f}ms" for t in row)
        if len(row) > 1:
            line += f"{row[0] / row[1]:>11.1f}x"
        print(line)


if __name__ == "__main__":
    main()
