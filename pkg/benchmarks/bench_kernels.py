"""Compiled kernels vs the pure-Python fallback.

Times one master-equation right-hand side and one full adaptive integration
per cycle size. Usage::

    python benchmarks/bench_kernels.py [--sizes 5,16,64,128] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from hyperwalk import _fallback
from hyperwalk.core import localized_state

try:
    from hyperwalk import _kernels
except ImportError:
    _kernels = None


def best_time(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def bench_rhs(N, repeat):
    rng = np.random.default_rng(N)
    rho = np.ascontiguousarray(rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N)))
    out = np.empty_like(rho)
    number = max(1, 200_000 // (N * N))
    py = best_time(lambda: _fallback.master_rhs(rho, 0.3, out), repeat, number)
    cy = best_time(lambda: _kernels.master_rhs(rho, 0.3, out), repeat, number)
    return py, cy


def bench_dopri5(N, repeat, t_end=20.0):
    rho0 = localized_state(N)
    times = np.linspace(0.0, t_end, 11)
    py_states, py_steps = _fallback.dopri5(rho0, 0.3, times)
    cy_states, cy_steps = _kernels.dopri5(rho0, 0.3, times)
    diff = float(np.max(np.abs(np.asarray(cy_states) - py_states)))
    py = best_time(lambda: _fallback.dopri5(rho0, 0.3, times), repeat, 1)
    cy = best_time(lambda: _kernels.dopri5(rho0, 0.3, times), repeat, 1)
    return py, cy, py_steps, cy_steps, diff


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="5,16,64,128")
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if _kernels is None:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation` first")
    sizes = [int(s) for s in args.sizes.split(",")]

    print(f"{'N':>5} {'rhs python':>12} {'rhs cython':>12} {'speedup':>8}")
    for N in sizes:
        py, cy = bench_rhs(N, args.repeat)
        print(f"{N:>5} {py * 1e6:>10.2f}us {cy * 1e6:>10.2f}us {py / cy:>7.1f}x")

    print()
    print(f"{'N':>5} {'dopri5 python':>14} {'dopri5 cython':>14} {'speedup':>8} {'steps py/cy':>12} {'max diff':>9}")
    for N in sizes:
        py, cy, sp, sc, diff = bench_dopri5(N, args.repeat)
        print(f"{N:>5} {py * 1e3:>12.2f}ms {cy * 1e3:>12.2f}ms {py / cy:>7.1f}x {sp:>5}/{sc:<6} {diff:>9.1e}")


if __name__ == "__main__":
    main()
