"""Compare the compiled and pure-Python kernel backends.

Run ``python3 benchmarks/bench_kernels.py``. Each kernel is timed on the same
inputs under both backends. The results must agree, and the speedup is printed.
"""
import argparse
import time

import numpy as np

from sqhhg import kernels
from sqhhg.harmonic_map import pushforward_mc
from sqhhg.phase_space import GaussianStateSpec, PhasePoint
from sqhhg.sfa_response import AtomModel, SyntheticResponse, field_from_alpha, lewenstein_dipole

W, EPS = 0.057, 1e-4
E0 = 2 * W * np.sqrt(9 * W)


def _time(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_dipole(backend, threads, cycles):
    drive = field_from_alpha(E0 / (2 * EPS), EPS, W, n_cycles=cycles)
    return lambda: lewenstein_dipole(drive, AtomModel(11 * W), points_per_cycle=256, backend=backend,
                                     num_threads=threads).d


def bench_mc(backend, threads, samples):
    pump = GaussianStateSpec(PhasePoint(4.0, 0.0), 0.0, 0.0, 0.5)
    model = SyntheticResponse(0.04, 2.0, 0.0, 1.0)
    axes = (np.linspace(-2.4, 3.6, 41), np.linspace(-3, 3, 41))
    return lambda: pushforward_mc(pump, model, 2, samples, 1, axes, backend=backend, num_threads=threads).values


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--cycles", type=int, default=4)
    ap.add_argument("--samples", type=int, default=100_000)
    args = ap.parse_args(argv)
    if not kernels.compiled_available():
        raise SystemExit("compiled kernels are not built; reinstall with a C compiler and Cython available")
    cases = {
        f"lewenstein_dipole ({args.cycles} cycles)": lambda b: bench_dipole(b, args.threads, args.cycles),
        f"pushforward_mc ({args.samples} samples, 41x41 nodes)": lambda b: bench_mc(b, args.threads, args.samples),
    }
    print(f"{'kernel':48s} {'compiled s':>11s} {'python s':>10s} {'speedup':>8s} {'max rel diff':>13s}")
    for name, make in cases.items():
        tc, rc = _time(make("compiled"), args.repeat)
        tp, rp = _time(make("python"), args.repeat)
        diff = float(np.max(np.abs(rc - rp)) / np.max(np.abs(rp)))
        print(f"{name:48s} {tc:11.4f} {tp:10.4f} {tp / tc:8.1f} {diff:13.1e}")


if __name__ == "__main__":
    main()
