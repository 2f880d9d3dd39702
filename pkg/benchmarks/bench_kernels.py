"""Time the numba and numpy sphere-integral kernels against each other.

    python benchmarks/bench_kernels.py [--repeat 5]

Both kernels are called directly, so the SWARMSEC_DISABLE_NUMBA switch does not
matter here.  The first numba call (compilation) is excluded from the timings.
"""
import argparse
import time

import numpy as np

from swarmsec import _kernels
from swarmsec._accel import NUMBA_ENABLED

CASES = [(4, 91, 180), (8, 181, 360), (16, 181, 360), (8, 362, 720)]


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not NUMBA_ENABLED:
        print("numba disabled: timing the plain-python loops instead of compiled code")
    rng = np.random.default_rng(0)
    cp = 2 * np.pi / 0.125
    print(f"{'K':>3} {'grid':>9} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8} {'rel diff':>9}")
    for k, nt, nph in CASES:
        offsets = rng.uniform(-1.0, 1.0, (k, 3))
        w = rng.uniform(0, 1, k) * np.exp(1j * rng.uniform(-np.pi, np.pi, k))
        _kernels.sphere_power_numba(offsets, w.real, w.imag, cp, nt, nph)  # compile / warm up
        t_np, v_np = best_of(lambda: _kernels.sphere_power_numpy(offsets, w.real, w.imag, cp, nt, nph),
                             args.repeat)
        t_nb, v_nb = best_of(lambda: _kernels.sphere_power_numba(offsets, w.real, w.imag, cp, nt, nph),
                             args.repeat)
        rel = abs(v_np - v_nb) / abs(v_np)
        print(f"{k:>3} {nt:>4}x{nph:<4} {t_np * 1e3:>10.2f} {t_nb * 1e3:>10.2f} {t_np / t_nb:>8.2f} {rel:>9.1e}")


if __name__ == "__main__":
    main()
