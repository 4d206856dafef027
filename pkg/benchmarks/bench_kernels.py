#!/usr/bin/env python3
"""Time the numba and numpy implementations of the hot kernels side by side.

Usage:
    python benchmarks/bench_kernels.py [--repeat N]

Reports best-of-N wall time per call and checks that both paths agree.
The numba path is warmed up once first so compilation is not timed.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from klmcnot import _kernels, gate, measurement, tomography
from klmcnot.bell import correlation_tensor


def _best_time(fn, args, repeat: int) -> float:
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def _likelihood_case():
    rho, _ = gate.cnot_density_matrix("D", "H", 0.9)
    data = measurement.simulate_counts(rho, measurement.tomography_schedule(), 10**6, seed=1)
    vecs = np.concatenate([s.outcome_vectors() for s in data.settings])
    counts = np.asarray(data.counts, dtype=np.float64).reshape(-1)
    return vecs, counts, rho


def _chsh_case(step_deg: float):
    rho, _ = gate.cnot_density_matrix("D", "H", 0.9)
    T = correlation_tensor(rho)
    grid = np.arange(0.0, 180.0, step_deg)
    v = np.stack([np.cos(np.radians(2 * grid)), np.sin(np.radians(2 * grid))], axis=1)
    return (v @ T @ v.T,)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)

    if not _kernels.HAVE_NUMBA:
        print("numba unavailable or disabled; only the numpy path can be timed")

    cases = [
        ("likelihood_terms (144 outcomes)", "likelihood_terms", _likelihood_case()),
        ("chsh_grid_max (1 deg grid)", "chsh_grid_max", _chsh_case(1.0)),
        ("chsh_grid_max (0.5 deg grid)", "chsh_grid_max", _chsh_case(0.5)),
    ]
    print(f"{'kernel':34s} {'numpy [ms]':>12s} {'numba [ms]':>12s} {'speedup':>8s}  agree")
    ok = True
    for label, name, case_args in cases:
        f_np = getattr(_kernels, name + "_numpy")
        f_nb = getattr(_kernels, name + "_numba")
        t_np = _best_time(f_np, case_args, args.repeat)
        if f_nb is None:
            print(f"{label:34s} {t_np * 1e3:12.3f} {'-':>12s} {'-':>8s}  -")
            continue
        f_nb(*case_args)  # compile
        t_nb = _best_time(f_nb, case_args, args.repeat)
        r_np, r_nb = f_np(*case_args), f_nb(*case_args)
        agree = all(np.allclose(a, b, rtol=1e-12, atol=1e-12) for a, b in zip(r_np, r_nb))
        ok &= agree
        print(f"{label:34s} {t_np * 1e3:12.3f} {t_nb * 1e3:12.3f} {t_np / t_nb:8.1f}x  {agree}")

    t0 = time.perf_counter()
    rho, _ = gate.cnot_density_matrix("D", "H", 0.9)
    data = measurement.simulate_counts(rho, measurement.tomography_schedule(), 10**6, seed=2)
    fit = tomography.mle_fit(data)
    print(f"end-to-end MLE with backend={_kernels.BACKEND}: {time.perf_counter() - t0:.3f} s, {fit.n_iter} iterations")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
