"""CHSH correlations with linear-polarization analyzers and Bell thresholds."""

from __future__ import annotations

import math

import numpy as np
from scipy import optimize

from . import _kernels
from .states import fidelity_vs_eta, validate_density_matrix

_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)

TSIRELSON = 2 * math.sqrt(2)
STANDARD_ANGLES = (0.0, 45.0, 22.5, 67.5)  # a, a', b, b' in degrees


def correlation_tensor(rho) -> np.ndarray:
    """``T[i, j] = Tr(rho s_i (x) s_j)`` for ``s`` in (Z, X)."""
    r = validate_density_matrix(rho)
    ops = (_Z, _X)
    return np.array([[np.trace(r @ np.kron(a, b)).real for b in ops] for a in ops])


def _analyzer(theta_deg: float) -> np.ndarray:
    t = math.radians(2 * theta_deg)
    return np.array([math.cos(t), math.sin(t)])


def correlator(rho, a_deg: float, b_deg: float) -> float:
    """``E(a, b)`` for polarizers at ``a`` (control) and ``b`` (target), in degrees."""
    T = correlation_tensor(rho)
    return float(_analyzer(a_deg) @ T @ _analyzer(b_deg))


def _score(T, a, a2, b, b2) -> float:
    va, va2, vb, vb2 = (_analyzer(x) for x in (a, a2, b, b2))
    return float(va @ T @ (vb - vb2) + va2 @ T @ (vb + vb2))


def chsh_score(rho, angles) -> float:
    """``S = E(a,b) - E(a,b') + E(a',b) + E(a',b')`` for angles ``(a, a', b, b')``."""
    return _score(correlation_tensor(rho), *angles)


def _grid_search(T: np.ndarray, step_deg: float):
    grid = np.arange(0.0, 180.0, step_deg)
    vecs = np.stack([np.cos(np.radians(2 * grid)), np.sin(np.radians(2 * grid))], axis=1)
    corr = vecs @ T @ vecs.T
    s, ia, ia2, ib, ib2 = _kernels.chsh_grid_max(corr)
    return s, (grid[ia], grid[ia2], grid[ib], grid[ib2])


def chsh_grid_search(rho, step_deg: float = 1.0) -> tuple[float, tuple[float, ...]]:
    """Exhaustive maximum of S over a uniform angle grid (period 180 deg)."""
    return _grid_search(correlation_tensor(rho), step_deg)


def chsh_optimize(rho, coarse_deg: float = 10.0, fine_deg: float = 0.01) -> tuple[float, tuple[float, ...]]:
    """Maximize S over analyzer angles.

    Exhaustive coarse grid, then a compass search that halves its step down to
    ``fine_deg``; the first improving move is taken. Since rotating an analyzer
    by 90 deg flips the sign of its outcomes, maximizing S also maximizes |S|.
    """
    T = correlation_tensor(rho)
    best, angles = _grid_search(T, coarse_deg)
    x = list(angles)
    step = coarse_deg / 2
    while step >= fine_deg:
        improved = True
        while improved:
            improved = False
            for i in range(4):
                for sign in (1.0, -1.0):
                    trial = list(x)
                    trial[i] += sign * step
                    s = _score(T, *trial)
                    if s > best + 1e-15:
                        best, x, improved = s, trial, True
                        break
                if improved:
                    break
        step /= 2
    x = tuple(float(a % 180.0) for a in x)
    return float(best), x


def bell_fidelity_threshold() -> float:
    """Bell-state fidelity above which a Bell inequality is violated, ``(2 + 3 sqrt2) / 8``."""
    return (2 + 3 * math.sqrt(2)) / 8


def eta_at_threshold(threshold: float | None = None) -> float:
    """Overlap at which the gate's output fidelity reaches ``threshold`` (bisection)."""
    f = bell_fidelity_threshold() if threshold is None else threshold
    return optimize.bisect(lambda e: fidelity_vs_eta(e) - f, 0.0, 1.0, xtol=1e-15)
