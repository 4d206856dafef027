"""Hot inner loops, each with a numba and a pure-numpy implementation.

The numba path is used when numba imports cleanly and the environment
variable ``KLMCNOT_DISABLE_NUMBA`` is unset or ``0``. Both paths are always
importable so tests and the benchmark can compare them directly.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLE = os.environ.get("KLMCNOT_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")

try:
    if _DISABLE:
        raise ImportError("numba disabled by KLMCNOT_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


# ---------------------------------------------------------------------------
# Likelihood terms for rank-one projective measurements
# ---------------------------------------------------------------------------


def likelihood_terms_numpy(vecs, counts, rho):
    """Return ``(sum n log q, q, R)`` for projectors ``|v><v|``.

    ``q_k = <v_k|rho|v_k>`` and ``R = sum_k n_k/q_k |v_k><v_k|`` over outcomes
    with ``n_k > 0``. ``rho`` need not be trace normalized.
    """
    q = np.einsum("ki,ij,kj->k", vecs.conj(), rho, vecs).real
    mask = counts > 0
    w = np.zeros_like(q)
    w[mask] = counts[mask] / q[mask]
    with np.errstate(divide="ignore", invalid="ignore"):
        loglik = float(np.sum(counts[mask] * np.log(q[mask])))
    R = np.einsum("k,ki,kj->ij", w, vecs, vecs.conj())
    return loglik, q, R


def chsh_grid_max_numpy(corr):
    """Maximize ``E[a,b] - E[a,b'] + E[a',b] + E[a',b']`` over grid indices.

    For fixed ``(a, a')`` the ``b`` and ``b'`` maximizations decouple, which
    makes the exhaustive search O(n^3). Returns ``(S, ia, ia2, ib, ib2)``.
    """
    n = corr.shape[0]
    best = -np.inf
    arg = (0, 0, 0, 0)
    for ia in range(n):
        plus = corr[ia][None, :] + corr  # rows: a', cols: b
        minus = corr - corr[ia][None, :]  # E[a',b'] - E[a,b']
        ib = np.argmax(plus, axis=1)
        ib2 = np.argmax(minus, axis=1)
        total = plus[np.arange(n), ib] + minus[np.arange(n), ib2]
        ia2 = int(np.argmax(total))
        if total[ia2] > best:
            best = float(total[ia2])
            arg = (ia, ia2, int(ib[ia2]), int(ib2[ia2]))
    return (best,) + arg


if HAVE_NUMBA:

    @njit(cache=True)
    def _likelihood_terms_nb(vecs, counts, rho):
        K = vecs.shape[0]
        d = vecs.shape[1]
        q = np.empty(K)
        R = np.zeros((d, d), dtype=np.complex128)
        loglik = 0.0
        for k in range(K):
            acc = 0.0 + 0.0j
            for i in range(d):
                row = 0.0 + 0.0j
                for j in range(d):
                    row += rho[i, j] * vecs[k, j]
                acc += np.conj(vecs[k, i]) * row
            q[k] = acc.real
            n = counts[k]
            if n > 0:
                loglik += n * np.log(q[k])
                w = n / q[k]
                for i in range(d):
                    for j in range(d):
                        R[i, j] += w * vecs[k, i] * np.conj(vecs[k, j])
        return loglik, q, R

    @njit(cache=True)
    def _chsh_grid_max_nb(corr):
        n = corr.shape[0]
        best = -np.inf
        b0 = 0
        b1 = 0
        b2 = 0
        b3 = 0
        for ia in range(n):
            for ia2 in range(n):
                mp = -np.inf
                jp = 0
                mm = -np.inf
                jm = 0
                for ib in range(n):
                    p = corr[ia, ib] + corr[ia2, ib]
                    if p > mp:
                        mp = p
                        jp = ib
                    m = corr[ia2, ib] - corr[ia, ib]
                    if m > mm:
                        mm = m
                        jm = ib
                if mp + mm > best:
                    best = mp + mm
                    b0 = ia
                    b1 = ia2
                    b2 = jp
                    b3 = jm
        return best, b0, b1, b2, b3

    def likelihood_terms_numba(vecs, counts, rho):
        loglik, q, R = _likelihood_terms_nb(
            np.ascontiguousarray(vecs, dtype=np.complex128),
            np.ascontiguousarray(counts, dtype=np.float64),
            np.ascontiguousarray(rho, dtype=np.complex128),
        )
        return float(loglik), q, R

    def chsh_grid_max_numba(corr):
        best, a, a2, b, b2 = _chsh_grid_max_nb(np.ascontiguousarray(corr, dtype=np.float64))
        return float(best), int(a), int(a2), int(b), int(b2)

    likelihood_terms = likelihood_terms_numba
    chsh_grid_max = chsh_grid_max_numba
    BACKEND = "numba"
else:
    likelihood_terms_numba = None
    chsh_grid_max_numba = None
    likelihood_terms = likelihood_terms_numpy
    chsh_grid_max = chsh_grid_max_numpy
    BACKEND = "numpy"
