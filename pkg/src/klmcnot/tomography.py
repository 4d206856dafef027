"""Maximum-likelihood two-qubit state reconstruction from coincidence counts.

The state is parameterized as ``rho = T^dag T / Tr(T^dag T)`` with ``T`` upper
triangular (4 real diagonal + 6 complex off-diagonal = 16 real parameters), so
every iterate is a valid density matrix. The log-likelihood

    L = sum_k n_k log <v_k| T^dag T |v_k>  -  N log Tr(T^dag T)

assumes each setting's four projectors resolve the identity, which holds for
the two-detector-per-photon analyzers used here.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import _kernels
from .errors import IncompleteScheduleError, ValidationError
from .measurement import CoincidenceDataset
from .states import validate_density_matrix

log = logging.getLogger(__name__)

_OFF = np.triu_indices(4, 1)
_DIAG = np.diag_indices(4)


@dataclass
class MLEResult:
    rho: np.ndarray
    loglik: float
    history: list[float] = field(default_factory=list)
    n_iter: int = 0
    converged: bool = False
    message: str = ""


def _unpack(x: np.ndarray) -> np.ndarray:
    T = np.zeros((4, 4), dtype=np.complex128)
    T[_DIAG] = x[:4]
    T[_OFF] = x[4:10] + 1j * x[10:16]
    return T


def _pack(T: np.ndarray) -> np.ndarray:
    return np.concatenate([T[_DIAG].real, T[_OFF].real, T[_OFF].imag])


def _projector_matrix(vecs: np.ndarray) -> np.ndarray:
    """Rows are vectorized outcome projectors, shape (K, 16)."""
    return np.einsum("ki,kj->kij", vecs, vecs.conj()).reshape(len(vecs), 16)


def check_informationally_complete(vecs: np.ndarray) -> None:
    rank = np.linalg.matrix_rank(_projector_matrix(vecs), tol=1e-9)
    if rank < 16:
        raise IncompleteScheduleError(f"measurement schedule spans only {rank} of 16 operator dimensions")


def linear_inversion(vecs: np.ndarray, freqs: np.ndarray) -> np.ndarray:
    """Least-squares state estimate from per-setting frequencies, projected to a valid state."""
    A = _projector_matrix(vecs)
    # Tr(rho Pi) = sum_ij rho_ji Pi_ij = vec(Pi) . vec(rho^T)
    sol, *_ = np.linalg.lstsq(A, freqs.astype(np.complex128), rcond=None)
    rho = sol.reshape(4, 4).T
    rho = 0.5 * (rho + rho.conj().T)
    w, v = np.linalg.eigh(rho)
    w = np.clip(w.real, 0.0, None)
    if w.sum() <= 0:
        return np.eye(4, dtype=np.complex128) / 4
    rho = (v * w) @ v.conj().T
    return rho / np.trace(rho).real


def mle_fit(
    dataset: CoincidenceDataset,
    rtol: float = 1e-10,
    max_iter: int = 100_000,
    rho0: np.ndarray | None = None,
) -> MLEResult:
    """Maximize the multinomial likelihood of ``dataset``.

    Ascent is L-BFGS with an analytic gradient; every accepted iterate
    satisfies a sufficient-increase line-search condition, so the recorded
    log-likelihood sequence is non-decreasing. Iteration stops once the
    likelihood ratio between successive iterates differs from one by less than
    ``rtol`` (an absolute change of ``rtol`` in log-likelihood), or when no
    further increase is representable in floating point.
    """
    if len(dataset) == 0:
        raise ValidationError("empty dataset")
    counts = np.asarray(dataset.counts, dtype=np.float64).reshape(-1)
    if counts.sum() <= 0:
        raise ValidationError("dataset contains no coincidences")
    vecs = np.concatenate([s.outcome_vectors() for s in dataset.settings])
    check_informationally_complete(vecs)
    n_total = counts.sum()

    if rho0 is None:
        per_setting = np.asarray(dataset.counts, dtype=np.float64)
        totals = per_setting.sum(axis=1, keepdims=True)
        freqs = np.divide(per_setting, totals, out=np.zeros_like(per_setting), where=totals > 0).reshape(-1)
        rho0 = linear_inversion(vecs, freqs)
    # start strictly inside the cone so every observed outcome has q > 0
    start = 0.98 * np.asarray(rho0) + 0.02 * np.eye(4) / 4
    x0 = _pack(np.linalg.cholesky(start).conj().T)

    def neg_loglik(x):
        T = _unpack(x)
        rt = T.conj().T @ T
        tr = float(np.trace(rt).real)
        ll, q, R = _kernels.likelihood_terms(vecs, counts, rt)
        if not np.isfinite(ll) or np.any(q[counts > 0] <= 0):
            return np.inf, np.zeros_like(x)
        L = ll - n_total * np.log(tr)
        # dL/dT* = T (R - N/tr I); real-parameter gradient is twice its components
        G = 2.0 * (T @ (R - (n_total / tr) * np.eye(4)))
        G = np.triu(G)
        return -L, -_pack(G)

    history = []
    f0, _ = neg_loglik(x0)
    history.append(-f0)

    def record(xk):
        history.append(-neg_loglik(xk)[0])

    ftol = rtol / max(abs(f0), 1.0)
    res = optimize.minimize(
        neg_loglik,
        x0,
        jac=True,
        method="L-BFGS-B",
        callback=record,
        options={"maxiter": int(max_iter), "ftol": ftol, "gtol": 1e-14, "maxcor": 30, "maxls": 50},
    )
    T = _unpack(res.x)
    rho = T.conj().T @ T
    rho = rho / np.trace(rho).real
    rho = validate_density_matrix(0.5 * (rho + rho.conj().T))
    steps = np.diff(history)
    converged = bool(res.success) or "LNSRCH" in str(res.message) or (len(steps) > 0 and abs(steps[-1]) < rtol)
    if not converged:
        log.warning("MLE did not converge: %s", res.message)
    return MLEResult(rho, -float(res.fun), history, int(res.nit), converged, str(res.message))


def mle_reconstruct(dataset: CoincidenceDataset, **kwargs) -> np.ndarray:
    """Maximum-likelihood density matrix for ``dataset``."""
    return mle_fit(dataset, **kwargs).rho
