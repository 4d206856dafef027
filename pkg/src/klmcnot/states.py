"""Two-qubit density matrices, Bell targets and fidelity functionals.

Density matrices are plain ``(4, 4)`` complex arrays in the basis
(HH, HV, VH, VV), first letter = control photon.
"""

from __future__ import annotations

import enum
import json
import math

import numpy as np

from .errors import ValidationError

BASIS_LABELS = ("HH", "HV", "VH", "VV")
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
EIG_FLOOR = -1e-10


class BellState(str, enum.Enum):
    PHI_PLUS = "PhiPlus"
    PHI_MINUS = "PhiMinus"
    PSI_PLUS = "PsiPlus"
    PSI_MINUS = "PsiMinus"


def as_bell(which) -> BellState:
    if isinstance(which, BellState):
        return which
    try:
        return BellState(which)
    except ValueError:
        names = {b.name.lower().replace("_", ""): b for b in BellState}
        key = str(which).lower().replace("_", "").replace("-", "")
        if key in names:
            return names[key]
        raise ValidationError(f"unknown Bell state {which!r}") from None


_S = 1 / math.sqrt(2)
_BELL_VECTORS = {
    BellState.PHI_PLUS: np.array([_S, 0, 0, _S], dtype=np.complex128),
    BellState.PHI_MINUS: np.array([_S, 0, 0, -_S], dtype=np.complex128),
    BellState.PSI_PLUS: np.array([0, _S, _S, 0], dtype=np.complex128),
    BellState.PSI_MINUS: np.array([0, _S, -_S, 0], dtype=np.complex128),
}


def bell_vector(which) -> np.ndarray:
    return _BELL_VECTORS[as_bell(which)].copy()


def bell_projector(which) -> np.ndarray:
    v = bell_vector(which)
    return np.outer(v, v.conj())


def validate_density_matrix(rho, name: str = "rho") -> np.ndarray:
    """Check the DensityMatrix4 invariants and return a cleaned copy.

    Eigenvalues in ``[-1e-10, 0)`` are clamped to zero; anything more negative
    is rejected.
    """
    r = np.array(rho, dtype=np.complex128)
    if r.shape != (4, 4):
        raise ValidationError(f"{name} must be 4x4, got {r.shape}")
    if not np.all(np.isfinite(r)):
        raise ValidationError(f"{name} has non-finite entries")
    if np.max(np.abs(r - r.conj().T)) > HERMITIAN_TOL:
        raise ValidationError(f"{name} is not Hermitian")
    if abs(np.trace(r).real - 1.0) > TRACE_TOL:
        raise ValidationError(f"{name} has trace {np.trace(r).real!r}, expected 1")
    r = 0.5 * (r + r.conj().T)
    w, v = np.linalg.eigh(r)
    if w.min() < EIG_FLOOR:
        raise ValidationError(f"{name} is not positive semidefinite (min eigenvalue {w.min():.3g})")
    if w.min() < 0:
        w = np.clip(w, 0.0, None)
        r = (v * w) @ v.conj().T
        r /= np.trace(r).real
    return r


def rho_bell(which, eta: float) -> np.ndarray:
    """Time-traced gate output targeting Bell state ``which`` at overlap ``eta``.

    The post-selected output is ``C [f |x> + g |y> + h |z>]`` with time parts
    drawn from ``f``, ``f~`` (arguments swapped) and ``f - f~``; the matrix is
    their Gram matrix with ``<f|f~> = eta`` and ``C^2 = 1/(4 - 2 eta)``.
    """
    eta = _check_unit(eta, "eta")
    b = as_bell(which)
    e, d = eta, 1.0 - eta
    if b in (BellState.PHI_PLUS, BellState.PHI_MINUS):
        s = 1.0 if b is BellState.PHI_PLUS else -1.0
        m = np.array(
            [
                [1, 0, s * d, s * e],
                [0, 0, 0, 0],
                [s * d, 0, 2 * d, -d],
                [s * e, 0, -d, 1],
            ],
            dtype=np.complex128,
        )
    else:
        s = 1.0 if b is BellState.PSI_PLUS else -1.0
        m = np.array(
            [
                [0, 0, 0, 0],
                [0, 1, s * e, s * d],
                [0, s * e, 1, -d],
                [0, s * d, -d, 2 * d],
            ],
            dtype=np.complex128,
        )
    return m / (4.0 - 2.0 * eta)


def fidelity_pure_target(rho, target) -> float:
    """``Tr(rho |B><B|)`` for a Bell target ``B``."""
    r = validate_density_matrix(rho)
    v = bell_vector(target)
    return float(np.real(v.conj() @ r @ v))


_ROUNDING_FLOOR = 64 * np.finfo(float).eps


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    """Square root of a PSD matrix; eigenvalues at rounding level count as zero.

    The fidelity is not Lipschitz at rank-deficient arguments, so rounding
    noise of 1e-17 in a zero eigenvalue would otherwise surface as 3e-9.
    """
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    w = np.where(w > _ROUNDING_FLOOR * max(w.max(), 0.0), w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity_general(rho, sigma) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2``.

    Evaluated as the squared trace norm of ``sqrt(rho) sqrt(sigma)``, i.e. the
    squared sum of its singular values, which avoids a second square root.
    """
    r = validate_density_matrix(rho, "rho")
    s = validate_density_matrix(sigma, "sigma")
    sv = np.linalg.svd(_psd_sqrt(r) @ _psd_sqrt(s), compute_uv=False)
    f = float(np.sum(sv) ** 2)
    return min(max(f, 0.0), 1.0)


def fidelity_det_shortcut(rho, sigma) -> float:
    """``Tr(rho sigma) + 2 sqrt(det rho det sigma)``.

    Equal to the Uhlmann fidelity for 2x2 matrices, and for any dimension when
    one argument is pure. Other 4x4 pairs are rejected because the formula does
    not hold there.
    """
    r = np.asarray(rho, dtype=np.complex128)
    s = np.asarray(sigma, dtype=np.complex128)
    det_r = max(np.linalg.det(r).real, 0.0)
    det_s = max(np.linalg.det(s).real, 0.0)
    if r.shape != (2, 2):
        rank_r = np.sum(np.linalg.eigvalsh(r) > 1e-9)
        rank_s = np.sum(np.linalg.eigvalsh(s) > 1e-9)
        if min(rank_r, rank_s) > 1:
            raise ValidationError("determinant shortcut only holds for qubits or a pure argument")
    return float(np.real(np.trace(r @ s)) + 2 * math.sqrt(det_r * det_s))


def fidelity_vs_eta(eta: float) -> float:
    """Bell-state fidelity of the gate output, ``(1 + eta) / (2 (2 - eta))``."""
    eta = _check_unit(eta, "eta")
    return 0.5 * (1 + eta) / (2 - eta)


def werner_fidelity(v: float) -> float:
    """Fidelity predicted by a Werner-state model with visibility ``v``."""
    v = _check_unit(v, "visibility")
    return (1 + 3 * v) / 4


def werner_state(f_prime: float, which=BellState.PHI_PLUS) -> np.ndarray:
    """``F' |B><B| + (1 - F') I/4``."""
    return f_prime * bell_projector(which) + (1 - f_prime) * np.eye(4) / 4


def best_werner_fit(rho, which=BellState.PHI_PLUS) -> tuple[float, float]:
    """Least-squares Werner weight ``F'`` and the remaining Frobenius distance.

    The model is affine in ``F'``, so the optimum is a projection.
    """
    r = np.asarray(rho, dtype=np.complex128)
    base = np.eye(4) / 4
    direction = bell_projector(which) - base
    f_prime = float(np.real(np.vdot(direction, r - base)) / np.real(np.vdot(direction, direction)))
    dist = float(np.linalg.norm(r - werner_state(f_prime, which)))
    return f_prime, dist


def trace_distance(rho, sigma) -> float:
    d = np.asarray(rho) - np.asarray(sigma)
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(0.5 * (d + d.conj().T)))))


def depolarize(rho, epsilon: float) -> np.ndarray:
    """``(1 - eps) rho + eps I/4``."""
    epsilon = _check_unit(epsilon, "noise epsilon")
    return (1 - epsilon) * np.asarray(rho) + epsilon * np.eye(4) / 4


def density_matrix_to_json(rho, **extra) -> str:
    r = np.asarray(rho, dtype=np.complex128)
    payload = {
        "basis": list(BASIS_LABELS),
        "rho": [[[float(z.real), float(z.imag)] for z in row] for row in r],
    }
    payload.update(extra)
    return json.dumps(payload, indent=2)


def density_matrix_from_json(text: str) -> np.ndarray:
    payload = json.loads(text)
    if payload.get("basis", list(BASIS_LABELS)) != list(BASIS_LABELS):
        raise ValidationError(f"unsupported basis order {payload.get('basis')}")
    arr = np.array(payload["rho"], dtype=float)
    if arr.shape != (4, 4, 2):
        raise ValidationError(f"rho must be 4x4 [re, im] pairs, got shape {arr.shape}")
    return validate_density_matrix(arr[..., 0] + 1j * arr[..., 1])


def _check_unit(x, name: str) -> float:
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValidationError(f"{name}={x} outside [0, 1]")
    return x
