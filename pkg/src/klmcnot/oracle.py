"""Brute-force Fock-space simulation of the CNOT network.

Single-photon modes are indexed by (rail, polarization, temporal), with four
spatial rails: 0 carries m -> f -> p, 1 carries s -> g -> q, and rails 2 and 3
are the vacuum inputs / discard outputs of the two balancing PPBSs. The
temporal index runs over an orthonormal pair spanning both input waveforms.

A two-photon state ``sum_ij A_ij a_i^dag a_j^dag |0>`` is stored as the
symmetric matrix ``A``; a linear-optical unitary ``U`` on single-photon modes
acts as ``A -> U A U^T`` and ``<psi|psi> = 2 sum |A_ij|^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvariantViolation, ValidationError
from .gate import GateConfig, as_jones
from .waveform import TemporalWaveform, inner_product

N_RAILS = 4
RAIL_P = 0
RAIL_Q = 1
N_POL = 2
N_TEMP = 2
DIM = N_RAILS * N_POL * N_TEMP


def mode_index(rail: int, pol: int, temporal: int) -> int:
    return (rail * N_POL + pol) * N_TEMP + temporal


@dataclass(frozen=True)
class SchmidtPair:
    """``u_m = v1`` and ``u_s = c1 v1 + c2 v2``; ``v2`` is None when the two coincide."""

    v1: TemporalWaveform
    v2: TemporalWaveform | None
    c1: complex
    c2: float

    @property
    def single_mode(self) -> bool:
        return self.v2 is None

    @property
    def eta(self) -> float:
        return abs(self.c1) ** 2


def gram_schmidt_temporal(u_m: TemporalWaveform, u_s: TemporalWaveform) -> SchmidtPair:
    """Orthonormal temporal basis spanning both photon waveforms."""
    u_m.check_normalized()
    u_s.check_normalized()
    c1 = inner_product(u_m, u_s)
    residual = u_s.samples - c1 * u_m.samples
    c2_sq = max(1.0 - abs(c1) ** 2, 0.0)
    if c2_sq <= 1e-12:
        return SchmidtPair(u_m, None, c1 / abs(c1), 0.0)
    v2 = TemporalWaveform.normalized(u_m.grid, residual)
    # Quadrature keeps |c1|^2 + c2^2 = 1 only approximately; fix c2 from c1.
    return SchmidtPair(u_m, v2, c1, math.sqrt(c2_sq))


def _local_on_rail(rail: int, op: np.ndarray) -> np.ndarray:
    """Single-photon unitary acting with the 2x2 ``op`` on the polarization of one rail."""
    U = np.eye(DIM, dtype=np.complex128)
    for t in range(N_TEMP):
        for p_out in range(N_POL):
            for p_in in range(N_POL):
                U[mode_index(rail, p_out, t), mode_index(rail, p_in, t)] = op[p_out, p_in]
    return U


def _beamsplitter(rail_a: int, rail_b: int, trans: tuple[float, float]) -> np.ndarray:
    """Per-polarization beam splitter between two rails.

    ``a_P -> sqrt(T_P) a_P + i sqrt(1-T_P) b_P`` and symmetrically for ``b``.
    """
    U = np.eye(DIM, dtype=np.complex128)
    for pol in range(N_POL):
        t = math.sqrt(trans[pol])
        r = 1j * math.sqrt(1.0 - trans[pol])
        for tm in range(N_TEMP):
            ia, ib = mode_index(rail_a, pol, tm), mode_index(rail_b, pol, tm)
            U[ia, ia] = t
            U[ib, ib] = t
            U[ib, ia] = r
            U[ia, ib] = r
    return U


HADAMARD = np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2)


def network_unitaries(config: GateConfig) -> list[tuple[str, np.ndarray]]:
    """Ordered single-photon unitaries of the full gate, discard ports included."""
    p1, p2, p3 = config.ppbs1, config.ppbs2, config.ppbs3
    return [
        ("hadamard_in", _local_on_rail(RAIL_Q, HADAMARD)),
        ("ppbs1", _beamsplitter(RAIL_P, RAIL_Q, (p1.t_h, p1.t_v))),
        # balancing PPBSs are rotated by 90 deg: H sees the V coefficients
        ("ppbs2", _beamsplitter(RAIL_P, 2, (p2.t_v, p2.t_h))),
        ("ppbs3", _beamsplitter(RAIL_Q, 3, (p3.t_v, p3.t_h))),
        ("hadamard_out", _local_on_rail(RAIL_Q, HADAMARD)),
    ]


def two_photon_norm2(A: np.ndarray) -> float:
    return float(2 * np.sum(np.abs(A) ** 2))


def _input_amplitudes(pol_m, pol_s, c1: complex, c2: float) -> np.ndarray:
    jm, js = as_jones(pol_m).array, as_jones(pol_s).array
    x = np.zeros(DIM, dtype=np.complex128)
    y = np.zeros(DIM, dtype=np.complex128)
    for pol in range(N_POL):
        x[mode_index(RAIL_P, pol, 0)] = jm[pol]
        y[mode_index(RAIL_Q, pol, 0)] = js[pol] * c1
        y[mode_index(RAIL_Q, pol, 1)] = js[pol] * c2
    return 0.5 * (np.outer(x, y) + np.outer(y, x))


def _check_norm(A: np.ndarray, expected: float, stage: str) -> None:
    n = two_photon_norm2(A)
    if abs(n - expected) > 1e-10:
        raise InvariantViolation(f"photon-number norm changed at {stage}: {n!r} vs {expected!r}")
    if not np.allclose(A, A.T, atol=1e-13):
        raise InvariantViolation(f"bosonic symmetry broken at {stage}")


def simulate_overlap(pol_m, pol_s, c1: complex, c2: float, config: GateConfig | None = None):
    """Run the full mode-level simulation for temporal coefficients ``(c1, c2)``.

    Returns ``(rho, success_prob)``; ``rho`` is the 4x4 polarization density
    matrix (basis HH, HV, VH, VV) of the events with exactly one photon in p
    and one in q, after tracing out the temporal index.
    """
    config = config or GateConfig.ideal()
    if abs(abs(c1) ** 2 + c2**2 - 1) > 1e-9:
        raise ValidationError("temporal coefficients must satisfy |c1|^2 + c2^2 = 1")
    A = _input_amplitudes(pol_m, pol_s, c1, c2)
    _check_norm(A, 1.0, "input")
    for name, U in network_unitaries(config):
        if not np.allclose(U.conj().T @ U, np.eye(DIM), atol=1e-12):
            raise InvariantViolation(f"{name} is not unitary")
        A = U @ A @ U.T
        _check_norm(A, 1.0, name)

    # amplitude of |p_{P,t}, q_{Q,t'}> is 2 A[p, q] (distinct modes)
    psi = np.zeros((N_POL, N_POL, N_TEMP, N_TEMP), dtype=np.complex128)
    for P in range(N_POL):
        for Q in range(N_POL):
            for t in range(N_TEMP):
                for tq in range(N_TEMP):
                    psi[P, Q, t, tq] = 2 * A[mode_index(RAIL_P, P, t), mode_index(RAIL_Q, Q, tq)]
    psi = psi.reshape(4, N_TEMP * N_TEMP)
    rho = psi @ psi.conj().T
    success = float(np.trace(rho).real)
    if success <= 0:
        raise ValidationError("no coincidence events survive post-selection")
    return rho / success, success


def simulate_eta(pol_m, pol_s, eta: float, config: GateConfig | None = None):
    """Oracle run with a real overlap amplitude ``c1 = sqrt(eta)``."""
    if not 0.0 <= eta <= 1.0:
        raise ValidationError(f"eta={eta} outside [0, 1]")
    return simulate_overlap(pol_m, pol_s, math.sqrt(eta), math.sqrt(1.0 - eta), config)


def simulate_full(pol_m, pol_s, u_m: TemporalWaveform, u_s: TemporalWaveform, config: GateConfig | None = None):
    """Oracle run from sampled waveforms via their Schmidt decomposition."""
    pair = gram_schmidt_temporal(u_m, u_s)
    return simulate_overlap(pol_m, pol_s, pair.c1, pair.c2, config)
