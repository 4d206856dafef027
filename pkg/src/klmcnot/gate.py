"""Analytic two-photon propagation through the three-PPBS CNOT.

A two-photon state is stored as, for each polarization pair ``PQ`` (photon in
port p / m first, port q / s second), a coefficient pair ``(a, b)`` meaning

    a * f(t1, t2) + b * f(t2, t1),     f(t, t') = u_m(t) u_s(t').

Inner products only need ``<f|f> = 1`` and ``<f(t,t')|f(t',t)> = eta``, so the
representation is exact for any waveform pair with overlap ``eta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import DegenerateStateError, ValidationError

POL_PAIRS = ("HH", "HV", "VH", "VV")
_SQ2 = 1 / math.sqrt(2)
_HADAMARD = np.array([[1, 1], [1, -1]], dtype=np.complex128) * _SQ2
_COEF_TOL = 1e-12


@dataclass(frozen=True)
class JonesVector:
    h: complex
    v: complex

    def __post_init__(self):
        n = abs(self.h) ** 2 + abs(self.v) ** 2
        if abs(n - 1) > _COEF_TOL:
            raise ValidationError(f"Jones vector not normalized: |h|^2+|v|^2 = {n!r}")

    @classmethod
    def from_label(cls, label: str) -> "JonesVector":
        try:
            h, v = _JONES[label.upper()]
        except KeyError:
            raise ValidationError(f"unknown polarization label {label!r}") from None
        return cls(h, v)

    @classmethod
    def from_array(cls, arr) -> "JonesVector":
        a = np.asarray(arr, dtype=np.complex128)
        return cls(complex(a[0]), complex(a[1]))

    @property
    def array(self) -> np.ndarray:
        return np.array([self.h, self.v], dtype=np.complex128)


_JONES = {
    "H": (1.0, 0.0),
    "V": (0.0, 1.0),
    "D": (_SQ2, _SQ2),
    "A": (_SQ2, -_SQ2),
    "R": (_SQ2, 1j * _SQ2),
    "L": (_SQ2, -1j * _SQ2),
}


def as_jones(pol) -> JonesVector:
    if isinstance(pol, JonesVector):
        return pol
    if isinstance(pol, str):
        return JonesVector.from_label(pol)
    return JonesVector.from_array(pol)


@dataclass(frozen=True)
class PPBS:
    """Intensity transmission/reflection per polarization."""

    t_h: float = 1.0
    t_v: float = 1 / 3
    r_h: float | None = None
    r_v: float | None = None

    def __post_init__(self):
        for name in ("t_h", "t_v"):
            t = getattr(self, name)
            if not 0.0 <= t <= 1.0:
                raise ValidationError(f"{name}={t} outside [0, 1]")
        if self.r_h is None:
            object.__setattr__(self, "r_h", 1.0 - self.t_h)
        if self.r_v is None:
            object.__setattr__(self, "r_v", 1.0 - self.t_v)
        for pol in ("h", "v"):
            t, r = getattr(self, "t_" + pol), getattr(self, "r_" + pol)
            if not 0.0 <= r <= 1.0 or abs(t + r - 1.0) > _COEF_TOL:
                raise ValidationError(f"PPBS {pol.upper()}: T + R = {t + r!r}, expected 1")


def _ideal_ppbs() -> PPBS:
    return PPBS(1.0, 1 / 3)


@dataclass(frozen=True)
class GateConfig:
    """Coefficients of the interfering PPBS (ppbs1) and the two balancing ones.

    ppbs2 and ppbs3 are mounted perpendicular to ppbs1, so an H photon leaving
    them is attenuated by ``sqrt(t_v)`` and a V photon by ``sqrt(t_h)``.
    """

    ppbs1: PPBS = field(default_factory=_ideal_ppbs)
    ppbs2: PPBS = field(default_factory=_ideal_ppbs)
    ppbs3: PPBS = field(default_factory=_ideal_ppbs)

    @classmethod
    def ideal(cls) -> "GateConfig":
        return cls()

    @classmethod
    def transparent(cls) -> "GateConfig":
        """No interference and no attenuation: every PPBS fully transmits."""
        p = PPBS(1.0, 1.0)
        return cls(p, p, p)

    @classmethod
    def from_mapping(cls, data: dict | None) -> "GateConfig":
        """Build from nested (``{ppbs1: {tH: ..}}``) or dotted (``{'ppbs1.tH': ..}``) keys.

        Omitted keys take ideal values.
        """
        flat = _flatten(data or {})
        allowed = {f"ppbs{i}.{k}" for i in (1, 2, 3) for k in ("tH", "tV")}
        unknown = set(flat) - allowed
        if unknown:
            raise ValidationError(f"unknown gate config keys: {sorted(unknown)}")
        ideal = _ideal_ppbs()
        parts = []
        for i in (1, 2, 3):
            parts.append(
                PPBS(
                    float(flat.get(f"ppbs{i}.tH", ideal.t_h)),
                    float(flat.get(f"ppbs{i}.tV", ideal.t_v)),
                )
            )
        return cls(*parts)

    def to_mapping(self) -> dict:
        return {
            f"ppbs{i}": {"tH": p.t_h, "tV": p.t_v}
            for i, p in enumerate((self.ppbs1, self.ppbs2, self.ppbs3), start=1)
        }

    @classmethod
    def load(cls, path) -> "GateConfig":
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        if "gate" in data and isinstance(data["gate"], dict):
            data = data["gate"]
        return cls.from_mapping(data)

    def dump(self, path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_mapping(), sort_keys=True))


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


@dataclass(frozen=True, eq=False)
class PolTemporalTwoPhotonState:
    """Coefficients ``coeffs[PQ] = (a, b)`` over ``POL_PAIRS`` and the shared overlap ``eta``."""

    coeffs: np.ndarray
    eta: float

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.complex128)
        if c.shape != (4, 2):
            raise ValidationError(f"coeffs must have shape (4, 2), got {c.shape}")
        if not 0.0 <= self.eta <= 1.0:
            raise ValidationError(f"eta={self.eta} outside [0, 1]")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def term_norms2(self) -> np.ndarray:
        a, b = self.coeffs[:, 0], self.coeffs[:, 1]
        return np.abs(a) ** 2 + np.abs(b) ** 2 + 2 * self.eta * np.real(np.conj(a) * b)

    def norm2(self) -> float:
        return float(np.sum(self.term_norms2()))

    def density_matrix(self, normalize: bool = True) -> np.ndarray:
        """Polarization density matrix after tracing out both photon arrival times.

        Basis order (HH, HV, VH, VV).
        """
        a = self.coeffs[:, 0]
        b = self.coeffs[:, 1]
        rho = (
            np.outer(a, a.conj())
            + np.outer(b, b.conj())
            + self.eta * (np.outer(a, b.conj()) + np.outer(b, a.conj()))
        )
        if normalize:
            tr = np.trace(rho).real
            if tr <= 0:
                raise DegenerateStateError("state has zero norm")
            rho = rho / tr
        return rho

    def inner(self, other: "PolTemporalTwoPhotonState") -> complex:
        """``<self|other>`` including the temporal overlap."""
        if abs(self.eta - other.eta) > 1e-15:
            raise ValidationError("states built on different waveform overlaps")
        a1, b1 = self.coeffs[:, 0].conj(), self.coeffs[:, 1].conj()
        a2, b2 = other.coeffs[:, 0], other.coeffs[:, 1]
        return complex(np.sum(a1 * a2 + b1 * b2 + self.eta * (a1 * b2 + b1 * a2)))

    def scaled(self, factor: complex) -> "PolTemporalTwoPhotonState":
        return PolTemporalTwoPhotonState(self.coeffs * factor, self.eta)

    def __add__(self, other: "PolTemporalTwoPhotonState") -> "PolTemporalTwoPhotonState":
        if abs(self.eta - other.eta) > 1e-15:
            raise ValidationError("cannot add states with different eta")
        return PolTemporalTwoPhotonState(self.coeffs + other.coeffs, self.eta)


def _check_eta(eta) -> float:
    eta = float(eta)
    if not (0.0 <= eta <= 1.0):
        raise ValidationError(f"eta={eta} outside [0, 1]")
    return eta


def build_input_state(pol_m, pol_s, eta: float) -> PolTemporalTwoPhotonState:
    """Product input: control photon (port m) times target photon (port s)."""
    eta = _check_eta(eta)
    jm, js = as_jones(pol_m), as_jones(pol_s)
    coeffs = np.zeros((4, 2), dtype=np.complex128)
    coeffs[:, 0] = np.kron(jm.array, js.array)
    return PolTemporalTwoPhotonState(coeffs, eta)


def _apply_local(state: PolTemporalTwoPhotonState, op: np.ndarray, port: str) -> PolTemporalTwoPhotonState:
    c = state.coeffs.reshape(2, 2, 2)  # (pol1, pol2, a/b)
    if port == "control":
        c = np.einsum("ij,jkx->ikx", op, c)
    elif port == "target":
        c = np.einsum("kj,ijx->ikx", op, c)
    else:
        raise ValidationError(f"port must be 'control' or 'target', got {port!r}")
    return PolTemporalTwoPhotonState(c.reshape(4, 2), state.eta)


def hadamard(state: PolTemporalTwoPhotonState, port: str = "target") -> PolTemporalTwoPhotonState:
    """Half-wave plate at 22.5 deg: ``H -> (H+V)/sqrt2``, ``V -> (H-V)/sqrt2``."""
    return _apply_local(state, _HADAMARD, port)


def ppbs_network(state: PolTemporalTwoPhotonState, config: GateConfig) -> PolTemporalTwoPhotonState:
    """Three-PPBS network post-selected on one photon in each of ports p and q.

    The result is unnormalized; its squared norm is the success probability.
    Mode map of the first PPBS (transmission real, reflection ``+i``)::

        m_P -> sqrt(T_P) f_P + i sqrt(R_P) g_P
        s_P -> sqrt(T_P) g_P + i sqrt(R_P) f_P

    then ``f_P -> gp[P] p_P`` and ``g_P -> gq[P] q_P`` through the balancing
    PPBSs. Both photons reflecting swaps their ports, which exchanges the time
    arguments and so moves weight between ``a`` and ``b``.
    """
    p1, p2, p3 = config.ppbs1, config.ppbs2, config.ppbs3
    trans = np.sqrt([p1.t_h, p1.t_v]).astype(np.complex128)
    refl = 1j * np.sqrt([p1.r_h, p1.r_v])
    gp = np.sqrt([p2.t_v, p2.t_h])  # perpendicular mounting
    gq = np.sqrt([p3.t_v, p3.t_h])

    cin = state.coeffs.reshape(2, 2, 2)
    out = np.zeros_like(cin)
    for P in range(2):
        for Q in range(2):
            a, b = cin[P, Q]
            # both transmitted: m -> f -> p, s -> g -> q
            direct = trans[P] * trans[Q] * gp[P] * gq[Q]
            out[P, Q, 0] += direct * a
            out[P, Q, 1] += direct * b
            # both reflected: m -> g -> q, s -> f -> p; pair relabelled (Q, P)
            swap = refl[P] * refl[Q] * gq[P] * gp[Q]
            out[Q, P, 0] += swap * b
            out[Q, P, 1] += swap * a
    return PolTemporalTwoPhotonState(out.reshape(4, 2), state.eta)


def postselect_normalize(state: PolTemporalTwoPhotonState) -> tuple[PolTemporalTwoPhotonState, float]:
    p = state.norm2()
    if p <= 1e-300:
        raise DegenerateStateError("post-selected state has zero norm")
    return state.scaled(1 / math.sqrt(p)), p


def run_cnot(pol_m, pol_s, eta: float, config: GateConfig | None = None):
    """Hadamard(target), PPBS network, Hadamard(target), then post-selection.

    Returns ``(normalized_state, success_probability)``.
    """
    config = config or GateConfig.ideal()
    state = build_input_state(pol_m, pol_s, eta)
    state = hadamard(state, "target")
    state = ppbs_network(state, config)
    state = hadamard(state, "target")
    return postselect_normalize(state)


def cnot_density_matrix(pol_m, pol_s, eta: float, config: GateConfig | None = None):
    """``(rho, success_probability)`` of the post-selected output polarization."""
    state, p = run_cnot(pol_m, pol_s, eta, config)
    return state.density_matrix(), p


# Control input D/A and target H/V produce the four Bell states.
BELL_INPUTS = {
    "PhiPlus": ("D", "H"),
    "PhiMinus": ("A", "H"),
    "PsiPlus": ("D", "V"),
    "PsiMinus": ("A", "V"),
}


def bell_decomposition(state: PolTemporalTwoPhotonState) -> dict[str, float]:
    """Weights of ``state`` on the four Bell polarization states.

    Each weight is the squared norm of the projection onto the Bell state times
    the full two-time space, i.e. ``<B|rho|B>`` of the time-traced state. For
    the gate's D (x) H output the time parts are exactly the symmetric and
    antisymmetric combinations of ``f``, so these are the weights on the
    normalized Bell-like states built from ``f_+`` and ``f_-``.
    """
    from .states import BellState, bell_vector

    rho = state.density_matrix()
    return {b.value: float(np.real(bell_vector(b).conj() @ rho @ bell_vector(b))) for b in BellState}


def bell_like_amplitudes(state: PolTemporalTwoPhotonState) -> dict[str, complex]:
    """Overlaps with the unit-norm states ``f_+(HH+VV)``, ``f_-(HH-VV)``,
    ``f_-(HV+VH)`` and ``f_-(HV-VH)``.

    A basis vector whose time part vanishes (``f_-`` at ``eta = 1``) gets
    amplitude zero.
    """
    # f_+- = (f +- f~)/2 in (a, b) coordinates
    f_plus = np.array([0.5, 0.5])
    f_minus = np.array([0.5, -0.5])
    targets = {
        "PhiPlus": ((0, 3), (1, 1), f_plus),
        "PhiMinus": ((0, 3), (1, -1), f_minus),
        "PsiPlus": ((1, 2), (1, 1), f_minus),
        "PsiMinus": ((1, 2), (1, -1), f_minus),
    }
    out = {}
    for name, (idx, signs, temporal) in targets.items():
        c = np.zeros((4, 2), dtype=np.complex128)
        for i, sign in zip(idx, signs):
            c[i] = sign * temporal
        basis = PolTemporalTwoPhotonState(c, state.eta)
        n2 = basis.norm2()
        out[name] = 0j if n2 < 1e-15 else basis.inner(state) / math.sqrt(n2)
    return out
