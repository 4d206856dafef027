"""Simulated polarization analysis: detector projectors, coincidence counts,
truth tables, process-fidelity bounds and HOM delay scans.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import gate as _gate
from .errors import ValidationError
from .states import depolarize, validate_density_matrix
from .waveform import TemporalWaveform, WindowConfig, apply_window, delay, overlap_eta

_S = 1 / math.sqrt(2)
STATE_VECTORS = {
    "H": np.array([1, 0], dtype=np.complex128),
    "V": np.array([0, 1], dtype=np.complex128),
    "D": np.array([_S, _S], dtype=np.complex128),
    "A": np.array([_S, -_S], dtype=np.complex128),
    "R": np.array([_S, 1j * _S], dtype=np.complex128),
    "L": np.array([_S, -1j * _S], dtype=np.complex128),
}
ORTHOGONAL = {"H": "V", "V": "H", "D": "A", "A": "D", "R": "L", "L": "R"}
BASIS_ALIASES = {"HV": "H", "DA": "D", "RL": "R"}
DETECTOR_PAIRS = ("det_00", "det_01", "det_10", "det_11")


def _hwp(theta):
    c, s = math.cos(2 * theta), math.sin(2 * theta)
    return np.array([[c, s], [s, -c]], dtype=np.complex128)


def _qwp(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.exp(-1j * math.pi / 4) * np.array(
        [[c * c + 1j * s * s, (1 - 1j) * s * c], [(1 - 1j) * s * c, s * s + 1j * c * c]]
    )


@dataclass(frozen=True, eq=False)
class LocalBasis:
    """Two-detector polarization analyzer for one photon.

    ``det0`` is the state sent to detector 0 (PBS transmission) and ``det1``
    its orthogonal complement.
    """

    label: str
    det0: np.ndarray
    det1: np.ndarray

    @classmethod
    def named(cls, label: str) -> "LocalBasis":
        key = BASIS_ALIASES.get(label.upper(), label.upper())
        if key not in STATE_VECTORS:
            raise ValidationError(f"unknown analyzer setting {label!r}")
        return cls(key, STATE_VECTORS[key], STATE_VECTORS[ORTHOGONAL[key]])

    @classmethod
    def from_waveplates(cls, hwp_deg: float, qwp_deg: float) -> "LocalBasis":
        """Analyzer made of a QWP, then a HWP, then a PBS (H -> detector 0)."""
        J = _hwp(math.radians(hwp_deg)) @ _qwp(math.radians(qwp_deg))
        Jd = J.conj().T
        return cls(f"wp:{hwp_deg:g}:{qwp_deg:g}", Jd[:, 0].copy(), Jd[:, 1].copy())

    @classmethod
    def parse(cls, text: str) -> "LocalBasis":
        text = text.strip()
        if text.startswith("wp:"):
            _, h, q = text.split(":")
            return cls.from_waveplates(float(h), float(q))
        return cls.named(text)

    def vectors(self) -> tuple[np.ndarray, np.ndarray]:
        return self.det0, self.det1

    def __eq__(self, other):
        return isinstance(other, LocalBasis) and self.label == other.label

    def __hash__(self):
        return hash(self.label)


@dataclass(frozen=True)
class MeasurementSetting:
    control: LocalBasis
    target: LocalBasis

    @classmethod
    def named(cls, control: str, target: str) -> "MeasurementSetting":
        return cls(LocalBasis.named(control), LocalBasis.named(target))

    def outcome_vectors(self) -> np.ndarray:
        """Product states for det_00, det_01, det_10, det_11 (control index first)."""
        return np.array([np.kron(c, t) for c in self.control.vectors() for t in self.target.vectors()])


def tomography_schedule() -> list[MeasurementSetting]:
    """The 36 analyzer settings (6 x 6 states H, V, D, A, R, L); 144 outcomes."""
    labels = "HVDARL"
    return [MeasurementSetting.named(c, t) for c, t in itertools.product(labels, labels)]


def born_probabilities(rho, setting: MeasurementSetting) -> np.ndarray:
    r = validate_density_matrix(rho)
    vecs = setting.outcome_vectors()
    p = np.einsum("ki,ij,kj->k", vecs.conj(), r, vecs).real
    return np.clip(p, 0.0, None)


@dataclass(frozen=True)
class NoiseConfig:
    """Depolarizing admixture ``rho -> (1-eps) rho + eps I/4`` and count statistics."""

    epsilon: float = 0.0
    mode: str = "multinomial"

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValidationError(f"noise epsilon={self.epsilon} outside [0, 1]")
        if self.mode not in ("multinomial", "poisson"):
            raise ValidationError(f"noise mode must be 'multinomial' or 'poisson', got {self.mode!r}")


@dataclass
class CoincidenceDataset:
    settings: list[MeasurementSetting]
    counts: np.ndarray  # (n_settings, 4) integer
    shots: np.ndarray  # (n_settings,) integer
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.counts = np.asarray(self.counts)
        self.shots = np.asarray(self.shots, dtype=np.int64)
        if self.counts.shape != (len(self.settings), 4):
            raise ValidationError(f"counts shape {self.counts.shape} does not match {len(self.settings)} settings")
        if np.any(self.counts < 0):
            raise ValidationError("counts must be nonnegative")

    def __len__(self):
        return len(self.settings)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            header = {"seed": self.seed, **self.meta}
            fh.write("# " + " ".join(f"{k}={v}" for k, v in header.items()) + "\n")
            w = csv.writer(fh)
            w.writerow(["setting_control", "setting_target", *DETECTOR_PAIRS, "shots"])
            for s, c, n in zip(self.settings, self.counts, self.shots):
                w.writerow([s.control.label, s.target.label, *[int(x) for x in c], int(n)])

    @classmethod
    def from_csv(cls, path) -> "CoincidenceDataset":
        seed = None
        meta = {}
        with open(path, newline="") as fh:
            lines = fh.read().splitlines()
        body = []
        for line in lines:
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        meta[k] = v
            elif line.strip():
                body.append(line)
        rows = list(csv.DictReader(body))
        if not rows:
            raise ValidationError(f"{path}: no data rows")
        settings = [MeasurementSetting(LocalBasis.parse(r["setting_control"]), LocalBasis.parse(r["setting_target"]))
                    for r in rows]
        counts = np.array([[int(r[k]) for k in DETECTOR_PAIRS] for r in rows])
        shots = np.array([int(r["shots"]) for r in rows])
        if meta.get("seed") not in (None, "None"):
            seed = int(meta.pop("seed"))
        else:
            meta.pop("seed", None)
        return cls(settings, counts, shots, seed, meta)


def simulate_counts(
    rho,
    schedule: Sequence[MeasurementSetting],
    shots_per_setting: int,
    seed: int | None = None,
    noise: NoiseConfig | None = None,
) -> CoincidenceDataset:
    """Draw coincidence counts for every setting.

    Each setting gets its own generator spawned from ``seed``, so results do
    not depend on evaluation order.
    """
    if not schedule:
        raise ValidationError("empty measurement schedule")
    if int(shots_per_setting) < 1:
        raise ValidationError("shots_per_setting must be >= 1")
    noise = noise or NoiseConfig()
    r = validate_density_matrix(rho)
    if noise.epsilon:
        r = depolarize(r, noise.epsilon)
    streams = np.random.SeedSequence(seed).spawn(len(schedule))
    counts = np.zeros((len(schedule), 4), dtype=np.int64)
    for k, (setting, ss) in enumerate(zip(schedule, streams)):
        rng = np.random.default_rng(ss)
        p = born_probabilities(r, setting)
        p = p / p.sum()
        if noise.mode == "multinomial":
            counts[k] = rng.multinomial(int(shots_per_setting), p)
        else:
            counts[k] = rng.poisson(int(shots_per_setting) * p)
    shots = np.full(len(schedule), int(shots_per_setting))
    return CoincidenceDataset(list(schedule), counts, shots, seed)


def expected_counts(rho, schedule: Sequence[MeasurementSetting], shots_per_setting: float) -> CoincidenceDataset:
    """Noise-free surrogate: counts equal to their expectation (floats)."""
    r = validate_density_matrix(rho)
    counts = np.array([shots_per_setting * born_probabilities(r, s) for s in schedule])
    return CoincidenceDataset(list(schedule), counts, np.full(len(schedule), int(shots_per_setting)))


# ---------------------------------------------------------------------------
# Truth tables
# ---------------------------------------------------------------------------

GateRunner = Callable[..., tuple]


def analytic_runner(pol_m, pol_s, eta, config):
    return _gate.cnot_density_matrix(pol_m, pol_s, eta, config)


def oracle_runner(pol_m, pol_s, eta, config):
    from .oracle import simulate_eta

    return simulate_eta(pol_m, pol_s, eta, config)


@dataclass(frozen=True)
class TruthTableConvention:
    inputs: tuple[str, ...]  # two-letter labels, control first
    analyzer: tuple[str, str]  # named analyzer per photon
    outputs: tuple[str, ...]  # column labels in det_00..det_11 order
    correct: tuple[tuple[int, ...], ...]  # correct columns per row


# YY rows feed D/A (x) H/V so the gate outputs Bell states; each is checked
# through its Y (x) Y parity measured in R/L (x) R/L: -1 for Phi+ and Psi-,
# +1 for Phi- and Psi+.
CONVENTIONS = {
    "ZZ": TruthTableConvention(
        ("HH", "HV", "VH", "VV"), ("H", "H"), ("HH", "HV", "VH", "VV"), ((0,), (1,), (3,), (2,))
    ),
    "XX": TruthTableConvention(
        ("DD", "DA", "AD", "AA"), ("D", "D"), ("DD", "DA", "AD", "AA"), ((0,), (3,), (2,), (1,))
    ),
    "YY": TruthTableConvention(
        ("DH", "DV", "AH", "AV"), ("R", "R"), ("RR", "RL", "LR", "LL"), ((1, 2), (0, 3), (0, 3), (1, 2))
    ),
}


@dataclass(frozen=True, eq=False)
class TruthTable:
    basis: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    probabilities: np.ndarray
    correct: tuple[tuple[int, ...], ...]

    @property
    def fidelity(self) -> float:
        return float(np.mean([self.probabilities[i, list(cols)].sum() for i, cols in enumerate(self.correct)]))


def truth_table(
    input_basis: str = "ZZ",
    eta: float = 1.0,
    config: _gate.GateConfig | None = None,
    run: GateRunner = analytic_runner,
    noise: NoiseConfig | None = None,
) -> tuple[TruthTable, float]:
    """Gate truth table for the ZZ, XX or YY convention; returns ``(table, fidelity)``.

    Rows are conditional probabilities of the four detector pairs given each
    input, i.e. coincidences normalized to their row total.
    """
    key = input_basis.upper()
    if key not in CONVENTIONS:
        raise ValidationError(f"unknown truth-table basis {input_basis!r}; use ZZ, XX or YY")
    conv = CONVENTIONS[key]
    config = config or _gate.GateConfig.ideal()
    setting = MeasurementSetting.named(*conv.analyzer)
    rows = []
    for label in conv.inputs:
        rho, _ = run(label[0], label[1], eta, config)
        if noise is not None and noise.epsilon:
            rho = depolarize(rho, noise.epsilon)
        p = born_probabilities(rho, setting)
        rows.append(p / p.sum())
    table = TruthTable(key, conv.inputs, conv.outputs, np.array(rows), conv.correct)
    return table, table.fidelity


def process_bounds(f_zz: float, f_xx: float) -> tuple[float, float]:
    """``max(F_ZZ + F_XX - 1, 0) <= F_process <= min(F_ZZ, F_XX)``."""
    for name, f in (("f_zz", f_zz), ("f_xx", f_xx)):
        if not 0.0 <= f <= 1.0:
            raise ValidationError(f"{name}={f} outside [0, 1]")
    return max(f_zz + f_xx - 1.0, 0.0), min(f_zz, f_xx)


# ---------------------------------------------------------------------------
# HOM scan
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HomPoint:
    delay: float
    coincidence: float
    eta: float


def hom_scan(
    u1: TemporalWaveform,
    u2: TemporalWaveform,
    delays: Sequence[float],
    window: WindowConfig | None = None,
) -> list[HomPoint]:
    """Coincidence probability at a balanced beam splitter versus delay of ``u2``.

    The detection window follows each photon's own expected arrival, so the
    delayed photon is windowed with the window shifted by the same delay.
    Coincidence probability is ``(1 - eta) / 2``.
    """
    ref = u1 if window is None else apply_window(u1, window)[0]
    out = []
    for d in delays:
        moved = delay(u2, float(d))
        if window is not None:
            moved, _ = apply_window(moved, window.shifted(float(d)))
        eta = overlap_eta(ref, moved)
        out.append(HomPoint(float(d), 0.5 * (1.0 - eta), eta))
    return out


def hom_visibility(points: Sequence[HomPoint], baseline: float = 0.5) -> float:
    """Dip visibility ``1 - C_min / baseline``."""
    cmin = min(p.coincidence for p in points)
    return 1.0 - cmin / baseline
