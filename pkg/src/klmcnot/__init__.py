"""Simulation of a post-selected linear-optical CNOT gate acting on photons
whose temporal wavefunctions only partially overlap.

Modules:
    waveform: temporal wavefunctions, overlap, integration windows, delays.
    gate: analytic polarization x time model of the PPBS gate.
    oracle: independent Fock-space simulation used for cross-checks.
    states: density matrices, Bell targets and fidelities.
    measurement: detection settings, shot noise, truth tables, HOM scans.
    tomography: maximum-likelihood state reconstruction.
    bell: CHSH optimization and Bell-violation thresholds.
    cli: command-line front end.
"""

from ._kernels import BACKEND
from .bell import bell_fidelity_threshold, chsh_optimize, chsh_score
from .errors import OracleMismatchError, ValidationError
from .gate import GateConfig, PPBS, cnot_density_matrix, run_cnot
from .measurement import CoincidenceDataset, NoiseConfig, hom_scan, simulate_counts, tomography_schedule, truth_table
from .oracle import simulate_eta, simulate_full
from .states import BellState, fidelity_general, fidelity_pure_target, fidelity_vs_eta, rho_bell, werner_fidelity
from .tomography import mle_fit, mle_reconstruct
from .waveform import TemporalWaveform, TimeGrid, WindowConfig, apply_window, overlap_eta

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BellState",
    "CoincidenceDataset",
    "GateConfig",
    "NoiseConfig",
    "OracleMismatchError",
    "PPBS",
    "TemporalWaveform",
    "TimeGrid",
    "ValidationError",
    "WindowConfig",
    "apply_window",
    "bell_fidelity_threshold",
    "chsh_optimize",
    "chsh_score",
    "cnot_density_matrix",
    "fidelity_general",
    "fidelity_pure_target",
    "fidelity_vs_eta",
    "hom_scan",
    "mle_fit",
    "mle_reconstruct",
    "overlap_eta",
    "rho_bell",
    "run_cnot",
    "simulate_counts",
    "simulate_eta",
    "simulate_full",
    "tomography_schedule",
    "truth_table",
    "werner_fidelity",
]
