import numpy as np
import pytest

from klmcnot import gate, measurement as M, states, tomography
from klmcnot.errors import IncompleteScheduleError, ValidationError

SCHEDULE = M.tomography_schedule()


def test_exact_counts_reconstruct_to_1e6():
    rho = states.rho_bell("PhiPlus", 0.7)
    fit = tomography.mle_fit(M.expected_counts(rho, SCHEDULE, 10**6))
    assert fit.converged
    assert states.trace_distance(fit.rho, rho) < 1e-6


def test_likelihood_monotone():
    rho, _ = gate.cnot_density_matrix("A", "V", 0.6)
    fit = tomography.mle_fit(M.simulate_counts(rho, SCHEDULE, 10**4, seed=4))
    assert len(fit.history) > 2
    assert np.all(np.diff(fit.history) >= -1e-9 * abs(fit.history[0]))


def test_output_is_valid_state():
    rho = states.depolarize(states.rho_bell("PsiPlus", 0.3), 0.2)
    est = tomography.mle_reconstruct(M.simulate_counts(rho, SCHEDULE, 1000, seed=1))
    states.validate_density_matrix(est)


def test_product_state():
    hh = np.zeros((4, 4), dtype=complex)
    hh[0, 0] = 1
    est = tomography.mle_reconstruct(M.simulate_counts(hh, SCHEDULE, 10**6, seed=2))
    assert est[0, 0].real >= 0.999


def test_maximally_mixed():
    est = tomography.mle_reconstruct(M.simulate_counts(np.eye(4) / 4, SCHEDULE, 10**6, seed=3))
    assert states.trace_distance(est, np.eye(4) / 4) < 0.01


def test_incomplete_schedule():
    sched = [M.MeasurementSetting.named(c, t) for c in "HV" for t in "HV"]
    data = M.simulate_counts(np.eye(4) / 4, sched, 100, seed=1)
    with pytest.raises(IncompleteScheduleError):
        tomography.mle_fit(data)


def test_zero_counts():
    data = M.CoincidenceDataset(SCHEDULE, np.zeros((36, 4), dtype=int), np.zeros(36, dtype=int))
    with pytest.raises(ValidationError):
        tomography.mle_fit(data)


def test_linear_inversion_exact():
    rho = states.rho_bell("PhiMinus", 0.4)
    vecs = np.concatenate([s.outcome_vectors() for s in SCHEDULE])
    freqs = np.concatenate([M.born_probabilities(rho, s) for s in SCHEDULE])
    assert np.allclose(tomography.linear_inversion(vecs, freqs), rho, atol=1e-10)


@pytest.mark.parametrize("eta", [0.5, 0.8, 1.0])
def test_end_to_end_fidelity(eta):
    rho, _ = gate.cnot_density_matrix("D", "H", eta)
    est = tomography.mle_reconstruct(M.simulate_counts(rho, SCHEDULE, 10**6, seed=int(eta * 100)))
    assert states.fidelity_pure_target(est, "PhiPlus") == pytest.approx(states.fidelity_vs_eta(eta), abs=0.01)


@pytest.mark.slow
def test_consistency_with_shots():
    rho = states.rho_bell("PhiPlus", 0.8)
    medians = []
    for shots in (10**4, 10**5, 10**6):
        d = [
            states.trace_distance(tomography.mle_reconstruct(M.simulate_counts(rho, SCHEDULE, shots, seed=s)), rho)
            for s in range(20)
        ]
        medians.append(np.median(d))
    assert medians[0] > medians[1] > medians[2]
    # statistical error shrinks roughly as 1/sqrt(shots)
    assert medians[2] < 0.01
