import itertools
import math

import numpy as np
import pytest

from klmcnot import gate, oracle, states
from klmcnot import waveform as W
from klmcnot.errors import ValidationError

IMPERFECT = gate.GateConfig.from_mapping(
    {"ppbs1": {"tH": 0.97, "tV": 0.31}, "ppbs2": {"tH": 0.99, "tV": 0.35}, "ppbs3": {"tH": 0.96, "tV": 0.32}}
)


def test_mode_indices_distinct():
    idx = {
        oracle.mode_index(r, p, t)
        for r in range(oracle.N_RAILS)
        for p in range(oracle.N_POL)
        for t in range(oracle.N_TEMP)
    }
    assert idx == set(range(oracle.DIM))


@pytest.mark.parametrize("config", [gate.GateConfig.ideal(), IMPERFECT, gate.GateConfig.transparent()])
def test_network_unitaries(config):
    for name, U in oracle.network_unitaries(config):
        assert np.allclose(U.conj().T @ U, np.eye(oracle.DIM), atol=1e-12), name


@pytest.mark.parametrize("config", [gate.GateConfig.ideal(), IMPERFECT])
@pytest.mark.parametrize("eta", [0.0, 0.25, 0.5, 0.75, 1.0])
def test_matches_analytic_gate(config, eta):
    for m, s in itertools.product("HVDARL", repeat=2):
        r_an, p_an = gate.cnot_density_matrix(m, s, eta, config)
        r_or, p_or = oracle.simulate_eta(m, s, eta, config)
        assert np.max(np.abs(r_an - r_or)) < 1e-10, (m, s)
        assert p_an == pytest.approx(p_or, abs=1e-10)


def test_unit_overlap_bell_state():
    rho, p = oracle.simulate_eta("D", "H", 1.0)
    assert np.allclose(rho, states.bell_projector("PhiPlus"), atol=1e-12)
    assert p == pytest.approx(1 / 9, abs=1e-12)


def test_transparent_vv():
    rho, p = oracle.simulate_eta("V", "V", 0.0, gate.GateConfig.transparent())
    assert rho[3, 3].real == pytest.approx(1.0) and p == pytest.approx(1.0)


def test_half_overlap_matches_gram_matrix():
    # Rebuild the output from its three time components f, f~ and f - f~
    # with <f|f~> = eta; independent of both simulators.
    eta = 0.5
    c = 1 / math.sqrt(4 - 2 * eta)
    gram = np.array([[1, eta], [eta, 1]])
    coeffs = np.array([[c, 0], [0, 0], [c, -c], [0, c]])
    rho = coeffs @ gram @ coeffs.conj().T
    r_or, _ = oracle.simulate_eta("D", "H", eta)
    assert np.allclose(r_or, rho, atol=1e-12)
    assert np.trace(rho) == pytest.approx(1.0)


def test_gram_schmidt(grid):
    u = W.gaussian_waveform(grid, 0.0, 0.4e-9)
    same = oracle.gram_schmidt_temporal(u, u)
    assert same.single_mode and same.c1 == pytest.approx(1.0)
    far = oracle.gram_schmidt_temporal(u, W.gaussian_waveform(grid, 15e-9, 0.4e-9))
    assert abs(far.c1) == pytest.approx(0.0, abs=1e-12) and far.c2 == pytest.approx(1.0)
    v = W.gaussian_waveform(grid, 0.8e-9, 0.4e-9)
    pair = oracle.gram_schmidt_temporal(u, v)
    assert pair.eta == pytest.approx(math.exp(-1), abs=1e-10)
    assert abs(W.inner_product(pair.v1, pair.v2)) < 1e-10
    assert abs(pair.c1) ** 2 + pair.c2**2 == pytest.approx(1.0, abs=1e-12)


def test_simulate_full_on_presets(presets):
    mem, src = presets
    eta = W.overlap_eta(mem, src)
    for m, s in (("D", "H"), ("A", "V"), ("V", "D")):
        r_full, p_full = oracle.simulate_full(m, s, mem, src)
        r_an, p_an = gate.cnot_density_matrix(m, s, eta)
        assert np.allclose(r_full, r_an, atol=1e-10) and p_full == pytest.approx(p_an, abs=1e-10)


def test_invalid_coefficients():
    with pytest.raises(ValidationError):
        oracle.simulate_overlap("H", "H", 0.5, 0.5)
