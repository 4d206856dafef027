import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from klmcnot import waveform as W
from klmcnot.errors import EmptyWindowError, GridMismatchError, OutOfRangeError, ResolutionError, ValidationError

NS = 1e-9
SIGMA = 0.4 * NS

# Values below were frozen after checking them against independent computations
# (closed-form CDF of the pulse shape, or a delay scan).
SOURCE_ACCEPTANCE_1NS = 0.6458086610672942
ALIGNED_PRESET_ETA = 0.9009105092017088
ALIGNED_PRESET_DELAY = 5.160348071280295e-10


def gauss(grid, t0=0.0, sigma=SIGMA):
    return W.gaussian_waveform(grid, t0, sigma)


def test_grid_invariants():
    with pytest.raises(ValidationError):
        W.TimeGrid(0.0, 0.0, 10)
    with pytest.raises(ValidationError):
        W.TimeGrid(0.0, 1e-12, 1)
    g = W.TimeGrid.centered(span=2 * NS, dt=0.5 * NS)
    assert g.n_samples == 5
    assert g.times[0] == pytest.approx(-NS) and g.t_end == pytest.approx(NS)


def test_waveform_is_immutable(grid):
    u = gauss(grid)
    with pytest.raises(ValueError):
        u.samples[0] = 1.0


def test_unnormalized_waveform_rejected(grid):
    u = W.TemporalWaveform(grid, 2 * gauss(grid).samples)
    with pytest.raises(ValidationError):
        W.overlap_eta(u, gauss(grid))


def test_overlap_identical_and_disjoint(grid):
    u = gauss(grid)
    assert W.overlap_eta(u, u) == pytest.approx(1.0, abs=1e-12)
    far = gauss(grid, t0=15 * NS)
    assert W.overlap_eta(u, far) == pytest.approx(0.0, abs=1e-12)


def test_gaussian_overlap_closed_form(grid):
    # |<u(t)|u(t - d)>|^2 = exp(-d^2 / (4 sigma^2)); d = 2 sigma gives 1/e
    eta = W.overlap_eta(gauss(grid), gauss(grid, t0=2 * SIGMA))
    assert eta == pytest.approx(math.exp(-1), abs=1e-10)


def test_mismatched_grids(grid):
    other = W.TimeGrid.centered(dt=20e-12)
    with pytest.raises(GridMismatchError):
        W.overlap_eta(gauss(grid), gauss(other))


@settings(max_examples=30, deadline=None)
@given(phase=st.floats(0, 2 * math.pi), shift=st.floats(-3 * NS, 3 * NS))
def test_overlap_properties(phase, shift):
    grid = W.TimeGrid.centered(span=20 * NS, dt=20e-12)
    u = gauss(grid)
    v = W.delay(gauss(grid, sigma=0.6 * NS), shift)
    # global phase leaves eta at exactly one
    rotated = W.TemporalWaveform(grid, np.exp(1j * phase) * u.samples)
    assert W.overlap_eta(u, rotated) == pytest.approx(1.0, abs=1e-12)
    assert W.overlap_eta(u, v) == W.overlap_eta(v, u)
    assert 0.0 <= W.overlap_eta(u, v) <= 1.0
    # a common delay leaves the overlap unchanged
    common = W.overlap_eta(W.delay(u, 1 * NS), W.delay(v, 1 * NS))
    assert common == pytest.approx(W.overlap_eta(u, v), abs=1e-10)


def test_window_full_support_is_identity(grid):
    u = gauss(grid)
    out, acc = W.apply_window(u, W.WindowConfig(grid.t_start, grid.t_end - grid.t_start))
    assert acc == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(out.samples, u.samples, atol=1e-12)


def test_window_half_mass_of_symmetric_pulse(grid):
    out, acc = W.apply_window(gauss(grid), W.WindowConfig(0.0, 15 * NS))
    assert acc == pytest.approx(0.5, abs=1e-3)  # trapezoid counts the peak sample fully
    assert out.norm() == pytest.approx(1.0, abs=1e-12)
    assert np.all(out.samples[out.times < 0] == 0)


def test_window_disjoint_raises(grid):
    with pytest.raises(EmptyWindowError):
        W.apply_window(gauss(grid), W.WindowConfig(15 * NS, 1 * NS))
    with pytest.raises(ValidationError):
        W.WindowConfig(0.0, 0.0)


def test_source_acceptance_frozen(grid):
    src = W.preset_source_waveform(grid)
    _, acc = W.apply_window(src, W.WindowConfig(W.DEFAULT_WINDOW_OFFSET, 1 * NS))
    assert acc == pytest.approx(SOURCE_ACCEPTANCE_1NS, abs=1e-12)
    # independent check: the intensity is an exponnorm density, so the
    # accepted mass is a CDF difference
    sigma, mode = W._emg_shape(W.SOURCE_FWHM, W.SOURCE_SKEW)
    d = stats.exponnorm(W.SOURCE_SKEW / sigma, scale=sigma)
    a = W.DEFAULT_WINDOW_OFFSET + mode
    exact = d.cdf(a + 1 * NS) - d.cdf(a)
    assert acc == pytest.approx(exact, abs=5e-5)
    # the residual is the trapezoid edge error, which falls as dt^2
    fine = W.preset_source_waveform(W.TimeGrid.centered(dt=5e-12))
    acc_fine = W.apply_window(fine, W.WindowConfig(W.DEFAULT_WINDOW_OFFSET, 1 * NS))[1]
    assert (acc - exact) / (acc_fine - exact) == pytest.approx(4.0, rel=0.01)


def test_delay_zero_and_inverse(grid):
    u = gauss(grid)
    assert W.delay(u, 0.0) is u
    back = W.delay(W.delay(u, 1.234 * NS), -1.234 * NS)
    diff = W.TemporalWaveform(grid, back.samples - u.samples)
    assert diff.norm() < 1e-12


def test_delay_closed_form(grid):
    d = 0.7 * NS
    eta = W.overlap_eta(gauss(grid), W.delay(gauss(grid), d))
    assert eta == pytest.approx(math.exp(-(d**2) / (4 * SIGMA**2)), abs=1e-10)


def test_delay_off_grid(grid):
    with pytest.raises(OutOfRangeError):
        W.delay(gauss(grid), 19 * NS)


def test_preset_fwhm(grid):
    assert W.preset_source_waveform(grid).fwhm() == pytest.approx(0.9 * NS, rel=0.02)
    assert W.preset_memory_waveform(grid).fwhm() == pytest.approx(1.5 * NS, rel=0.02)


def test_preset_shapes(grid):
    src = W.preset_source_waveform(grid)
    mem = W.preset_memory_waveform(grid)
    for u in (src, mem):
        assert u.norm() == pytest.approx(1.0, abs=1e-9)
    # the source tail is longer than its rise; the memory is closer to symmetric
    def skewness(u):
        p = u.intensity * grid.dt
        m = np.sum(p * u.times)
        return np.sum(p * (u.times - m) ** 3) / np.sum(p * (u.times - m) ** 2) ** 1.5
    assert skewness(src) > skewness(mem) > 0


def test_preset_resolution_errors():
    with pytest.raises(ResolutionError):
        W.preset_source_waveform(W.TimeGrid.centered(dt=60e-12))
    with pytest.raises(ValidationError):
        W.preset_memory_waveform(W.TimeGrid.centered(span=10 * NS))


def test_best_delay_frozen(grid):
    src = W.preset_source_waveform(grid)
    mem = W.preset_memory_waveform(grid)
    d, eta = W.best_delay(src, mem)
    assert d == pytest.approx(ALIGNED_PRESET_DELAY, abs=1e-13)
    assert eta == pytest.approx(ALIGNED_PRESET_ETA, abs=1e-12)
    # a dense scan never beats the refined optimum
    scan = [W.overlap_eta(src, W.delay(mem, x)) for x in np.arange(0.3, 0.7, 0.005) * NS]
    assert max(scan) <= eta + 1e-12
    assert W.overlap_eta(src, mem) < eta


def test_nested_windows_monotone(presets):
    mem, src = presets
    etas = [W.windowed_eta(mem, src, W.WindowConfig(W.DEFAULT_WINDOW_OFFSET, t * NS))[0] for t in (0.5, 1, 2, 4)]
    assert all(a >= b for a, b in zip(etas, etas[1:]))


def test_wide_window_recovers_unwindowed_overlap(presets):
    mem, src = presets
    eta, acc_m, acc_s = W.windowed_eta(mem, src, W.WindowConfig(-15 * NS, 35 * NS))
    assert eta == pytest.approx(W.overlap_eta(mem, src), abs=1e-12)
    assert acc_m == pytest.approx(1.0, abs=1e-9) and acc_s == pytest.approx(1.0, abs=1e-9)


def test_quadrature_convergence():
    coarse = W.TimeGrid.centered(dt=10e-12)
    fine = W.TimeGrid.centered(dt=5e-12)

    def eta(g):
        return W.overlap_eta(W.preset_source_waveform(g), W.preset_memory_waveform(g))

    assert abs(eta(coarse) - eta(fine)) < 1e-6


def test_csv_roundtrip(tmp_path, grid):
    u = W.TemporalWaveform(grid, gauss(grid).samples * np.exp(0.3j))
    path = tmp_path / "u.csv"
    u.to_csv(path)
    assert path.read_text().splitlines()[0] == "time_s,re,im"
    v = W.TemporalWaveform.from_csv(path)
    assert v.grid.matches(grid)
    assert np.max(np.abs(v.samples - u.samples)) < 1e-15
    assert W.load_waveform(path).grid.matches(grid)
