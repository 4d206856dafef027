"""Temporal single-photon wavepackets on a uniform time grid.

Amplitudes are complex samples ``u(t_k)``; the photon detection profile is
``|u(t)|^2``. All integrals use the trapezoid rule on the grid.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import optimize, stats

from .errors import (
    EmptyWindowError,
    GridMismatchError,
    OutOfRangeError,
    ResolutionError,
    ValidationError,
)

NS = 1e-9

# Preset shapes. Only the FWHM values are fixed; the exponential skew of each
# exponentially modified Gaussian is a free choice.
SOURCE_FWHM = 0.9 * NS
MEMORY_FWHM = 1.5 * NS
SOURCE_SKEW = 0.8 * NS
MEMORY_SKEW = 0.3 * NS

DEFAULT_DT = 10e-12
DEFAULT_SPAN = 40 * NS
MAX_PRESET_DT = 50e-12
PRESET_HALF_SPAN = 10 * NS

# Window start relative to the target photon peak; excludes most of the rise.
DEFAULT_WINDOW_OFFSET = -0.3 * NS

NORM_TOL = 1e-6


@dataclass(frozen=True)
class TimeGrid:
    t_start: float
    dt: float
    n_samples: int

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValidationError(f"dt must be positive and finite, got {self.dt}")
        if int(self.n_samples) != self.n_samples or self.n_samples < 2:
            raise ValidationError(f"n_samples must be an integer >= 2, got {self.n_samples}")
        if not math.isfinite(self.t_start + (self.n_samples - 1) * self.dt):
            raise ValidationError("grid span is not finite")

    @classmethod
    def centered(cls, span: float = DEFAULT_SPAN, dt: float = DEFAULT_DT) -> "TimeGrid":
        """Grid covering ``[-span/2, span/2]`` with spacing ``dt``."""
        n = int(round(span / dt)) + 1
        return cls(-0.5 * (n - 1) * dt, dt, n)

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_samples)

    @property
    def t_end(self) -> float:
        return self.t_start + (self.n_samples - 1) * self.dt

    def matches(self, other: "TimeGrid") -> bool:
        return (
            self.n_samples == other.n_samples
            and math.isclose(self.dt, other.dt, rel_tol=1e-9)
            and abs(self.t_start - other.t_start) <= 1e-6 * self.dt
        )


@dataclass(frozen=True, eq=False)
class TemporalWaveform:
    """Complex amplitude sampled on ``grid``. Samples are stored read-only."""

    grid: TimeGrid
    samples: np.ndarray

    def __post_init__(self):
        s = np.array(self.samples, dtype=np.complex128)
        if s.shape != (self.grid.n_samples,):
            raise ValidationError(f"expected {self.grid.n_samples} samples, got shape {s.shape}")
        if not np.all(np.isfinite(s)):
            raise ValidationError("samples must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @classmethod
    def normalized(cls, grid: TimeGrid, samples) -> "TemporalWaveform":
        s = np.asarray(samples, dtype=np.complex128)
        n = math.sqrt(_trapz(np.abs(s) ** 2, grid.dt))
        if n == 0:
            raise ValidationError("cannot normalize an all-zero waveform")
        return cls(grid, s / n)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.samples) ** 2

    def norm(self) -> float:
        """L2 norm, ``sqrt(int |u|^2 dt)``."""
        return math.sqrt(_trapz(self.intensity, self.grid.dt))

    def check_normalized(self, tol: float = NORM_TOL) -> None:
        n = self.norm()
        if abs(n - 1.0) > tol:
            raise ValidationError(f"waveform not normalized: norm = {n:.9g}")

    def fwhm(self) -> float:
        return fwhm(self)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_s", "re", "im"])
            for t, z in zip(self.times, self.samples):
                w.writerow([repr(float(t)), repr(float(z.real)), repr(float(z.imag))])

    @classmethod
    def from_csv(cls, path) -> "TemporalWaveform":
        """Read a ``time_s,re,im`` CSV. The time column must be uniformly spaced."""
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
        if not rows or [c.strip() for c in rows[0]] != ["time_s", "re", "im"]:
            raise ValidationError(f"{path}: header row 'time_s,re,im' required")
        data = np.array([[float(x) for x in r] for r in rows[1:]])
        if data.ndim != 2 or data.shape[0] < 2:
            raise ValidationError(f"{path}: need at least two samples")
        t = data[:, 0]
        steps = np.diff(t)
        dt = float(np.mean(steps))
        if dt <= 0 or np.max(np.abs(steps - dt)) > 1e-6 * dt:
            raise ValidationError(f"{path}: time column is not a uniform increasing grid")
        grid = TimeGrid(float(t[0]), dt, len(t))
        return cls(grid, data[:, 1] + 1j * data[:, 2])


@dataclass(frozen=True)
class WindowConfig:
    """Detection window ``[offset, offset + tau_int]`` in grid time (seconds)."""

    offset: float
    tau_int: float

    def __post_init__(self):
        if not self.tau_int > 0:
            raise ValidationError(f"tau_int must be positive, got {self.tau_int}")

    def shifted(self, dt_shift: float) -> "WindowConfig":
        return WindowConfig(self.offset + dt_shift, self.tau_int)


def _trapz(y: np.ndarray, dx: float):
    return np.trapezoid(y, dx=dx)


def _require_same_grid(a: TemporalWaveform, b: TemporalWaveform) -> None:
    if not a.grid.matches(b.grid):
        raise GridMismatchError(f"waveforms live on different grids: {a.grid} vs {b.grid}")


def inner_product(u: TemporalWaveform, v: TemporalWaveform) -> complex:
    """``int u*(t) v(t) dt``."""
    _require_same_grid(u, v)
    return complex(_trapz(np.conj(u.samples) * v.samples, u.grid.dt))


def overlap_eta(u_m: TemporalWaveform, u_s: TemporalWaveform) -> float:
    """Indistinguishability ``|int u_m*(t) u_s(t) dt|^2`` of two normalized photons."""
    _require_same_grid(u_m, u_s)
    u_m.check_normalized()
    u_s.check_normalized()
    eta = abs(inner_product(u_m, u_s)) ** 2
    # Cauchy-Schwarz holds up to quadrature rounding of the two norms.
    return float(min(max(eta, 0.0), 1.0))


def apply_window(u: TemporalWaveform, w: WindowConfig) -> tuple[TemporalWaveform, float]:
    """Truncate ``u`` to the window and renormalize.

    Returns the truncated waveform and the acceptance, i.e. the fraction of the
    photon's probability mass that fell inside the window before truncation.
    """
    t = u.times
    eps = 1e-9 * u.grid.dt
    inside = (t >= w.offset - eps) & (t <= w.offset + w.tau_int + eps)
    total = _trapz(u.intensity, u.grid.dt)
    if total <= 0:
        raise ValidationError("waveform has zero norm")
    idx = np.flatnonzero(inside)
    if idx.size == 0:
        raise EmptyWindowError(f"window {w} does not overlap the grid")
    if idx.size == 1:
        accepted = 0.0
    else:
        accepted = _trapz(u.intensity[idx[0] : idx[-1] + 1], u.grid.dt)
    acceptance = float(accepted / total)
    if acceptance < 1e-12:
        raise EmptyWindowError(f"window {w} contains no photon mass (acceptance={acceptance:.3g})")
    truncated = np.where(inside, u.samples, 0.0)
    return TemporalWaveform.normalized(u.grid, truncated), min(acceptance, 1.0)


def delay(u: TemporalWaveform, dt_shift: float) -> TemporalWaveform:
    """Shift ``u(t) -> u(t - dt_shift)`` by a spectral phase ramp.

    The FFT shift is exactly invertible and norm preserving for any real shift.
    Mass that would wrap around the grid edge raises :class:`OutOfRangeError`.
    """
    if dt_shift == 0:
        return u
    g = u.grid
    t = g.times
    total = _trapz(u.intensity, g.dt)
    if dt_shift > 0:
        leaving = t >= g.t_end - dt_shift
    else:
        leaving = t <= g.t_start - dt_shift
    lost = float(np.sum(u.intensity[leaving]) * g.dt / total) if total > 0 else 0.0
    if abs(dt_shift) >= g.t_end - g.t_start or lost > 1e-9:
        raise OutOfRangeError(f"shift {dt_shift:g} s pushes {lost:.3g} of the mass off the grid")
    omega = 2 * np.pi * np.fft.fftfreq(g.n_samples, d=g.dt)
    shifted = np.fft.ifft(np.fft.fft(u.samples) * np.exp(-1j * omega * dt_shift))
    return TemporalWaveform(g, shifted)


def fwhm(u: TemporalWaveform) -> float:
    """Full width at half maximum of ``|u|^2`` using linear interpolation at crossings."""
    y = u.intensity
    t = u.times
    k = int(np.argmax(y))
    half = 0.5 * y[k]
    left = k
    while left > 0 and y[left] > half:
        left -= 1
    right = k
    while right < len(y) - 1 and y[right] > half:
        right += 1
    if y[left] > half or y[right] > half:
        raise ValidationError("pulse does not fall to half maximum inside the grid")

    def cross(i0, i1):
        return t[i0] + (half - y[i0]) * (t[i1] - t[i0]) / (y[i1] - y[i0])

    return float(cross(right - 1, right) - cross(left, left + 1))


def gaussian_waveform(grid: TimeGrid, t0: float, sigma: float) -> TemporalWaveform:
    """Unit-norm Gaussian amplitude ``exp(-(t-t0)^2 / (4 sigma^2))`` (intensity std ``sigma``)."""
    t = grid.times
    return TemporalWaveform.normalized(grid, np.exp(-((t - t0) ** 2) / (4 * sigma**2)))


@lru_cache(maxsize=32)
def _emg_shape(fwhm_target: float, skew: float) -> tuple[float, float]:
    """Gaussian width and mode offset of an EMG intensity with the given FWHM.

    Works in units of ``fwhm_target`` so the root finders see O(1) numbers.
    """
    tau = skew / fwhm_target

    def width_and_mode(sigma):
        if tau <= 1e-9:
            return 2 * math.sqrt(2 * math.log(2)) * sigma, 0.0
        d = stats.exponnorm(tau / sigma, scale=sigma)
        mode = optimize.minimize_scalar(
            lambda x: -d.pdf(x), bounds=(-3 * sigma, 3 * sigma + 3 * tau), method="bounded",
            options={"xatol": 1e-13},
        ).x
        half = 0.5 * d.pdf(mode)
        lo = optimize.brentq(lambda x: d.pdf(x) - half, mode - 10 * sigma, mode, xtol=1e-14)
        hi = optimize.brentq(lambda x: d.pdf(x) - half, mode, mode + 10 * (sigma + tau), xtol=1e-14)
        return hi - lo, mode

    sigma = optimize.brentq(lambda s: width_and_mode(s)[0] - 1.0, 1e-4, 1.0, xtol=1e-14)
    return sigma * fwhm_target, width_and_mode(sigma)[1] * fwhm_target


def emg_waveform(grid: TimeGrid, fwhm_target: float, skew: float, t_peak: float = 0.0) -> TemporalWaveform:
    """Real amplitude whose intensity is an exponentially modified Gaussian.

    ``skew`` is the exponential decay time; the Gaussian width is solved so the
    intensity has the requested FWHM, and the intensity maximum sits at
    ``t_peak``.
    """
    sigma, mode = _emg_shape(float(fwhm_target), float(skew))
    t = grid.times - t_peak + mode
    if skew <= 0:
        inten = stats.norm.pdf(t, scale=sigma)
    else:
        inten = stats.exponnorm.pdf(t, skew / sigma, scale=sigma)
    return TemporalWaveform.normalized(grid, np.sqrt(inten))


def _check_preset_grid(grid: TimeGrid, t_peak: float) -> None:
    if grid.dt > MAX_PRESET_DT:
        raise ResolutionError(f"grid spacing {grid.dt:g} s exceeds {MAX_PRESET_DT:g} s")
    if grid.t_start > t_peak - PRESET_HALF_SPAN or grid.t_end < t_peak + PRESET_HALF_SPAN:
        raise ValidationError("grid must span at least +-10 ns around the pulse peak")


def preset_source_waveform(grid: TimeGrid | None = None, t_peak: float = 0.0) -> TemporalWaveform:
    """Asymmetric source photon: fast rise, exponential tail, FWHM 0.9 ns."""
    grid = grid or TimeGrid.centered()
    _check_preset_grid(grid, t_peak)
    return emg_waveform(grid, SOURCE_FWHM, SOURCE_SKEW, t_peak)


def preset_memory_waveform(grid: TimeGrid | None = None, t_peak: float = 0.0) -> TemporalWaveform:
    """Retrieved memory photon: broader and more symmetric, FWHM 1.5 ns."""
    grid = grid or TimeGrid.centered()
    _check_preset_grid(grid, t_peak)
    return emg_waveform(grid, MEMORY_FWHM, MEMORY_SKEW, t_peak)


def best_delay(
    u_ref: TemporalWaveform,
    u: TemporalWaveform,
    search: float = 3 * NS,
    step: float = 20e-12,
) -> tuple[float, float]:
    """Delay of ``u`` maximizing its overlap with ``u_ref``.

    Coarse scan over ``[-search, search]`` followed by a bounded scalar
    refinement. Returns ``(delay, eta)``.
    """

    def eta_at(d):
        return overlap_eta(u_ref, delay(u, d))

    grid = np.arange(-search, search + 0.5 * step, step)
    etas = [eta_at(d) for d in grid]
    k = int(np.argmax(etas))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(lambda d: -eta_at(d), bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-15})
    if -res.fun >= etas[k]:
        return float(res.x), float(-res.fun)
    return float(grid[k]), float(etas[k])


def windowed_eta(u_m: TemporalWaveform, u_s: TemporalWaveform, w: WindowConfig | None):
    """Apply the same window to both photons and return ``(eta, acc_m, acc_s)``."""
    if w is None:
        return overlap_eta(u_m, u_s), 1.0, 1.0
    wm, acc_m = apply_window(u_m, w)
    ws, acc_s = apply_window(u_s, w)
    return overlap_eta(wm, ws), acc_m, acc_s


def load_waveform(spec: str | Path, grid: TimeGrid | None = None) -> TemporalWaveform:
    """Resolve a preset name (``source``/``memory``) or a CSV path."""
    if str(spec) == "source":
        return preset_source_waveform(grid)
    if str(spec) == "memory":
        return preset_memory_waveform(grid)
    p = Path(spec)
    if not p.exists():
        raise ValidationError(f"waveform '{spec}' is neither a preset nor an existing file")
    return TemporalWaveform.from_csv(p)
