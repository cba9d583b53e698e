"""Signal primitives for the training-free heartbeat pipeline.

Phase extraction, unwrapping, band-pass filtering, band-limited power spectra
and heart-rate readout. Everything here is deterministic and works on plain
``numpy`` arrays wrapped in :class:`TimeSeries`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import signal as sps

from radar_aplanc.errors import ArgumentError, DataError

HR_BAND_HZ = (0.8, 3.0)
HR_DF_HZ = 0.01
MIN_HR_DURATION_S = 10.0


@dataclass(frozen=True)
class TimeSeries:
    samples: np.ndarray
    rate_hz: float

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim != 1:
            raise DataError(f"time series must be 1-D, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise DataError("time series contains non-finite samples")
        if not self.rate_hz > 0:
            raise DataError(f"rate_hz must be positive, got {self.rate_hz}")
        object.__setattr__(self, "samples", x)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.rate_hz

    def segment(self, start: int, length: int) -> "TimeSeries":
        return TimeSeries(self.samples[start : start + length], self.rate_hz)


@dataclass(frozen=True)
class BandSpectrum:
    power: np.ndarray
    freqs_hz: np.ndarray
    f_lo_hz: float
    f_hi_hz: float
    df_hz: float

    def same_grid(self, other: "BandSpectrum") -> bool:
        return self.freqs_hz.shape == other.freqs_hz.shape and np.allclose(
            self.freqs_hz, other.freqs_hz
        )

    @property
    def peak_hz(self) -> float:
        return float(self.freqs_hz[int(np.argmax(self.power))])


def phase_at_bin(m, bin: int) -> TimeSeries:
    """Wrapped phase of one range bin over chirps, in (-pi, pi]."""
    d = m.data.shape[1]
    if not 0 <= bin < d:
        raise ArgumentError(f"bin {bin} outside [0, {d})")
    ph = np.angle(m.data[:, bin])
    # np.angle returns [-pi, pi]; fold -pi onto +pi
    ph = np.where(ph <= -np.pi, ph + 2 * np.pi, ph)
    return TimeSeries(ph, m.chirp_rate_hz)


def unwrap(phase: TimeSeries) -> TimeSeries:
    x = phase.samples
    if len(x) < 2:
        return phase
    d = np.diff(x)
    # wrap differences into (-pi, pi]
    dw = d - 2 * np.pi * np.ceil((d - np.pi) / (2 * np.pi))
    out = np.concatenate(([x[0]], x[0] + np.cumsum(dw)))
    return TimeSeries(out, phase.rate_hz)


def wrap(x: np.ndarray) -> np.ndarray:
    """Map angles into (-pi, pi]."""
    return x - 2 * np.pi * np.ceil((x - np.pi) / (2 * np.pi))


def bandpass_taps(rate_hz: float, f_lo: float, f_hi: float) -> np.ndarray:
    return _taps(float(rate_hz), float(f_lo), float(f_hi))


@lru_cache(maxsize=32)
def _taps(rate_hz: float, f_lo: float, f_hi: float) -> np.ndarray:
    n = int(round(4 * rate_hz / f_lo))
    if n % 2 == 0:
        n += 1
    taps = sps.firwin(n, [f_lo, f_hi], pass_zero=False, window="hamming", fs=rate_hz)
    taps.setflags(write=False)
    return taps


def bandpass(x: TimeSeries, f_lo: float = HR_BAND_HZ[0], f_hi: float = HR_BAND_HZ[1]) -> TimeSeries:
    """Zero-phase windowed-sinc band-pass with reflection padding.

    The mean is removed first: DC lies outside every admissible band, and the
    window's finite stop-band would otherwise leak a constant phase offset.
    """
    if not 0 < f_lo < f_hi < x.rate_hz / 2:
        raise ArgumentError(
            f"band [{f_lo}, {f_hi}] Hz must satisfy 0 < f_lo < f_hi < Nyquist={x.rate_hz / 2}"
        )
    taps = bandpass_taps(x.rate_hz, f_lo, f_hi)
    half = len(taps) // 2
    s = x.samples
    if len(s) < 2:
        return TimeSeries(np.zeros_like(s), x.rate_hz)
    padded = np.pad(s - s.mean(), half, mode="reflect")
    out = np.convolve(padded, taps, mode="valid")
    return TimeSeries(out, x.rate_hz)


def nfft_for(rate_hz: float, n: int, df: float) -> int:
    nfft = int(round(rate_hz / df))
    if rate_hz / nfft > df * (1 + 1e-9):
        nfft += 1
    return max(nfft, n)


def band_indices(rate_hz: float, nfft: int, f_lo: float, f_hi: float) -> np.ndarray:
    freqs = np.arange(nfft // 2 + 1) * rate_hz / nfft
    tol = 1e-9 * rate_hz
    return np.flatnonzero((freqs >= f_lo - tol) & (freqs <= f_hi + tol))


def psd(
    x: TimeSeries,
    f_lo: float = HR_BAND_HZ[0],
    f_hi: float = HR_BAND_HZ[1],
    df: float = HR_DF_HZ,
) -> BandSpectrum:
    """Unit-norm Hann periodogram restricted to ``[f_lo, f_hi]``.

    The mean is removed before windowing. An all-constant input has no
    in-band power and yields an all-zero vector.
    """
    n = len(x)
    if n < 2:
        raise ArgumentError("psd needs at least 2 samples")
    if not (0 <= f_lo < f_hi <= x.rate_hz / 2) or df <= 0:
        raise ArgumentError(f"degenerate band [{f_lo}, {f_hi}] with df={df}")
    nfft = nfft_for(x.rate_hz, n, df)
    idx = band_indices(x.rate_hz, nfft, f_lo, f_hi)
    if idx.size == 0:
        raise ArgumentError(f"band [{f_lo}, {f_hi}] contains no frequency bins")
    s = x.samples - x.samples.mean()
    spec = np.fft.rfft(s * np.hanning(n), n=nfft)[idx]
    power = spec.real**2 + spec.imag**2
    norm = np.linalg.norm(power)
    if norm > 0:
        power = power / norm
    return BandSpectrum(power, idx * x.rate_hz / nfft, f_lo, f_hi, x.rate_hz / nfft)


def hr_from_signal(x: TimeSeries) -> float:
    """Heart rate in bpm from the highest in-band spectral peak."""
    if x.duration_s < MIN_HR_DURATION_S - 1e-9:
        raise ArgumentError(
            f"heart-rate readout needs >= {MIN_HR_DURATION_S} s, got {x.duration_s:.3f} s"
        )
    return 60.0 * psd(x, *HR_BAND_HZ, df=HR_DF_HZ).peak_hz


def traditional_heartbeat(m, bin: int) -> TimeSeries:
    return bandpass(unwrap(phase_at_bin(m, bin)))
