from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from radar_aplanc.errors import ArgumentError, ConfigError, DataError


@dataclass(frozen=True)
class RangeMatrix:
    """Chirp-major ``N x D`` complex range profiles."""

    data: np.ndarray
    chirp_rate_hz: float
    range_res_m: float

    def __post_init__(self):
        if self.data.ndim != 2 or self.data.shape[0] < 1 or self.data.shape[1] < 2:
            raise DataError(f"range matrix must be N x D with N >= 1, D >= 2; got {self.data.shape}")

    @property
    def n_chirps(self) -> int:
        return self.data.shape[0]

    @property
    def n_bins(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class WindowedMatrix:
    data: np.ndarray
    center_bin: int
    half_width: int
    chirp_rate_hz: float

    @property
    def width(self) -> int:
        return 2 * self.half_width + 1


def build_range_matrix(if_cube: np.ndarray, cfg=None, n_bins: int | None = None) -> RangeMatrix:
    """FFT every chirp along fast time; row ``n`` is chirp ``n``'s range profile.

    ``n_bins`` (or ``cfg.n_range_bins``) truncates or zero-pads the FFT; it
    defaults to the number of samples per chirp.
    """
    cube = np.asarray(if_cube)
    if cube.ndim != 2 or cube.shape[1] < 2:
        raise DataError(f"IF cube must be N x S with S >= 2, got shape {cube.shape}")
    if not np.all(np.isfinite(cube)):
        raise DataError("IF cube contains non-finite samples")
    s = cube.shape[1]
    if n_bins is None and cfg is not None:
        n_bins = cfg.n_range_bins
    d = n_bins or s
    data = np.fft.fft(cube, n=d, axis=1)
    if cfg is not None:
        from radar_aplanc.sim import C

        res = C * cfg.adc_rate_hz / (2 * cfg.chirp_slope_hz_per_s * d)
        rate = cfg.chirp_rate_hz
    else:
        res, rate = 1.0, 1.0
    return RangeMatrix(data.astype(np.complex128), float(rate), float(res))


def bin_power(m: RangeMatrix) -> np.ndarray:
    return np.sum(m.data.real**2 + m.data.imag**2, axis=0)


def select_center_bin(m: RangeMatrix, search: tuple[int, int] | None = None) -> int:
    """Bin with maximum summed power; ``search`` is a half-open ``[lo, hi)`` interval."""
    power = bin_power(m)
    lo, hi = (0, m.n_bins) if search is None else search
    if not 0 <= lo < hi <= m.n_bins:
        raise ArgumentError(f"search interval [{lo}, {hi}) empty or outside [0, {m.n_bins})")
    # argmax returns the first maximum, i.e. ties go to the smaller index
    return lo + int(np.argmax(power[lo:hi]))


def heartbeat_window(m: RangeMatrix, center: int, half_width: int = 2, clamp: bool = False) -> WindowedMatrix:
    d = m.n_bins
    if half_width < 0:
        raise ArgumentError("half_width must be >= 0")
    if clamp:
        center = min(max(center, half_width), d - 1 - half_width)
    if center - half_width < 0 or center + half_width >= d:
        valid = min(center, d - 1 - center)
        raise ArgumentError(
            f"window {center}+/-{half_width} leaves [0, {d}); valid half_width is 0..{max(valid, 0)}"
        )
    cols = m.data[:, center - half_width : center + half_width + 1].copy()
    return WindowedMatrix(cols, center, half_width, m.chirp_rate_hz)


def noise_bin_candidates(d: int, center: int, half_width: int, centre_only: bool = False) -> np.ndarray:
    """Admissible noise-window centres.

    By default the noise window may not overlap the heartbeat window at all;
    ``centre_only`` only forbids the centre bin itself.
    """
    c = np.arange(half_width, d - half_width)
    if centre_only:
        return c[c != center]
    return c[np.abs(c - center) > 2 * half_width]


def random_noise_window(
    m: RangeMatrix,
    center: int,
    half_width: int,
    rng: np.random.Generator,
    centre_only: bool = False,
) -> WindowedMatrix:
    cand = noise_bin_candidates(m.n_bins, center, half_width, centre_only)
    if cand.size == 0:
        raise ConfigError(
            f"no admissible noise bin for D={m.n_bins}, centre={center}, half_width={half_width}",
            field="delta_d",
        )
    d_noise = int(cand[rng.integers(cand.size)])
    return heartbeat_window(m, d_noise, half_width)
