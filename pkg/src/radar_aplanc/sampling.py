"""Random temporal sub-windows turned into band-limited spectra.

The same construction is used for pseudo-labels, predicted heartbeat signals
and noise signals. :func:`spectra_with_vjp` is the differentiable version used
during training; it reproduces :func:`radar_aplanc.dsp.psd` exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from radar_aplanc.dsp import HR_BAND_HZ, BandSpectrum, TimeSeries, band_indices, nfft_for, psd
from radar_aplanc.errors import ArgumentError

SOURCE_TAGS = ("pseudo_label", "positive", "negative")


@dataclass
class SampleSet:
    spectra: list[BandSpectrum]
    source_tag: str
    offsets: np.ndarray

    def __post_init__(self):
        if self.source_tag not in SOURCE_TAGS:
            raise ArgumentError(f"unknown source tag {self.source_tag!r}")
        if not self.spectra:
            raise ArgumentError("sample set needs at least one spectrum")
        first = self.spectra[0]
        if not all(first.same_grid(s) for s in self.spectra[1:]):
            raise ArgumentError("spectra in a sample set must share one frequency grid")

    def __len__(self) -> int:
        return len(self.spectra)

    def matrix(self) -> np.ndarray:
        return np.stack([s.power for s in self.spectra])

    @property
    def freqs_hz(self) -> np.ndarray:
        return self.spectra[0].freqs_hz


def draw_offsets(n: int, length: int, k: int, rng: np.random.Generator) -> np.ndarray:
    if length > n:
        raise ArgumentError(f"sub-window of {length} samples exceeds signal length {n}")
    return rng.integers(0, n - length + 1, size=k)


def sub_len_samples(x: TimeSeries, sub_len_s: float) -> int:
    length = int(round(sub_len_s * x.rate_hz))
    if length < 2 or length > len(x):
        raise ArgumentError(
            f"signal of {x.duration_s:.2f} s is shorter than the {sub_len_s} s sub-window"
        )
    return length


def random_temporal_sample(
    x: TimeSeries,
    k: int,
    sub_len_s: float,
    rng: np.random.Generator | None = None,
    source_tag: str = "pseudo_label",
    df: float = 0.05,
    band: tuple[float, float] = HR_BAND_HZ,
    offsets: np.ndarray | None = None,
) -> SampleSet:
    """``k`` uniformly placed sub-windows of ``sub_len_s`` seconds, each mapped through ``psd``.

    Pass ``offsets`` to reuse start indices drawn for another set.
    """
    length = sub_len_samples(x, sub_len_s)
    if offsets is None:
        if rng is None:
            raise ArgumentError("need rng or offsets")
        offsets = draw_offsets(len(x), length, k, rng)
    spectra = [psd(x.segment(int(o), length), band[0], band[1], df) for o in offsets]
    return SampleSet(spectra, source_tag, np.asarray(offsets))


@lru_cache(maxsize=16)
def _psd_operator(length: int, rate_hz: float, f_lo: float, f_hi: float, df: float):
    """Real matrices ``(A_re, A_im)`` so that the in-band DFT of the windowed,
    mean-removed segment ``x`` is ``A_re @ x + 1j * A_im @ x``."""
    nfft = nfft_for(rate_hz, length, df)
    idx = band_indices(rate_hz, nfft, f_lo, f_hi)
    phase = -2 * np.pi * np.outer(idx, np.arange(length)) / nfft
    win = np.hanning(length)
    a_re = np.cos(phase) * win
    a_im = np.sin(phase) * win
    # fold the mean removal in: A (I - 11^T / L)
    a_re -= a_re.sum(axis=1, keepdims=True) / length
    a_im -= a_im.sum(axis=1, keepdims=True) / length
    freqs = idx * rate_hz / nfft
    for a in (a_re, a_im, freqs):
        a.setflags(write=False)
    return a_re, a_im, freqs


def spectra_with_vjp(
    x: np.ndarray,
    offsets: np.ndarray,
    length: int,
    rate_hz: float,
    df: float = 0.05,
    band: tuple[float, float] = HR_BAND_HZ,
    normalize: bool = True,
):
    """Spectra ``U`` of shape ``(k, n_freq)`` and a function mapping ``dL/dU`` to ``dL/dx``."""
    a_re, a_im, freqs = _psd_operator(length, float(rate_hz), float(band[0]), float(band[1]), float(df))
    idx = np.asarray(offsets)[:, None] + np.arange(length)
    seg = x[idx]
    xr = seg @ a_re.T
    xi = seg @ a_im.T
    power = xr * xr + xi * xi
    if normalize:
        norm = np.linalg.norm(power, axis=1, keepdims=True)
        norm = np.where(norm > 0, norm, 1.0)
        u = power / norm
    else:
        u = power

    def vjp(gu: np.ndarray) -> np.ndarray:
        if normalize:
            gp = (gu - u * np.sum(gu * u, axis=1, keepdims=True)) / norm
        else:
            gp = gu
        gseg = 2.0 * ((gp * xr) @ a_re + (gp * xi) @ a_im)
        gx = np.zeros_like(x)
        np.add.at(gx, idx, gseg)
        return gx

    return u, freqs, vjp
