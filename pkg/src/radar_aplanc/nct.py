"""Noise-contrastive triplet loss and the stage-two pseudo-label selector."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from radar_aplanc import model
from radar_aplanc.dsp import MIN_HR_DURATION_S, TimeSeries, hr_from_signal, traditional_heartbeat
from radar_aplanc.errors import ArgumentError
from radar_aplanc.rangeproc import heartbeat_window, random_noise_window
from radar_aplanc.sampling import SampleSet

BRANCHES = ("agree", "override", "fallback")


@dataclass
class NctLossBreakdown:
    l_p: float
    l_n: float
    total: float
    grad_positive: np.ndarray | None = field(default=None, repr=False)
    grad_negative: np.ndarray | None = field(default=None, repr=False)


def _as_matrix(s) -> np.ndarray:
    return s.matrix() if isinstance(s, SampleSet) else np.asarray(s, dtype=np.float64)


def _check_grid(a: SampleSet | np.ndarray, b: SampleSet | np.ndarray, what: str):
    if isinstance(a, SampleSet) and isinstance(b, SampleSet):
        if not a.spectra[0].same_grid(b.spectra[0]):
            raise ArgumentError(f"{what}: sample sets use different frequency grids")


def pair_distance(a: np.ndarray, b: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean squared Euclidean distance over all ``(i, j)`` pairs and its gradients."""
    ka, kb = a.shape[0], b.shape[0]
    diff = a[:, None, :] - b[None, :, :]
    value = float(np.sum(diff * diff)) / (ka * kb)
    ga = 2.0 * diff.sum(axis=1) / (ka * kb)
    gb = -2.0 * diff.sum(axis=0) / (ka * kb)
    return value, ga, gb


def nct_loss(
    s_pl: SampleSet | np.ndarray | None,
    s_p: SampleSet | np.ndarray,
    s_n: SampleSet | np.ndarray | None,
) -> NctLossBreakdown:
    """``l_p`` pulls positives to pseudo-labels, ``l_n`` pushes them from noise.

    Either term is dropped (set to 0) when its set is ``None``. The breakdown
    carries the gradients of ``total`` with respect to the positive and the
    negative spectra.
    """
    p = _as_matrix(s_p)
    grad_p = np.zeros_like(p)
    l_p = l_n = 0.0
    grad_n = None
    if s_pl is not None:
        _check_grid(s_pl, s_p, "positive term")
        pl = _as_matrix(s_pl)
        if pl.shape[1] != p.shape[1]:
            raise ArgumentError("positive term: spectra lengths differ")
        l_p, _, gb = pair_distance(pl, p)
        grad_p += gb
    if s_n is not None:
        _check_grid(s_p, s_n, "negative term")
        n = _as_matrix(s_n)
        if n.shape[1] != p.shape[1]:
            raise ArgumentError("negative term: spectra lengths differ")
        d, ga, gb = pair_distance(p, n)
        l_n = -d
        grad_p -= ga
        grad_n = -gb
    return NctLossBreakdown(l_p, l_n, l_p + l_n, grad_p, grad_n)


def window_hrs(x: TimeSeries, window_s: float = MIN_HR_DURATION_S, n_windows: int | None = None) -> np.ndarray:
    """Heart rate of each consecutive, non-overlapping window (remainder dropped)."""
    length = int(round(window_s * x.rate_hz))
    count = len(x) // length if n_windows is None else n_windows
    if count < 1:
        raise ArgumentError(f"signal of {x.duration_s:.2f} s is shorter than one {window_s} s window")
    return np.array([hr_from_signal(x.segment(i * length, length)) for i in range(count)])


def signal_distance(a: TimeSeries, b: TimeSeries, truncate: bool = False) -> float:
    """Mean absolute heart-rate difference over consecutive 10 s windows, in bpm."""
    if len(a) != len(b):
        if not truncate:
            raise ArgumentError(f"signal lengths differ ({len(a)} vs {len(b)})")
        n = min(len(a), len(b))
        a, b = a.segment(0, n), b.segment(0, n)
    return float(np.mean(np.abs(window_hrs(a) - window_hrs(b))))


@dataclass
class PseudoLabelDecision:
    chosen: int | str
    noise_dists: np.ndarray
    hb_dists: np.ndarray
    p_noise_dist: float
    branch: str


def decide(noise_dists, hb_dists, p_noise_dist: float) -> tuple[str, int | None]:
    """Decision rule over candidate distances; returns ``(branch, index)``.

    ``index`` is the chosen traditional candidate (0-based) or ``None`` when
    the pretrained prediction wins. Ties resolve to the smaller index.
    """
    x = np.asarray(noise_dists, dtype=np.float64)
    y = np.asarray(hb_dists, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.size == 0:
        raise ArgumentError("noise and heartbeat distance vectors must be 1-D and equal length")
    best = int(np.argmin(y))
    if int(np.argmax(x)) == best:
        return "agree", best
    if x[best] > p_noise_dist:
        return "override", best
    return "fallback", None


def aug_pseudo_gen(
    m,
    center: int,
    gh_star: model.ExtractorParams,
    gn_star: model.ExtractorParams,
    rng: np.random.Generator,
    half_width: int = 2,
    centre_only: bool = False,
    p: TimeSeries | None = None,
    candidates: list[TimeSeries] | None = None,
    hr_cache: dict | None = None,
) -> tuple[TimeSeries, PseudoLabelDecision]:
    """Pick the best-quality heartbeat signal among traditional candidates and ``p``.

    ``p`` and ``candidates`` only depend on the recording and the frozen
    extractor, so callers that loop over epochs may pass cached copies, plus
    an ``hr_cache`` dict that keeps their window heart rates between calls.
    """
    if candidates is None:
        candidates = [
            traditional_heartbeat(m, b) for b in range(center - half_width, center + half_width + 1)
        ]
    if p is None:
        p = model.forward(gh_star, heartbeat_window(m, center, half_width))
    q = model.forward(gn_star, random_noise_window(m, center, half_width, rng, centre_only))
    hr_q = window_hrs(q)
    cache = hr_cache if hr_cache is not None else {}
    if "p" not in cache:
        cache["p"] = window_hrs(p)
        cache["candidates"] = [window_hrs(c) for c in candidates]
    hr_p, hr_c = cache["p"], cache["candidates"]
    x = np.array([np.mean(np.abs(h - hr_q)) for h in hr_c])
    y = np.array([np.mean(np.abs(h - hr_p)) for h in hr_c])
    d_pq = float(np.mean(np.abs(hr_p - hr_q)))
    branch, idx = decide(x, y, d_pq)
    chosen = "p" if idx is None else idx
    out = p if idx is None else candidates[idx]
    return out, PseudoLabelDecision(chosen, x, y, d_pq, branch)
