"""Synthetic FMCW recordings of a seated subject.

Each chirp sees the chest at distance ``d_n = d0 + chest(t_n)`` and produces a
complex IF tone ``exp(j(2*pi*f*t + phi))`` with ``f = 2*k*d_n/c`` and
``phi = 4*pi*d_n/lambda``. Static clutter adds further tones; complex white
noise is scaled against the target's own power.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from radar_aplanc.dsp import TimeSeries
from radar_aplanc.errors import ConfigError

C = 299_792_458.0


@dataclass
class SceneConfig:
    target_distance_m: float = 0.6
    chest_amp_m: float = 2e-4
    heart_rate_bpm: float = 72.0
    resp_amp_m: float = 5e-4
    resp_rate_bpm: float = 15.0
    heart_harmonic_ratio: float = 0.0
    snr_db: float = 20.0
    clutter_bins: list[tuple[float, float]] = field(default_factory=list)
    # vibrating clutter: (distance_m, reflectivity, amplitude_m, frequency_hz)
    movers: list[tuple[float, float, float, float]] = field(default_factory=list)
    # 3.75 GHz swept in 32 us at 1 MS/s -> 4 cm bins
    chirp_slope_hz_per_s: float = 3.75e9 / 32e-6
    start_wavelength_m: float = C / 77e9
    adc_rate_hz: float = 1e6
    chirp_rate_hz: float = 120.0
    n_chirps: int = 3600
    n_range_bins: int | None = None
    samples_per_chirp: int = 32
    rng_seed: int = 0

    @property
    def bandwidth_hz(self) -> float:
        return self.chirp_slope_hz_per_s * self.samples_per_chirp / self.adc_rate_hz

    @property
    def range_resolution_m(self) -> float:
        return C / (2 * self.bandwidth_hz)

    @property
    def bin_spacing_m(self) -> float:
        d = self.n_range_bins or self.samples_per_chirp
        return C * self.adc_rate_hz / (2 * self.chirp_slope_hz_per_s * d)

    @property
    def effective_wavelength_m(self) -> float:
        """Carrier wavelength at mid-sweep.

        A range bin's DFT averages the IF phase over the chirp, so bin phase
        moves by ``4*pi*dd/lambda_eff`` per displacement ``dd`` rather than by
        ``4*pi*dd/start_wavelength_m``. The two differ by about ``B / (2 f0)``.
        """
        t_mid = (self.samples_per_chirp - 1) / (2 * self.adc_rate_hz)
        return C / (C / self.start_wavelength_m + self.chirp_slope_hz_per_s * t_mid)

    @property
    def duration_s(self) -> float:
        return self.n_chirps / self.chirp_rate_hz

    def validate(self) -> None:
        for name in ("n_chirps", "samples_per_chirp"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1", field=name)
        if self.n_range_bins is not None and self.n_range_bins < 2:
            raise ConfigError("n_range_bins must be >= 2", field="n_range_bins")
        for name in (
            "chirp_slope_hz_per_s",
            "start_wavelength_m",
            "adc_rate_hz",
            "chirp_rate_hz",
            "target_distance_m",
        ):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be positive and finite, got {v}", field=name)
        for name in ("chest_amp_m", "resp_amp_m", "heart_harmonic_ratio", "resp_rate_bpm"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ConfigError(f"{name} must be >= 0, got {v}", field=name)
        if not 48.0 <= self.heart_rate_bpm <= 180.0:
            raise ConfigError(
                f"heart_rate_bpm={self.heart_rate_bpm} outside the 48-180 bpm band",
                field="heart_rate_bpm",
            )
        if self.chest_amp_m >= self.range_resolution_m:
            raise ConfigError(
                f"chest_amp_m={self.chest_amp_m} is not below the range resolution "
                f"{self.range_resolution_m:.4f} m",
                field="chest_amp_m",
            )
        if math.isnan(self.snr_db) or self.snr_db == -math.inf:
            raise ConfigError(f"snr_db must be finite or +inf, got {self.snr_db}", field="snr_db")
        max_range = self.bin_spacing_m * (self.n_range_bins or self.samples_per_chirp)
        if self.target_distance_m >= max_range:
            raise ConfigError(
                f"target_distance_m={self.target_distance_m} beyond max range {max_range:.3f} m",
                field="target_distance_m",
            )
        for i, (dist, refl) in enumerate(self.clutter_bins):
            if not (0 <= dist < max_range and refl >= 0):
                raise ConfigError(f"clutter_bins[{i}] = {(dist, refl)} invalid", field="clutter_bins")
        for i, mv in enumerate(self.movers):
            if len(mv) != 4 or not (0 <= mv[0] < max_range and mv[1] >= 0 and mv[2] >= 0 and mv[3] >= 0):
                raise ConfigError(f"movers[{i}] = {mv} invalid", field="movers")

    def replace(self, **changes) -> "SceneConfig":
        return dataclasses.replace(self, **changes)


@dataclass
class GroundTruth:
    displacement_m: TimeSeries
    hr_bpm_trace: TimeSeries
    mean_hr_bpm: float


def chest_motion(cfg: SceneConfig, t: np.ndarray) -> np.ndarray:
    fh = cfg.heart_rate_bpm / 60.0
    fr = cfg.resp_rate_bpm / 60.0
    x = cfg.chest_amp_m * np.sin(2 * np.pi * fh * t)
    if cfg.heart_harmonic_ratio:
        x = x + cfg.chest_amp_m * cfg.heart_harmonic_ratio * np.sin(4 * np.pi * fh * t)
    return x + cfg.resp_amp_m * np.sin(2 * np.pi * fr * t)


def simulate_if_signals(cfg: SceneConfig) -> tuple[np.ndarray, GroundTruth]:
    """Return the ``n_chirps x samples_per_chirp`` complex IF cube and ground truth."""
    cfg.validate()
    rng = np.random.default_rng(cfg.rng_seed)
    t_chirp = np.arange(cfg.n_chirps) / cfg.chirp_rate_hz
    t_fast = np.arange(cfg.samples_per_chirp) / cfg.adc_rate_hz
    k, lam = cfg.chirp_slope_hz_per_s, cfg.start_wavelength_m

    def tone(dist):
        d = np.asarray(dist, dtype=np.float64)[..., None]
        return np.exp(1j * (2 * np.pi * (2 * k * d / C) * t_fast + 4 * np.pi * d / lam))

    disp = chest_motion(cfg, t_chirp)
    cube = tone(cfg.target_distance_m + disp)
    for dist, refl in cfg.clutter_bins:
        cube = cube + refl * tone(np.full(cfg.n_chirps, dist))
    for dist, refl, amp, freq in cfg.movers:
        cube = cube + refl * tone(dist + amp * np.sin(2 * np.pi * freq * t_chirp))
    if math.isfinite(cfg.snr_db):
        sigma = math.sqrt(10 ** (-cfg.snr_db / 10) / 2)
        cube = cube + sigma * (
            rng.standard_normal(cube.shape) + 1j * rng.standard_normal(cube.shape)
        )
    hr = np.full(cfg.n_chirps, cfg.heart_rate_bpm)
    gt = GroundTruth(
        TimeSeries(disp, cfg.chirp_rate_hz),
        TimeSeries(hr, cfg.chirp_rate_hz),
        float(cfg.heart_rate_bpm),
    )
    return cube, gt


def random_scene(rng: np.random.Generator, base: SceneConfig, snr_db: float, seed: int) -> SceneConfig:
    """Draw subject parameters around ``base``; used for corpus generation."""
    bins = base.n_range_bins or base.samples_per_chirp
    spacing = base.bin_spacing_m
    dist = rng.uniform(0.5, min(1.0, spacing * (bins - 4)))
    clutter_dist = rng.uniform(spacing * 2, spacing * (bins - 2))
    hr = float(rng.uniform(55.0, 110.0))
    # an in-band vibrating reflector two bins from the chest, well away from the heart rate
    mover_hz = hr / 60.0
    while abs(mover_hz - hr / 60.0) < 0.25:
        mover_hz = float(rng.uniform(0.9, 2.8))
    mover = (
        float(dist + rng.choice([-2.0, 2.0]) * spacing),
        float(rng.uniform(0.4, 0.7)),
        float(rng.uniform(1.5e-4, 3e-4)),
        mover_hz,
    )
    return base.replace(
        movers=[mover],
        target_distance_m=float(dist),
        heart_rate_bpm=hr,
        chest_amp_m=float(rng.uniform(1e-4, 2e-4)),
        resp_amp_m=float(rng.uniform(3e-4, 8e-4)),
        resp_rate_bpm=float(rng.uniform(10.0, 20.0)),
        clutter_bins=[(float(clutter_dist), float(rng.uniform(0.1, 0.5)))],
        snr_db=float(snr_db),
        rng_seed=int(seed),
    )


def make_corpus(
    cfgs: list[SceneConfig],
    out_dir: str | Path,
    splits: list[str] | None = None,
    manifest_name: str = "manifest.txt",
):
    """Simulate every scene, write RAPM + RAGT files and a manifest.

    Returns the list of :class:`~radar_aplanc.io.ManifestEntry` rows written.
    """
    from radar_aplanc import io
    from radar_aplanc.rangeproc import build_range_matrix

    out_dir = Path(out_dir)
    splits = splits or ["train"] * len(cfgs)
    if len(splits) != len(cfgs):
        raise ConfigError("one split label per scene required", field="splits")
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create corpus directory {out_dir}: {exc}") from exc
    entries = []
    for i, (cfg, split) in enumerate(zip(cfgs, splits)):
        cube, gt = simulate_if_signals(cfg)
        m = build_range_matrix(cube, cfg)
        stem = f"scene_{i:04d}"
        io.write_rapm(out_dir / f"{stem}.rapm", m)
        io.write_ragt(out_dir / f"{stem}.ragt", gt)
        entries.append(
            io.ManifestEntry(f"{stem}.rapm", cfg.rng_seed, gt.mean_hr_bpm, cfg.snr_db, split)
        )
    io.write_manifest(out_dir / manifest_name, entries)
    return entries
