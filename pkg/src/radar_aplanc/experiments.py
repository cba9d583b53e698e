"""Desk-scale ablation study on a synthetic corpus.

Builds a 30-recording corpus (10 high-SNR, 20 low-SNR), trains the five
ablation configurations and scores them, together with the training-free
baseline, on the low-SNR test split.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from radar_aplanc import io
from radar_aplanc.config import TrainConfig
from radar_aplanc.data import load_split
from radar_aplanc.eval import ABLATION_ROWS, evaluate_recordings, predict_extractor, predict_traditional
from radar_aplanc.sim import SceneConfig, make_corpus, random_scene
from radar_aplanc.training import train_on_recordings

log = logging.getLogger(__name__)


def study_corpus(
    out_dir,
    seed: int = 0,
    n_high: int = 10,
    n_low: int = 20,
    high_snr_db: tuple[float, float] = (10.0, 20.0),
    low_snr_db: tuple[float, float] = (-12.0, -5.0),
    base: SceneConfig | None = None,
):
    """High-SNR scenes go 80/20 to train/val; low-SNR scenes 50/10/40 to train/val/test."""
    base = base or SceneConfig()
    rng = np.random.default_rng(seed)
    cfgs, splits = [], []
    n_high_train = int(round(0.8 * n_high))
    for i in range(n_high):
        snr = float(rng.uniform(*high_snr_db))
        cfgs.append(random_scene(rng, base, snr, seed * 100_000 + i))
        splits.append("train" if i < n_high_train else "val")
    n_low_train, n_low_val = int(round(0.5 * n_low)), int(round(0.1 * n_low))
    for i in range(n_low):
        snr = float(rng.uniform(*low_snr_db))
        cfgs.append(random_scene(rng, base, snr, seed * 100_000 + 50_000 + i))
        splits.append("train" if i < n_low_train else "val" if i < n_low_train + n_low_val else "test")
    return make_corpus(cfgs, out_dir, splits)


# (stage, use_pseudo, use_noise) for every ablation row
ABLATION_CONFIGS = {
    "noise_only": (1, False, True),
    "pseudo_only": (1, True, False),
    "noise_pseudo_stage1": (1, True, True),
    "stage2_no_noise": (2, True, False),
    "stage2_full": (2, True, True),
}


@dataclass
class StudyResult:
    rows: list[dict]
    seed: int
    runtime_s: float
    metrics_files: dict[str, Path] = field(default_factory=dict)

    def mae(self, name: str) -> float:
        return next(r["mae_bpm"] for r in self.rows if r["config"] == name)


def run_study(
    manifest_path,
    out_dir,
    base_cfg: TrainConfig,
    rows: tuple[str, ...] = ("traditional",) + ABLATION_ROWS,
) -> StudyResult:
    """Train and score the requested ablation rows; stage-two rows reuse the stage-one model."""
    t0 = time.perf_counter()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train = load_split(manifest_path, "train")
    val = load_split(manifest_path, "val")
    test = load_split(manifest_path, "test")
    dd = base_cfg.delta_d
    results: list[dict] = []
    metrics: dict[str, Path] = {}
    trained = {}

    def score(name, predictor):
        agg, _ = evaluate_recordings(test, predictor)
        results.append(
            {"config": name, "mae_bpm": agg.mae_bpm, "rmse_bpm": agg.rmse_bpm, "pearson_r": agg.pearson_r}
        )

    if "traditional" in rows:
        score("traditional", predict_traditional)
    needs_stage1 = any(ABLATION_CONFIGS[r][0] == 2 for r in rows if r in ABLATION_CONFIGS)
    for name in ABLATION_ROWS:
        if name not in rows and not (name == "noise_pseudo_stage1" and needs_stage1):
            continue
        stage, use_pseudo, use_noise = ABLATION_CONFIGS[name]
        cfg = base_cfg.replace(stage=stage, use_pseudo=use_pseudo, use_noise=use_noise)
        ckpt = None
        if stage == 2:
            s1 = trained["noise_pseudo_stage1"]
            ckpt = (s1.gh, s1.gn)
        metrics[name] = out_dir / f"metrics_{name}.csv"
        res = train_on_recordings(train, val, cfg, ckpt, metrics[name])
        trained[name] = res
        io.write_rapw(out_dir / f"{name}_gh.rapw", res.gh)
        io.write_rapw(out_dir / f"{name}_gn.rapw", res.gn)
        log.info("%s: best epoch %d", name, res.best_epoch)
        if name in rows:
            score(name, lambda r, gh=res.gh: predict_extractor(r, gh, dd))
    return StudyResult(results, base_cfg.seed, time.perf_counter() - t0, metrics)


def write_rows(path, rows: list[dict], extra: dict | None = None) -> None:
    with open(path, "w", newline="") as f:
        cols = (list(extra) if extra else []) + ["config", "mae_bpm", "rmse_bpm", "pearson_r"]
        w = csv.writer(f, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            vals = (list(extra.values()) if extra else []) + [r["config"]]
            w.writerow(vals + [f"{r[k]:.6f}" for k in ("mae_bpm", "rmse_bpm", "pearson_r")])
