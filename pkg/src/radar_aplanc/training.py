"""Two-stage unsupervised training loop for the heartbeat and noise extractors."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from radar_aplanc import model
from radar_aplanc.config import TrainConfig
from radar_aplanc.data import Recording, load_split
from radar_aplanc.dsp import TimeSeries, traditional_heartbeat
from radar_aplanc.errors import ArgumentError, TrainingError
from radar_aplanc.eval import evaluate_recordings, predict_extractor
from radar_aplanc.nct import BRANCHES, aug_pseudo_gen, nct_loss
from radar_aplanc.rangeproc import heartbeat_window, random_noise_window
from radar_aplanc.sampling import draw_offsets, spectra_with_vjp, sub_len_samples

log = logging.getLogger(__name__)

METRIC_COLUMNS = ["epoch", "step", "l_p", "l_n", "total", "val_mae", "agree", "override", "fallback"]


@dataclass
class TrainResult:
    gh: model.ExtractorParams
    gn: model.ExtractorParams
    best_epoch: int
    val_mae: list[float]
    rows: list[dict] = field(default_factory=list)
    skipped_steps: int = 0


class _MetricsLog:
    def __init__(self, path):
        self.rows: list[dict] = []
        self.path = Path(path) if path is not None else None
        if self.path is not None:
            with open(self.path, "w", newline="") as f:
                csv.writer(f, lineterminator="\n").writerow(METRIC_COLUMNS)

    def append(self, row: dict):
        self.rows.append(row)
        if self.path is not None:
            with open(self.path, "a", newline="") as f:
                csv.writer(f, lineterminator="\n").writerow([_cell(row[c]) for c in METRIC_COLUMNS])


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.10g}"
    return v


def _features(rec: Recording, center: int, half_width: int) -> np.ndarray:
    return model.window_features(heartbeat_window(rec.m, center, half_width))


def validation_mae(gh: model.ExtractorParams, recs: list[Recording], half_width: int) -> float:
    if not recs:
        return math.nan
    agg, _ = evaluate_recordings(recs, lambda r: predict_extractor(r, gh, half_width))
    return agg.mae_bpm


def train_on_recordings(
    train: list[Recording],
    val: list[Recording],
    cfg: TrainConfig,
    checkpoints: tuple[model.ExtractorParams, model.ExtractorParams] | None = None,
    metrics_path=None,
) -> TrainResult:
    """Run one training stage; returns the best-validation-epoch extractors.

    Stage two needs ``checkpoints = (gh_star, gn_star)`` from stage one; they
    stay frozen and only drive the pseudo-label selector.
    """
    cfg.validate()
    if not train:
        raise ArgumentError("no training recordings")
    if cfg.stage == 2 and checkpoints is None:
        raise ArgumentError("stage two requires stage-one checkpoints (gh*, gn*)")
    dd = cfg.delta_d
    root = np.random.default_rng(cfg.seed)
    init_rng, loop_rng, aug_rng = (np.random.default_rng(s) for s in root.spawn(3))
    arch = dict(half_width=dd, hidden=cfg.hidden, n_layers=cfg.n_layers, kernel=cfg.kernel)
    if cfg.stage == 2 and cfg.stage2_continue:
        gh, gn = checkpoints[0].copy(), checkpoints[1].copy()
    else:
        gh = model.init_extractor(init_rng, **arch)
        gn = model.init_extractor(init_rng, **arch)
    opt_h = model.OptimizerState(lr=cfg.learning_rate, weight_decay=cfg.weight_decay)
    opt_n = model.OptimizerState(lr=cfg.learning_rate, weight_decay=cfg.weight_decay)

    hb_feats = [_features(r, r.center, dd) for r in train]
    pseudo: dict[int, TimeSeries] = {}
    stage2_cache: dict[int, tuple[TimeSeries, list[TimeSeries], dict]] = {}
    if cfg.use_pseudo and cfg.stage == 1:
        pseudo = {i: traditional_heartbeat(r.m, r.center) for i, r in enumerate(train)}
    elif cfg.use_pseudo:
        gh_star, gn_star = checkpoints
        for i, r in enumerate(train):
            p_star = model.forward(gh_star, heartbeat_window(r.m, r.center, dd))
            cands = [traditional_heartbeat(r.m, b) for b in range(r.center - dd, r.center + dd + 1)]
            stage2_cache[i] = (p_star, cands, {})

    metrics = _MetricsLog(metrics_path)
    best = (math.inf, 0, gh.copy(), gn.copy())
    val_hist: list[float] = []
    skipped = consecutive = 0
    step = 0
    for epoch in range(1, cfg.epochs + 1):
        order = loop_rng.permutation(len(train))
        for pos, i in enumerate(order):
            rec = train[i]
            rate = rec.m.chirp_rate_hz
            n = rec.m.n_chirps
            p, vjp_h = model.forward_backward_fn(gh, hb_feats[i])
            noise_w = random_noise_window(rec.m, rec.center, dd, loop_rng, cfg.strict_noise_window)
            q, vjp_n = model.forward_backward_fn(gn, model.window_features(noise_w))
            branch = None
            if cfg.use_pseudo and cfg.stage == 1:
                phi = pseudo[i]
            elif cfg.use_pseudo:
                p_star, cands, hr_cache = stage2_cache[i]
                phi, decision = aug_pseudo_gen(
                    rec.m, rec.center, gh_star, gn_star, aug_rng, dd,
                    cfg.strict_noise_window, p=p_star, candidates=cands, hr_cache=hr_cache,
                )
                branch = decision.branch
            length = sub_len_samples(TimeSeries(p, rate), cfg.sub_len_s)
            offsets = draw_offsets(n, length, cfg.K, loop_rng)
            spec = dict(length=length, rate_hz=rate, df=cfg.psd_df_hz, normalize=cfg.normalize_psd)
            s_p, _, back_p = spectra_with_vjp(p, offsets, **spec)
            s_n = back_n = None
            if cfg.use_noise:
                s_n, _, back_n = spectra_with_vjp(q, offsets, **spec)
            s_pl = None
            if cfg.use_pseudo:
                s_pl, _, _ = spectra_with_vjp(phi.samples, offsets, **spec)
            loss = nct_loss(s_pl, s_p, s_n)
            step += 1
            row = {
                "epoch": epoch, "step": step, "l_p": loss.l_p, "l_n": loss.l_n,
                "total": loss.total, "val_mae": None,
            }
            row.update({b: int(branch == b) for b in BRANCHES})
            try:
                if not math.isfinite(loss.total):
                    raise TrainingError("non-finite loss")
                g_h = vjp_h(back_p(loss.grad_positive))
                if cfg.use_noise:
                    g_n = vjp_n(back_n(loss.grad_negative))
                    for g in g_n:
                        if not np.all(np.isfinite(g)):
                            raise TrainingError("non-finite gradient")
                model.adamw_step(opt_h, gh, g_h)
                if cfg.use_noise:
                    model.adamw_step(opt_n, gn, g_n)
                consecutive = 0
            except TrainingError as exc:
                skipped += 1
                consecutive += 1
                log.warning("epoch %d step %d skipped: %s", epoch, step, exc)
                if consecutive >= cfg.max_consecutive_skips:
                    raise TrainingError(f"aborting after {consecutive} consecutive skipped steps") from exc
            if pos == len(order) - 1:
                vm = validation_mae(gh, val, dd)
                val_hist.append(vm)
                row["val_mae"] = vm
                # without validation data the last epoch wins
                score = vm if not math.isnan(vm) else -float(epoch)
                if score < best[0]:
                    best = (score, epoch, gh.copy(), gn.copy())
                log.info("stage %d epoch %d: val MAE %.3f bpm", cfg.stage, epoch, vm)
            metrics.append(row)
    _, best_epoch, gh_best, gn_best = best
    return TrainResult(gh_best, gn_best, best_epoch, val_hist, metrics.rows, skipped)


def train_stage(
    manifest_path,
    cfg: TrainConfig,
    checkpoints: tuple[model.ExtractorParams, model.ExtractorParams] | None = None,
    metrics_path=None,
) -> TrainResult:
    train = load_split(manifest_path, "train")
    val = [r for r in load_split(manifest_path, "val") if r.gt is not None]
    return train_on_recordings(train, val, cfg, checkpoints, metrics_path)
