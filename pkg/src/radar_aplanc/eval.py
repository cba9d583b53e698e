"""Windowed heart-rate evaluation: MAE, RMSE and Pearson r against reference rates."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from radar_aplanc.dsp import TimeSeries, traditional_heartbeat
from radar_aplanc.errors import ArgumentError

log = logging.getLogger(__name__)

WINDOW_S = 10.0


@dataclass
class EvalReport:
    pred_bpm: np.ndarray
    ref_bpm: np.ndarray
    window_s: float = WINDOW_S
    mae_bpm: float = field(init=False)
    rmse_bpm: float = field(init=False)
    pearson_r: float = field(init=False)
    pearson_defined: bool = field(init=False)

    def __post_init__(self):
        self.pred_bpm = np.asarray(self.pred_bpm, dtype=np.float64)
        self.ref_bpm = np.asarray(self.ref_bpm, dtype=np.float64)
        if self.pred_bpm.shape != self.ref_bpm.shape or self.pred_bpm.ndim != 1:
            raise ArgumentError("prediction and reference must be equal-length 1-D arrays")
        if self.pred_bpm.size == 0:
            raise ArgumentError("no evaluation windows")
        err = self.pred_bpm - self.ref_bpm
        self.mae_bpm = float(np.mean(np.abs(err)))
        self.rmse_bpm = float(np.sqrt(np.mean(err**2)))
        self.pearson_r, self.pearson_defined = pearson(self.pred_bpm, self.ref_bpm)

    @property
    def n_windows(self) -> int:
        return self.pred_bpm.size


def pearson(a: np.ndarray, b: np.ndarray) -> tuple[float, bool]:
    """Pearson correlation; ``(nan, False)`` with fewer than two windows or zero variance."""
    if a.size < 2:
        return math.nan, False
    da, db = a - a.mean(), b - b.mean()
    denom = math.sqrt(float(np.sum(da * da)) * float(np.sum(db * db)))
    if denom == 0:
        return math.nan, False
    return float(np.clip(np.sum(da * db) / denom, -1.0, 1.0)), True


def window_reference(hr_trace: TimeSeries, n_windows: int, window_s: float = WINDOW_S) -> np.ndarray:
    length = int(round(window_s * hr_trace.rate_hz))
    return np.array([hr_trace.samples[i * length : (i + 1) * length].mean() for i in range(n_windows)])


def evaluate(pred: TimeSeries, ref_bpm, window_s: float = WINDOW_S) -> EvalReport:
    """Score ``pred`` on consecutive non-overlapping windows.

    ``ref_bpm`` is either one reference rate per window or a per-sample
    :class:`TimeSeries` heart-rate trace that gets averaged per window.
    """
    from radar_aplanc.nct import window_hrs

    length = int(round(window_s * pred.rate_hz))
    n = len(pred) // length
    if n < 1:
        raise ArgumentError(f"prediction of {pred.duration_s:.2f} s covers no full {window_s} s window")
    if isinstance(ref_bpm, TimeSeries):
        ref = window_reference(ref_bpm, n, window_s)
    else:
        ref = np.asarray(ref_bpm, dtype=np.float64)
        if ref.size < n:
            raise ArgumentError(f"{ref.size} reference windows for {n} prediction windows")
        ref = ref[:n]
    return EvalReport(window_hrs(pred, window_s, n), ref, window_s)


def merge(reports: list[EvalReport]) -> EvalReport:
    return EvalReport(
        np.concatenate([r.pred_bpm for r in reports]),
        np.concatenate([r.ref_bpm for r in reports]),
        reports[0].window_s,
    )


def predict_traditional(rec) -> TimeSeries:
    return traditional_heartbeat(rec.m, rec.center)


def predict_extractor(rec, gh, half_width: int) -> TimeSeries:
    from radar_aplanc import model
    from radar_aplanc.rangeproc import heartbeat_window

    return model.forward(gh, heartbeat_window(rec.m, rec.center, half_width, clamp=True))


def evaluate_recordings(recs, predictor) -> tuple[EvalReport, list[tuple[str, EvalReport]]]:
    per = [(r.name, evaluate(predictor(r), r.gt.hr_bpm_trace)) for r in recs]
    return merge([p for _, p in per]), per


REPORT_COLUMNS = ["recording", "window", "pred_bpm", "ref_bpm", "mae_bpm", "rmse_bpm", "pearson_r"]


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.6f}"


def write_report(path, per_recording: list[tuple[str, EvalReport]], aggregate: EvalReport) -> None:
    """Per-window rows, one summary row per recording (``window = all``) and an ``ALL`` row."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for name, rep in per_recording:
            for i, (p, r) in enumerate(zip(rep.pred_bpm, rep.ref_bpm)):
                w.writerow([name, i, _fmt(p), _fmt(r), "", "", ""])
            w.writerow([name, "all", "", "", _fmt(rep.mae_bpm), _fmt(rep.rmse_bpm), _fmt(rep.pearson_r)])
        w.writerow(["ALL", "all", "", "", _fmt(aggregate.mae_bpm), _fmt(aggregate.rmse_bpm), _fmt(aggregate.pearson_r)])


def read_report_windows(path) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    out: dict[str, tuple[list, list]] = {}
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            if row["window"] == "all":
                continue
            p, r = out.setdefault(row["recording"], ([], []))
            p.append(float(row["pred_bpm"]))
            r.append(float(row["ref_bpm"]))
    return {k: (np.array(p), np.array(r)) for k, (p, r) in out.items()}


ABLATION_ROWS = (
    "noise_only",
    "pseudo_only",
    "noise_pseudo_stage1",
    "stage2_no_noise",
    "stage2_full",
)


def ablation_suite(
    manifest_path,
    checkpoints: dict[str, str | Path],
    out_csv=None,
    split: str = "test",
    half_width: int = 2,
    include_traditional: bool = True,
) -> list[dict]:
    """Score each configuration's heartbeat-extractor checkpoint on ``split``.

    Rows whose checkpoint is missing are skipped with a warning.
    """
    from radar_aplanc import io
    from radar_aplanc.data import load_split

    recs = load_split(manifest_path, split)
    if not recs:
        raise ArgumentError(f"no recordings in split {split!r}")
    rows = []
    if include_traditional:
        agg, _ = evaluate_recordings(recs, predict_traditional)
        rows.append(_row("traditional", agg))
    for name in ABLATION_ROWS:
        ckpt = checkpoints.get(name)
        if ckpt is None or not Path(ckpt).exists():
            log.warning("ablation row %s skipped: checkpoint %s missing", name, ckpt)
            continue
        gh = io.read_rapw(ckpt)
        agg, _ = evaluate_recordings(recs, lambda r: predict_extractor(r, gh, half_width))
        rows.append(_row(name, agg))
    if out_csv is not None:
        write_table(out_csv, rows)
    return rows


def _row(name: str, rep: EvalReport) -> dict:
    return {"config": name, "mae_bpm": rep.mae_bpm, "rmse_bpm": rep.rmse_bpm, "pearson_r": rep.pearson_r}


def write_table(path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["config", "mae_bpm", "rmse_bpm", "pearson_r"])
        for r in rows:
            w.writerow([r["config"], _fmt(r["mae_bpm"]), _fmt(r["rmse_bpm"]), _fmt(r["pearson_r"])])
