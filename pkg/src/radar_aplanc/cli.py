"""Command-line entry point: simulate, traditional, train, eval, plot.

Exit codes: 0 success, 2 usage or configuration, 3 I/O or file format,
4 numeric failure during training.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from radar_aplanc import io
from radar_aplanc.config import apply_kv, load_train_config, read_kv
from radar_aplanc.errors import ArgumentError, ConfigError, DataError, FormatError, TrainingError

log = logging.getLogger("radar_aplanc")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4
THREADS_ENV = "RADAR_APLANC_THREADS"

# corpus-level keys accepted by `simulate --config` next to SceneConfig fields
CORPUS_KEYS = {
    "corpus_seed": int,
    "snr_min_db": float,
    "snr_max_db": float,
    "val_fraction": float,
    "test_fraction": float,
}


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _thread_cap() -> int | None:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return None
    try:
        n = int(raw)
    except ValueError:
        raise CliError(f"{THREADS_ENV} must be a positive integer, got {raw!r}", EXIT_USAGE) from None
    if n < 1:
        raise CliError(f"{THREADS_ENV} must be a positive integer, got {raw!r}", EXIT_USAGE)
    return n


# ---------------------------------------------------------------- simulate


def _split_labels(count: int, val_fraction: float, test_fraction: float) -> list[str]:
    n_test = int(round(test_fraction * count))
    n_val = int(round(val_fraction * count))
    n_train = max(count - n_val - n_test, 0)
    return (["train"] * n_train + ["val"] * n_val + ["test"] * n_test)[:count]


def cmd_simulate(args) -> int:
    from radar_aplanc.sim import SceneConfig, make_corpus, random_scene

    kv = read_kv(args.config) if args.config else {}
    corpus = {"corpus_seed": 0, "val_fraction": 0.1, "test_fraction": 0.2}
    for key, conv in CORPUS_KEYS.items():
        if key in kv:
            try:
                corpus[key] = conv(kv.pop(key))
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}", field=key) from exc
    base = apply_kv(SceneConfig(), kv)
    base.validate()
    if args.count < 0:
        raise ConfigError("--count must be >= 0", field="count")
    lo = corpus.get("snr_min_db", base.snr_db)
    hi = corpus.get("snr_max_db", base.snr_db)
    if not lo <= hi:
        raise ConfigError("snr_min_db must not exceed snr_max_db", field="snr_min_db")
    if args.count == 0:
        log.warning("--count 0: writing an empty manifest")
    rng = np.random.default_rng(corpus["corpus_seed"])
    cfgs = []
    for i in range(args.count):
        snr = float(rng.uniform(lo, hi)) if hi > lo else float(lo)
        cfgs.append(random_scene(rng, base, snr, corpus["corpus_seed"] * 100_000 + i))
    splits = _split_labels(args.count, corpus["val_fraction"], corpus["test_fraction"])
    entries = make_corpus(cfgs, args.out, splits)
    print(f"wrote {len(entries)} recordings and {Path(args.out) / 'manifest.txt'}")
    return EXIT_OK


# ---------------------------------------------------------------- evaluation helpers


def _load_split_tolerant(manifest: Path, split: str):
    """Load a split, skipping recordings that cannot be read."""
    from radar_aplanc.data import load_recording

    entries = [e for e in io.read_manifest(manifest) if e.split == split]
    if not entries:
        raise CliError(f"no recordings in split {split!r} of {manifest}", EXIT_IO)
    recs = []
    for e in entries:
        try:
            rec = load_recording(manifest, e)
        except (OSError, FormatError, DataError) as exc:
            log.warning("skipping %s: %s", e.path, exc)
            continue
        if rec.gt is None:
            log.warning("skipping %s: no ground-truth file", e.path)
            continue
        recs.append(rec)
    if not recs:
        raise CliError(f"all {len(entries)} recordings in split {split!r} were skipped", EXIT_IO)
    return recs


def waveform_path(report: Path) -> Path:
    return report.with_name(report.stem + ".waveforms.npz")


def _run_eval(recs, predictor, report: Path) -> None:
    from radar_aplanc.dsp import bandpass, traditional_heartbeat
    from radar_aplanc.eval import evaluate, merge, write_report

    per, arrays = [], {}
    for rec in recs:
        pred = predictor(rec)
        per.append((rec.name, evaluate(pred, rec.gt.hr_bpm_trace)))
        arrays[f"{rec.name}/pred"] = pred.samples
        arrays[f"{rec.name}/traditional"] = traditional_heartbeat(rec.m, rec.center).samples
        arrays[f"{rec.name}/truth"] = bandpass(rec.gt.displacement_m).samples
        arrays[f"{rec.name}/rate_hz"] = np.array(pred.rate_hz)
    agg = merge([p for _, p in per])
    report.parent.mkdir(parents=True, exist_ok=True)
    write_report(report, per, agg)
    np.savez(waveform_path(report), **arrays)
    r = "nan" if math.isnan(agg.pearson_r) else f"{agg.pearson_r:.3f}"
    print(f"{len(per)} recordings: MAE {agg.mae_bpm:.3f} bpm, RMSE {agg.rmse_bpm:.3f} bpm, r {r}")


def cmd_traditional(args) -> int:
    from radar_aplanc.eval import predict_traditional

    recs = _load_split_tolerant(Path(args.manifest), args.split)
    _run_eval(recs, predict_traditional, Path(args.report))
    return EXIT_OK


def cmd_eval(args) -> int:
    from radar_aplanc.eval import predict_extractor

    ckpt = Path(args.ckpt)
    if not ckpt.exists():
        raise CliError(f"checkpoint not found: {ckpt}", EXIT_IO)
    gh = io.read_rapw(ckpt)
    half_width = (gh.in_channels // 2 - 1) // 2
    recs = _load_split_tolerant(Path(args.manifest), args.split)
    _run_eval(recs, lambda r: predict_extractor(r, gh, half_width), Path(args.report))
    return EXIT_OK


# ---------------------------------------------------------------- train


def checkpoint_paths(ckpt_dir: Path, stage: int) -> tuple[Path, Path]:
    return ckpt_dir / f"stage{stage}_gh.rapw", ckpt_dir / f"stage{stage}_gn.rapw"


def cmd_train(args) -> int:
    from radar_aplanc.training import train_stage

    overrides = {"stage": args.stage}
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if args.seed is not None:
        overrides["seed"] = args.seed
    cfg = load_train_config(args.config, **overrides)
    checkpoints = None
    if cfg.stage == 2:
        if args.init_from is None:
            raise ConfigError("stage 2 requires --init-from pointing at stage-1 checkpoints", field="init_from")
        src = Path(args.init_from)
        gh_path, gn_path = checkpoint_paths(src, 1) if src.is_dir() else (src, src.with_name(src.name.replace("_gh", "_gn")))
        for p in (gh_path, gn_path):
            if not p.exists():
                raise ConfigError(f"stage-1 checkpoint missing: {p}", field="init_from")
        checkpoints = (io.read_rapw(gh_path), io.read_rapw(gn_path))
    ckpt_dir = Path(args.ckpt_dir)
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    metrics = ckpt_dir / f"stage{cfg.stage}_metrics.csv"
    res = train_stage(args.manifest, cfg, checkpoints, metrics)
    gh_out, gn_out = checkpoint_paths(ckpt_dir, cfg.stage)
    io.write_rapw(gh_out, res.gh)
    io.write_rapw(gn_out, res.gn)
    vm = res.val_mae[res.best_epoch - 1] if res.val_mae else math.nan
    print(f"stage {cfg.stage}: best epoch {res.best_epoch} (val MAE {vm:.3f} bpm) -> {gh_out}, {gn_out}")
    if res.skipped_steps:
        print(f"{res.skipped_steps} steps skipped on non-finite values")
    return EXIT_OK


# ---------------------------------------------------------------- plot


def cmd_plot(args) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    from radar_aplanc.eval import read_report_windows

    report = Path(args.report)
    if not report.exists():
        raise CliError(f"report not found: {report}", EXIT_IO)
    try:
        windows = read_report_windows(report)
    except (KeyError, ValueError) as exc:
        raise CliError(f"{report}: not an evaluation report ({exc})", EXIT_IO) from exc
    if not windows:
        raise CliError(f"{report}: no per-window rows", EXIT_IO)
    wf_path = waveform_path(report)
    waves = np.load(wf_path) if wf_path.exists() else None
    names = list(windows)[: args.max_recordings]

    fig, axes = plt.subplots(len(names) + 1, 1, figsize=(9, 2.2 * (len(names) + 1)), squeeze=False)
    ax = axes[0, 0]
    for name, (pred, ref) in windows.items():
        ax.scatter(ref, pred, s=12, label=name)
    lim = [min(min(r.min(), p.min()) for p, r in windows.values()) - 5,
           max(max(r.max(), p.max()) for p, r in windows.values()) + 5]
    ax.plot(lim, lim, "k--", lw=0.8)
    ax.set_xlabel("reference HR (bpm)")
    ax.set_ylabel("predicted HR (bpm)")
    if len(windows) <= 10:
        ax.legend(fontsize=7, ncol=2)
    for row, name in enumerate(names, start=1):
        ax = axes[row, 0]
        if waves is None or f"{name}/pred" not in waves:
            ax.text(0.5, 0.5, f"{name}: no waveforms", ha="center", transform=ax.transAxes)
            continue
        rate = float(waves[f"{name}/rate_hz"])
        n = min(len(waves[f"{name}/pred"]), int(args.seconds * rate))
        t = np.arange(n) / rate
        for key, style in (("truth", "k-"), ("traditional", "C1-"), ("pred", "C0-")):
            y = waves[f"{name}/{key}"][:n]
            scale = np.max(np.abs(y)) or 1.0
            ax.plot(t, y / scale, style, lw=0.9, label=key)
        ax.set_title(name, fontsize=8)
        ax.set_xlabel("time (s)")
        ax.legend(fontsize=7, loc="upper right")
    fig.tight_layout()
    out = Path(args.out_svg)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, format="svg")
    plt.close(fig)
    print(f"wrote {out}")
    return EXIT_OK


# ---------------------------------------------------------------- wiring


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="radar-aplanc", description="Unsupervised radar heartbeat extraction.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a synthetic corpus and manifest")
    s.add_argument("--config", help="key = value scene configuration")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--count", type=int, default=10)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("traditional", help="score the training-free baseline")
    s.add_argument("--manifest", required=True)
    s.add_argument("--report", required=True)
    s.add_argument("--split", default="test", choices=io.SPLITS)
    s.set_defaults(func=cmd_traditional)

    s = sub.add_parser("train", help="run one training stage")
    s.add_argument("--manifest", required=True)
    s.add_argument("--stage", type=int, choices=(1, 2), required=True)
    s.add_argument("--config", help="key = value training configuration")
    s.add_argument("--ckpt-dir", required=True)
    s.add_argument("--init-from", help="stage-1 checkpoint directory (or *_gh.rapw file) for stage 2")
    s.add_argument("--epochs", type=int, help="override the configured epoch count")
    s.add_argument("--seed", type=int, help="override the configured seed")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="score a heartbeat-extractor checkpoint")
    s.add_argument("--manifest", required=True)
    s.add_argument("--ckpt", required=True)
    s.add_argument("--report", required=True)
    s.add_argument("--split", default="test", choices=io.SPLITS)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("plot", help="SVG of HR scatter and waveform overlays from a report")
    s.add_argument("--report", required=True)
    s.add_argument("--out-svg", required=True)
    s.add_argument("--seconds", type=float, default=10.0, help="waveform span to draw")
    s.add_argument("--max-recordings", type=int, default=3)
    s.set_defaults(func=cmd_plot)
    return p


def _dispatch(args) -> int:
    cap = _thread_cap()
    if cap is None:
        return args.func(args)
    from threadpoolctl import threadpool_limits

    with threadpool_limits(limits=cap):
        return args.func(args)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _dispatch(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigError, ArgumentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (TrainingError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
