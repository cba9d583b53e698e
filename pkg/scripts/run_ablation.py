"""Desk-scale ablation study: five training configurations against the baseline.

Builds the 30-recording synthetic corpus (10 high-SNR, 20 low-SNR), trains
every configuration for each seed and writes one CSV row per (seed, config)
plus a median-over-seeds summary.

    python scripts/run_ablation.py --out runs/ablation --seeds 0 1 2 --epochs 30
"""

from __future__ import annotations

import argparse
import logging
from pathlib import Path

import numpy as np

from radar_aplanc.config import TrainConfig
from radar_aplanc.experiments import run_study, study_corpus, write_rows


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("runs/ablation"))
    ap.add_argument("--corpus-seed", type=int, default=0)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--lr", type=float, default=1e-3)
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")

    corpus = args.out / "corpus"
    manifest = corpus / "manifest.txt"
    if not manifest.exists():
        study_corpus(corpus, seed=args.corpus_seed)

    all_rows = []
    for seed in args.seeds:
        res = run_study(manifest, args.out / f"seed{seed}", TrainConfig(epochs=args.epochs, learning_rate=args.lr, seed=seed))
        write_rows(args.out / f"seed{seed}" / "ablation.csv", res.rows, {"seed": seed})
        all_rows += [dict(r, seed=seed) for r in res.rows]
        print(f"seed {seed} ({res.runtime_s:.0f} s)")
        for r in res.rows:
            print(f"  {r['config']:<22} MAE {r['mae_bpm']:6.2f}  RMSE {r['rmse_bpm']:6.2f}  r {r['pearson_r']:6.3f}")

    configs = list(dict.fromkeys(r["config"] for r in all_rows))
    summary = [
        {k: float(np.median([r[k] for r in all_rows if r["config"] == c])) for k in ("mae_bpm", "rmse_bpm", "pearson_r")}
        | {"config": c}
        for c in configs
    ]
    write_rows(args.out / "ablation_median.csv", summary, {"seeds": " ".join(map(str, args.seeds))})
    print(f"median over seeds {args.seeds}:")
    for r in summary:
        print(f"  {r['config']:<22} MAE {r['mae_bpm']:6.2f}  RMSE {r['rmse_bpm']:6.2f}  r {r['pearson_r']:6.3f}")


if __name__ == "__main__":
    main()
