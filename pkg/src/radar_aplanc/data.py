from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from radar_aplanc import io
from radar_aplanc.dsp import MIN_HR_DURATION_S
from radar_aplanc.errors import DataError
from radar_aplanc.rangeproc import RangeMatrix, select_center_bin
from radar_aplanc.sim import GroundTruth


@dataclass
class Recording:
    name: str
    m: RangeMatrix
    gt: GroundTruth | None
    center: int
    entry: io.ManifestEntry | None = None


def load_recording(manifest_path, entry: io.ManifestEntry, with_gt: bool = True) -> Recording:
    path = io.resolve(manifest_path, entry)
    m = io.read_rapm(path)
    if m.n_chirps / m.chirp_rate_hz < MIN_HR_DURATION_S - 1e-9:
        raise DataError(f"{path}: recording shorter than {MIN_HR_DURATION_S} s")
    gt = None
    if with_gt:
        gt_path = path.with_suffix(".ragt")
        if gt_path.exists():
            gt = io.read_ragt(gt_path, m.chirp_rate_hz)
    return Recording(Path(entry.path).stem, m, gt, select_center_bin(m), entry)


def load_split(manifest_path, split: str | None) -> list[Recording]:
    entries = io.read_manifest(manifest_path)
    return [load_recording(manifest_path, e) for e in entries if split is None or e.split == split]
