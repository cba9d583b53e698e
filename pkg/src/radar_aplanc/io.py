"""Binary containers (RAPM range matrices, RAGT ground truth, RAPW checkpoints) and corpus manifests.

All binary formats are little-endian. Readers validate magic, version and
lengths and raise :class:`FormatError` carrying the byte offset of the problem.
"""

from __future__ import annotations

import math
import struct
import warnings
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from radar_aplanc.errors import FormatError

RAPM_MAGIC = b"RAPM"
RAGT_MAGIC = b"RAGT"
RAPW_MAGIC = b"RAPW"
VERSION = 1
SPLITS = ("train", "val", "test")

_RAPM_HEADER = struct.Struct("<4sIQQdd")
_RAGT_HEADER = struct.Struct("<4sIQ")
_RAPW_HEADER = struct.Struct("<4sIII")
_ACTIVATION_CODES = {"tanh": 0, "identity": 1}


def _read_bytes(path) -> bytes:
    return Path(path).read_bytes()


def _check_magic(buf: bytes, magic: bytes):
    if len(buf) < 4:
        raise FormatError("missing magic", 0)
    if buf[:4] != magic:
        raise FormatError(f"bad magic {buf[:4]!r}, expected {magic!r}", 0)
    if len(buf) < 8:
        raise FormatError("truncated header: missing version", len(buf))
    (version,) = struct.unpack_from("<I", buf, 4)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", 4)


def write_rapm(path, m) -> None:
    data = np.asarray(m.data)
    n, d = data.shape
    payload = np.empty((n, d, 2), dtype="<f4")
    payload[..., 0] = data.real
    payload[..., 1] = data.imag
    with open(path, "wb") as f:
        f.write(_RAPM_HEADER.pack(RAPM_MAGIC, VERSION, n, d, float(m.chirp_rate_hz), float(m.range_res_m)))
        f.write(payload.tobytes())


def read_rapm(path):
    from radar_aplanc.rangeproc import RangeMatrix

    buf = _read_bytes(path)
    _check_magic(buf, RAPM_MAGIC)
    if len(buf) < _RAPM_HEADER.size:
        raise FormatError("truncated RAPM header", len(buf))
    _, _, n, d, rate, res = _RAPM_HEADER.unpack_from(buf)
    expected = _RAPM_HEADER.size + 8 * n * d
    if len(buf) < expected:
        raise FormatError(f"truncated payload: expected {expected} bytes, got {len(buf)}", len(buf))
    if len(buf) > expected:
        raise FormatError(f"{len(buf) - expected} trailing bytes after payload", expected)
    raw = np.frombuffer(buf, dtype="<f4", offset=_RAPM_HEADER.size).reshape(n, d, 2)
    data = raw[..., 0].astype(np.float64) + 1j * raw[..., 1].astype(np.float64)
    return RangeMatrix(data, rate, res)


def write_ragt(path, gt) -> None:
    disp = np.asarray(gt.displacement_m.samples, dtype="<f4")
    hr = np.asarray(gt.hr_bpm_trace.samples, dtype="<f4")
    if disp.shape != hr.shape:
        raise ValueError("displacement and heart-rate traces differ in length")
    with open(path, "wb") as f:
        f.write(_RAGT_HEADER.pack(RAGT_MAGIC, VERSION, disp.size))
        f.write(disp.tobytes())
        f.write(hr.tobytes())
        f.write(struct.pack("<d", float(gt.mean_hr_bpm)))


def read_ragt(path, rate_hz: float = 1.0):
    """Read ground truth; the container has no rate, so pass the recording's chirp rate."""
    from radar_aplanc.dsp import TimeSeries
    from radar_aplanc.sim import GroundTruth

    buf = _read_bytes(path)
    _check_magic(buf, RAGT_MAGIC)
    if len(buf) < _RAGT_HEADER.size:
        raise FormatError("truncated RAGT header", len(buf))
    _, _, n = _RAGT_HEADER.unpack_from(buf)
    expected = _RAGT_HEADER.size + 8 * n + 8
    if len(buf) != expected:
        raise FormatError(f"RAGT length {len(buf)} != expected {expected}", min(len(buf), expected))
    off = _RAGT_HEADER.size
    disp = np.frombuffer(buf, dtype="<f4", count=n, offset=off).astype(np.float64)
    hr = np.frombuffer(buf, dtype="<f4", count=n, offset=off + 4 * n).astype(np.float64)
    (mean_hr,) = struct.unpack_from("<d", buf, off + 8 * n)
    return GroundTruth(TimeSeries(disp, rate_hz), TimeSeries(hr, rate_hz), mean_hr)


def write_rapw(path, params) -> None:
    """Checkpoint: header, then per layer ``c_out, c_in, kernel`` (u32), then f64 weights and biases."""
    with open(path, "wb") as f:
        f.write(
            _RAPW_HEADER.pack(RAPW_MAGIC, VERSION, len(params.weights), _ACTIVATION_CODES[params.activation])
        )
        for w in params.weights:
            f.write(struct.pack("<3I", *w.shape))
        for w, b in zip(params.weights, params.biases):
            f.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def read_rapw(path):
    from radar_aplanc.model import ExtractorParams

    buf = _read_bytes(path)
    _check_magic(buf, RAPW_MAGIC)
    if len(buf) < _RAPW_HEADER.size:
        raise FormatError("truncated RAPW header", len(buf))
    _, _, n_layers, act = _RAPW_HEADER.unpack_from(buf)
    codes = {v: k for k, v in _ACTIVATION_CODES.items()}
    if act not in codes:
        raise FormatError(f"unknown activation code {act}", 12)
    if n_layers == 0 or n_layers > 64:
        raise FormatError(f"implausible layer count {n_layers}", 8)
    off = _RAPW_HEADER.size
    if len(buf) < off + 12 * n_layers:
        raise FormatError("truncated layer shape table", len(buf))
    shapes = [struct.unpack_from("<3I", buf, off + 12 * i) for i in range(n_layers)]
    off += 12 * n_layers
    expected = off + 8 * sum(a * b * c + a for a, b, c in shapes)
    if len(buf) != expected:
        raise FormatError(f"RAPW length {len(buf)} != expected {expected}", min(len(buf), expected))
    weights, biases = [], []
    for shape in shapes:
        count = shape[0] * shape[1] * shape[2]
        weights.append(np.frombuffer(buf, "<f8", count, off).astype(np.float64).reshape(shape))
        off += 8 * count
        biases.append(np.frombuffer(buf, "<f8", shape[0], off).astype(np.float64))
        off += 8 * shape[0]
    try:
        return ExtractorParams(weights, biases, codes[act])
    except ValueError as exc:
        raise FormatError(f"inconsistent layer shapes: {exc}", _RAPW_HEADER.size) from exc


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    seed: int
    mean_hr_bpm: float
    snr_db: float
    split: str = "train"

    @property
    def ragt_path(self) -> str:
        return str(Path(self.path).with_suffix(".ragt"))


_MANIFEST_HEADER = "# path\tseed\tmean_hr_bpm\tsnr_db\tsplit"


def _fmt_float(x: float) -> str:
    return "inf" if x == math.inf else repr(float(x))


def write_manifest(path, entries) -> None:
    lines = [_MANIFEST_HEADER]
    for e in entries:
        if e.split not in SPLITS:
            raise ValueError(f"unknown split {e.split!r}")
        lines.append(f"{e.path}\t{e.seed}\t{_fmt_float(e.mean_hr_bpm)}\t{_fmt_float(e.snr_db)}\t{e.split}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path) -> list[ManifestEntry]:
    entries = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 5:
            raise FormatError(f"manifest line {lineno}: expected 5 tab-separated columns, got {len(cols)}")
        p, seed, hr, snr, split = cols
        if split not in SPLITS:
            raise FormatError(f"manifest line {lineno}: unknown split token {split!r}")
        try:
            entries.append(ManifestEntry(p, int(seed), float(hr), float(snr), split))
        except ValueError as exc:
            raise FormatError(f"manifest line {lineno}: {exc}") from exc
    dups = [p for p, c in Counter(e.path for e in entries).items() if c > 1]
    if dups:
        warnings.warn(f"manifest {path} lists duplicate paths: {', '.join(dups)}", stacklevel=2)
    return entries


def resolve(manifest_path, entry: ManifestEntry) -> Path:
    p = Path(entry.path)
    return p if p.is_absolute() else Path(manifest_path).parent / p
