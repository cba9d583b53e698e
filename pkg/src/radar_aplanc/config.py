"""Plain-text ``key = value`` configuration files and the training configuration."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

from radar_aplanc.errors import ConfigError


@dataclass
class TrainConfig:
    epochs: int = 200
    learning_rate: float = 1e-4
    weight_decay: float = 0.01
    K: int = 4
    delta_d: int = 2
    sub_len_s: float = 10.0
    psd_df_hz: float = 0.05
    seed: int = 0
    deterministic: bool = True
    stage: int = 1
    use_pseudo: bool = True
    use_noise: bool = True
    # literal variants: noise window only avoids the centre bin / raw PSD power
    strict_noise_window: bool = False
    normalize_psd: bool = True
    # stage two: start trainable extractors from the stage-one weights instead of random
    stage2_continue: bool = False
    hidden: int = 16
    n_layers: int = 3
    kernel: int = 15
    max_consecutive_skips: int = 50

    def validate(self) -> None:
        for name in ("epochs", "K", "hidden", "kernel", "max_consecutive_skips"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1", field=name)
        if self.kernel % 2 == 0:
            raise ConfigError("kernel must be odd", field="kernel")
        for name in ("sub_len_s", "psd_df_hz"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive", field=name)
        for name in ("learning_rate", "weight_decay"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ConfigError(f"{name} must be finite and >= 0", field=name)
        if self.delta_d < 0:
            raise ConfigError("delta_d must be >= 0", field="delta_d")
        if self.n_layers < 0:
            raise ConfigError("n_layers must be >= 0", field="n_layers")
        if self.stage not in (1, 2):
            raise ConfigError(f"stage must be 1 or 2, got {self.stage}", field="stage")
        if not (self.use_pseudo or self.use_noise):
            raise ConfigError("at least one of use_pseudo / use_noise must be on", field="use_pseudo")

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)


def parse_kv(text: str, source: str = "<config>") -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        out[key] = value
    return out


def read_kv(path) -> dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    return parse_kv(text, str(path))


def _parse_bool(v: str) -> bool:
    s = v.lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _parse_float(v: str) -> float:
    return float(v)


def _coerce(field: dataclasses.Field, value: str):
    t = field.type if isinstance(field.type, str) else getattr(field.type, "__name__", str(field.type))
    if t == "bool":
        return _parse_bool(value)
    if t == "int":
        return int(value)
    if t == "float":
        return _parse_float(value)
    if t == "int | None":
        return None if value.lower() in ("", "none") else int(value)
    if t.startswith("list[tuple"):
        # "0.9:0.3, 1.1:0.2" -> [(0.9, 0.3), (1.1, 0.2)]
        pairs = [p.strip() for p in value.split(",") if p.strip()]
        return [tuple(float(x) for x in p.split(":")) for p in pairs]
    return value


def apply_kv(obj, kv: dict[str, str], strict: bool = True):
    """Return a copy of dataclass ``obj`` with matching keys from ``kv`` applied."""
    fields = {f.name: f for f in dataclasses.fields(obj)}
    changes = {}
    for key, value in kv.items():
        if key not in fields:
            if strict:
                raise ConfigError(f"unknown config key {key!r}", field=key)
            continue
        try:
            changes[key] = _coerce(fields[key], value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}", field=key) from exc
    return dataclasses.replace(obj, **changes)


def load_train_config(path=None, **overrides) -> TrainConfig:
    cfg = TrainConfig()
    if path is not None:
        cfg = apply_kv(cfg, read_kv(path))
    cfg = cfg.replace(**overrides)
    cfg.validate()
    return cfg
