"""Unsupervised radar heartbeat sensing with noise-contrastive pseudo-label training."""

from radar_aplanc.errors import (
    ArgumentError,
    ConfigError,
    DataError,
    FormatError,
    TrainingError,
)

__all__ = [
    "ArgumentError",
    "ConfigError",
    "DataError",
    "FormatError",
    "TrainingError",
]

__version__ = "0.1.0"
