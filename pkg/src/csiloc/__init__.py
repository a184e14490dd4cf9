"""csiloc: single-model CSI fingerprint indoor localization.

A supervised autoencoder models a whole radio environment; location is
estimated by enumerating candidate one-hot labels at the bottleneck and
ranking their reconstruction errors.
"""

__version__ = "0.1.0"

from .data import (FingerprintDataset, NormalizationRecord, SamplePoint,
                   load_dataset, normalize_dataset, validate_dataset,
                   write_dataset)
from .channel import EnvironmentSpec, channel_response, generate_dataset, sample_packet
from .model import SaeModel, init_model, load_model, save_model
from .training import TrainConfig, TrainReport, train
from .localize import LocalizationResult, localize
from .evaluate import EvalSummary, FoldResult, loocv

__all__ = [
    "__version__",
    "FingerprintDataset", "NormalizationRecord", "SamplePoint",
    "load_dataset", "normalize_dataset", "validate_dataset", "write_dataset",
    "EnvironmentSpec", "channel_response", "generate_dataset", "sample_packet",
    "SaeModel", "init_model", "load_model", "save_model",
    "TrainConfig", "TrainReport", "train",
    "LocalizationResult", "localize",
    "EvalSummary", "FoldResult", "loocv",
]
