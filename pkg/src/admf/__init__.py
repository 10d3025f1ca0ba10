"""Hierarchical autoencoder anomaly detection for cellular IoT telemetry.

Lightweight per-point detectors run at simulated edge devices; a fog
gateway re-evaluates low-confidence decisions with a deeper detector over
a sliding window of recent points. The package also ships training from
scratch (Adam, Glorot, early stopping), a compact binary model format, a
datagram wire protocol, classical baselines, a seeded Smart-Logistics
data generator with a network delay model, and an event-level evaluation
harness.
"""

from .autoencoder import (
    ArchitectureSpec,
    AutoencoderModel,
    DimensionError,
    Normalizer,
    PROFILES,
    build_architecture,
    forward,
    reconstruction_error,
)
from .detector import (
    DEFAULT_CONFIDENCE_THRESHOLD,
    Detection,
    Detector,
    calibrate,
    detect,
    should_offload,
    stable_sigmoid,
)
from .training import (
    AdamState,
    TrainConfig,
    TrainingDivergedError,
    TrainingHistory,
    adam_step,
    fit,
    fit_normalizer,
    glorot_init,
    gradient,
    loss,
)

__version__ = "0.1.0"

__all__ = [
    "ArchitectureSpec",
    "AutoencoderModel",
    "DimensionError",
    "Normalizer",
    "PROFILES",
    "build_architecture",
    "forward",
    "reconstruction_error",
    "DEFAULT_CONFIDENCE_THRESHOLD",
    "Detection",
    "Detector",
    "calibrate",
    "detect",
    "should_offload",
    "stable_sigmoid",
    "AdamState",
    "TrainConfig",
    "TrainingDivergedError",
    "TrainingHistory",
    "adam_step",
    "fit",
    "fit_normalizer",
    "glorot_init",
    "gradient",
    "loss",
    "__version__",
]
