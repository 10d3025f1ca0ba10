"""Anomaly decisions from reconstruction error.

A detector is a trained autoencoder plus a threshold e, the maximum
reconstruction error seen on its own training data. A point is anomalous
iff its error exceeds e. Confidence maps the error margin through a
sigmoid and is always reported for the side of the decision actually
taken, so it lives in [0.5, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autoencoder import AutoencoderModel, reconstruction_error

DEFAULT_CONFIDENCE_THRESHOLD = 0.75

# largest double strictly below 1.0; keeps reported confidence half-open
_MAX_CONFIDENCE = math.nextafter(1.0, 0.0)


def stable_sigmoid(z: float) -> float:
    """Logistic function without overflow for large |z|."""
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def point_error(model: AutoencoderModel, raw_v: np.ndarray) -> float:
    """Reconstruction error of one raw feature vector (normalized internally)."""
    raw_v = np.asarray(raw_v, dtype=np.float64)
    return reconstruction_error(model, model.normalizer.apply(raw_v))


def calibrate(model: AutoencoderModel, train_data: np.ndarray) -> float:
    """Threshold e: max reconstruction error over the training rows.

    Uses the identical per-row code path as `detect`, so re-scoring any
    calibration row can never exceed e.
    """
    train_data = np.asarray(train_data, dtype=np.float64)
    if train_data.ndim != 2 or train_data.shape[0] == 0:
        raise ValueError("calibration data must be a nonempty matrix")
    e = -math.inf
    for row in train_data:
        e = max(e, point_error(model, row))
    return e


@dataclass(frozen=True)
class Detection:
    is_anomaly: bool
    confidence: float  # in [0.5, 1), for the decision taken
    err: float


def detect(model: AutoencoderModel, threshold: float, raw_v: np.ndarray) -> Detection:
    """Classify one raw feature vector against a calibrated threshold."""
    err = point_error(model, raw_v)
    c_anom = stable_sigmoid(err - threshold)
    if err > threshold:
        return Detection(is_anomaly=True, confidence=min(c_anom, _MAX_CONFIDENCE), err=err)
    return Detection(is_anomaly=False, confidence=min(1.0 - c_anom, _MAX_CONFIDENCE), err=err)


def should_offload(detection: Detection, confidence_threshold: float = DEFAULT_CONFIDENCE_THRESHOLD) -> bool:
    """An edge decision is escalated iff its confidence falls below the gate."""
    if not (0.5 <= confidence_threshold <= 1.0):
        raise ValueError("confidence threshold must lie in [0.5, 1.0]")
    return detection.confidence < confidence_threshold


@dataclass(frozen=True)
class Detector:
    """Calibrated detector: model plus its training-set error ceiling."""

    model: AutoencoderModel
    threshold: float

    def __post_init__(self):
        if not math.isfinite(self.threshold):
            raise ValueError("threshold must be finite")

    @classmethod
    def from_training(cls, model: AutoencoderModel, train_data: np.ndarray) -> "Detector":
        return cls(model=model, threshold=calibrate(model, train_data))

    def detect(self, raw_v: np.ndarray) -> Detection:
        return detect(self.model, self.threshold, raw_v)

    @property
    def input_dim(self) -> int:
        return self.model.input_dim
