"""Simulated edge device: RMS aggregation, per-point detection, packet emission.

An edge node is a tick-driven state machine. Every low-rate interval it
aggregates the high-rate IMU window to RMS, assembles the feature vector
for its schema, runs the point detector, and emits one telemetry packet.
It keeps no raw-sample history beyond the current window.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from .detector import Detector
from .wire import STALE_GNSS_FLAG, TelemetryPacket, quantize_confidence

# Full per-tick sensor column set, in dataset order.
S1_FIELDS = ("lat", "lon", "alt", "speed", "sats")
RMS_FIELDS = ("acc_rms_x", "acc_rms_y", "acc_rms_z", "mag_rms_x", "mag_rms_y", "mag_rms_z")
ALL_FEATURE_NAMES = S1_FIELDS + RMS_FIELDS

GPS_FEATURES = ("lat", "lon") + RMS_FIELDS
NO_GPS_FEATURES = RMS_FIELDS


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered subset of sensor fields fed to a detector.

    Edge, fog, and evaluation must share one schema per experiment.
    """

    names: tuple[str, ...]

    def __post_init__(self):
        unknown = [n for n in self.names if n not in ALL_FEATURE_NAMES]
        if unknown:
            raise ValueError(f"unknown feature names {unknown}")
        if len(set(self.names)) != len(self.names):
            raise ValueError("feature names must be unique")
        if not self.names:
            raise ValueError("schema must name at least one feature")

    @classmethod
    def for_variant(cls, variant: str) -> "FeatureSchema":
        key = variant.strip().lower().replace("_", "-")
        if key == "gps":
            return cls(names=GPS_FEATURES)
        if key == "no-gps":
            return cls(names=NO_GPS_FEATURES)
        raise ValueError(f"unknown schema variant {variant!r}, expected 'gps' or 'no-gps'")

    @property
    def gps_enabled(self) -> bool:
        return "lat" in self.names or "lon" in self.names

    @property
    def n_features(self) -> int:
        return len(self.names)

    def variant_name(self) -> str:
        return "gps" if self.gps_enabled else "no-gps"


@dataclass(frozen=True)
class SensorFrame:
    """One tick of raw input: a low-rate fix plus the high-rate IMU window.

    s1 is (lat, lon, alt, speed, sats) or None when the GNSS fix is missing.
    accel/mag are (M, 3) sample arrays collected during the last interval.
    """

    s1: tuple[float, float, float, float, float] | None
    accel: np.ndarray
    mag: np.ndarray


@dataclass(frozen=True)
class DataPoint:
    seq: int
    t_emit_ms: int
    features: np.ndarray
    stale_gnss: bool = False

    def __post_init__(self):
        if self.seq < 0:
            raise ValueError("seq must be nonnegative")
        feats = np.asarray(self.features, dtype=np.float64)
        if not np.all(np.isfinite(feats)):
            raise ValueError("data point features must be finite")
        feats.flags.writeable = False
        object.__setattr__(self, "features", feats)


def rms_aggregate(samples: np.ndarray) -> np.ndarray:
    """Per-channel root mean square over an (M, channels) window."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[:, None]
    if samples.shape[0] == 0:
        raise ValueError("cannot aggregate an empty sample window")
    return np.sqrt(np.mean(samples * samples, axis=0))


def assemble_data_point(
    frame: SensorFrame,
    schema: FeatureSchema,
    seq: int,
    t_emit_ms: int,
    last_s1: tuple | None = None,
) -> DataPoint:
    """Build the schema-ordered feature vector for one frame.

    A missing GNSS fix falls back to `last_s1` and marks the point stale;
    with no fallback available either, this raises.
    """
    s1 = frame.s1
    stale = False
    if s1 is None:
        if last_s1 is None:
            raise ValueError("no GNSS fix available and no last-known value to substitute")
        s1 = last_s1
        stale = True
    values = dict(zip(S1_FIELDS, s1))
    acc = rms_aggregate(frame.accel)
    mag = rms_aggregate(frame.mag)
    if acc.shape != (3,) or mag.shape != (3,):
        raise ValueError("accel and mag windows must have 3 channels")
    values.update(zip(RMS_FIELDS, np.concatenate([acc, mag])))
    feats = np.array([values[name] for name in schema.names])
    return DataPoint(seq=seq, t_emit_ms=t_emit_ms, features=feats, stale_gnss=stale)


@dataclass
class EdgeNode:
    """One device: detector, schema, gapless seq counter, last-known fix."""

    device_id: int
    schema: FeatureSchema
    detector: Detector
    next_seq: int = 0
    last_s1: tuple | None = None
    _latency_ns: list[int] = field(default_factory=list)

    def __post_init__(self):
        if self.detector.input_dim != self.schema.n_features:
            raise ValueError(
                f"detector expects {self.detector.input_dim} features, "
                f"schema provides {self.schema.n_features}"
            )

    def _emit(self, point: DataPoint) -> TelemetryPacket:
        t0 = time.perf_counter_ns()
        det = self.detector.detect(point.features)
        self._latency_ns.append(time.perf_counter_ns() - t0)
        return TelemetryPacket(
            device_id=self.device_id,
            seq=point.seq,
            timestamp_ms=point.t_emit_ms,
            features=tuple(point.features),
            edge_is_anomaly=det.is_anomaly,
            edge_confidence=quantize_confidence(det.confidence),
            flags=STALE_GNSS_FLAG if point.stale_gnss else 0,
        )

    def tick_frame(self, frame: SensorFrame, t_emit_ms: int) -> TelemetryPacket:
        """Full tick path: aggregate, assemble, detect, emit."""
        t0 = time.perf_counter_ns()
        point = assemble_data_point(frame, self.schema, self.next_seq, t_emit_ms, self.last_s1)
        self._latency_ns.append(time.perf_counter_ns() - t0)
        if frame.s1 is not None:
            self.last_s1 = frame.s1
        self.next_seq += 1
        return self._emit(point)

    def tick_point(self, features: np.ndarray, t_emit_ms: int, stale_gnss: bool = False) -> TelemetryPacket:
        """Replay path: features already aggregated into schema order."""
        point = DataPoint(
            seq=self.next_seq, t_emit_ms=t_emit_ms, features=features, stale_gnss=stale_gnss
        )
        self.next_seq += 1
        return self._emit(point)

    def median_latency_ms(self) -> float:
        """Median assemble+detect latency over all ticks so far."""
        if not self._latency_ns:
            raise ValueError("no ticks recorded yet")
        return statistics.median(self._latency_ns) / 1e6
