"""Fog gateway: per-device sliding windows and confidence-gated revision.

The gateway trusts confident edge decisions as-is. A low-confidence
decision (confidence strictly below c_th) is re-evaluated by a deeper
windowed detector over the last L points received from that device,
once enough points have arrived. Datagram transport means loss,
duplication, and reordering are handled here, not by retransmission.
"""

from __future__ import annotations

import bisect
import csv
from dataclasses import dataclass, field

import numpy as np

from .detector import DEFAULT_CONFIDENCE_THRESHOLD, Detector
from .edge import DataPoint
from .wire import TelemetryPacket, WireFormatError, decode_packet

DEFAULT_WINDOW_LEN = 10
DEFAULT_REORDER_TOLERANCE = 3


def build_fog_training_set(points: np.ndarray, window_len: int) -> np.ndarray:
    """All length-L sliding windows over ordered rows, concatenated per row.

    N input rows of f features become N-L+1 rows of L*f features.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("points must be a matrix, one row per tick")
    if window_len < 1:
        raise ValueError("window length must be positive")
    n, f = points.shape
    if n < window_len:
        raise ValueError(f"need at least {window_len} points, got {n}")
    out = np.empty((n - window_len + 1, window_len * f))
    for i in range(out.shape[0]):
        out[i] = points[i : i + window_len].ravel()
    return out


@dataclass
class DeviceWindow:
    """Last L points for one device, ordered by seq, duplicates discarded."""

    device_id: int
    capacity: int
    points: list[DataPoint] = field(default_factory=list)
    highest_seq_seen: int = -1

    def __post_init__(self):
        if self.capacity < 2:
            raise ValueError("window capacity must be at least 2")

    def insert(self, point: DataPoint, reorder_tolerance: int) -> bool:
        """Insert keeping seq order; returns False for duplicates/too-old."""
        if point.seq < self.highest_seq_seen - reorder_tolerance:
            return False
        seqs = [p.seq for p in self.points]
        pos = bisect.bisect_left(seqs, point.seq)
        if pos < len(seqs) and seqs[pos] == point.seq:
            return False
        self.points.insert(pos, point)
        if len(self.points) > self.capacity:
            self.points.pop(0)
        self.highest_seq_seen = max(self.highest_seq_seen, point.seq)
        return True

    @property
    def full(self) -> bool:
        return len(self.points) == self.capacity

    @property
    def has_gap(self) -> bool:
        """True when the buffered seqs are not contiguous."""
        if len(self.points) < 2:
            return False
        return self.points[-1].seq - self.points[0].seq != len(self.points) - 1


def concatenate_window(window: DeviceWindow) -> np.ndarray:
    """Oldest-first concatenation of a full window's raw features."""
    if not window.full:
        raise ValueError(
            f"window holds {len(window.points)} of {window.capacity} points"
        )
    return np.concatenate([p.features for p in window.points])


@dataclass(frozen=True)
class FinalDecision:
    device_id: int
    seq: int
    source: str  # "EDGE" or "FOG"
    is_anomaly: bool
    confidence: float
    response_delay_ms: float
    window_not_ready: bool = False
    window_gap: bool = False


class FogGateway:
    """Ingests packets for many devices and emits one FinalDecision each."""

    def __init__(
        self,
        fog_detector: Detector,
        window_len: int = DEFAULT_WINDOW_LEN,
        confidence_threshold: float = DEFAULT_CONFIDENCE_THRESHOLD,
        reorder_tolerance: int = DEFAULT_REORDER_TOLERANCE,
    ):
        if not 2 <= window_len <= 20:
            raise ValueError("window length must lie in [2, 20]")
        if not 0.5 <= confidence_threshold <= 1.0:
            raise ValueError("confidence threshold must lie in [0.5, 1.0]")
        if reorder_tolerance < 0:
            raise ValueError("reorder tolerance must be nonnegative")
        if fog_detector.input_dim % window_len != 0:
            raise ValueError(
                f"fog detector input dim {fog_detector.input_dim} is not a "
                f"multiple of window length {window_len}"
            )
        self.fog_detector = fog_detector
        self.window_len = window_len
        self.confidence_threshold = confidence_threshold
        self.reorder_tolerance = reorder_tolerance
        self.windows: dict[int, DeviceWindow] = {}
        self.malformed_count = 0

    def _window_for(self, device_id: int) -> DeviceWindow:
        w = self.windows.get(device_id)
        if w is None:
            w = DeviceWindow(device_id=device_id, capacity=self.window_len)
            self.windows[device_id] = w
        return w

    def ingest(self, packet: TelemetryPacket, arrival_ms: float) -> FinalDecision:
        """Window the packet, then decide: passthrough, revise, or fall back."""
        window = self._window_for(packet.device_id)
        point = DataPoint(
            seq=packet.seq,
            t_emit_ms=packet.timestamp_ms,
            features=np.array(packet.features),
            stale_gnss=packet.stale_gnss,
        )
        window.insert(point, self.reorder_tolerance)

        if packet.edge_confidence >= self.confidence_threshold:
            return FinalDecision(
                device_id=packet.device_id,
                seq=packet.seq,
                source="EDGE",
                is_anomaly=packet.edge_is_anomaly,
                confidence=packet.edge_confidence,
                response_delay_ms=0.0,
            )
        if window.full:
            det = self.fog_detector.detect(concatenate_window(window))
            return FinalDecision(
                device_id=packet.device_id,
                seq=packet.seq,
                source="FOG",
                is_anomaly=det.is_anomaly,
                confidence=det.confidence,
                response_delay_ms=float(arrival_ms) - float(packet.timestamp_ms),
                window_gap=window.has_gap,
            )
        return FinalDecision(
            device_id=packet.device_id,
            seq=packet.seq,
            source="EDGE",
            is_anomaly=packet.edge_is_anomaly,
            confidence=packet.edge_confidence,
            response_delay_ms=0.0,
            window_not_ready=True,
        )

    def ingest_datagram(self, blob: bytes, arrival_ms: float) -> FinalDecision | None:
        """Decode and ingest; malformed datagrams are counted and dropped."""
        try:
            packet = decode_packet(blob)
        except WireFormatError:
            self.malformed_count += 1
            return None
        return self.ingest(packet, arrival_ms)


DECISION_LOG_COLUMNS = ("device_id", "seq", "source", "is_anomaly", "confidence", "response_delay_ms")


def write_decision_log(decisions, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DECISION_LOG_COLUMNS)
        for d in decisions:
            writer.writerow(
                [d.device_id, d.seq, d.source, int(d.is_anomaly), repr(d.confidence), repr(d.response_delay_ms)]
            )


def read_decision_log(path) -> list[FinalDecision]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            out.append(
                FinalDecision(
                    device_id=int(row["device_id"]),
                    seq=int(row["seq"]),
                    source=row["source"],
                    is_anomaly=bool(int(row["is_anomaly"])),
                    confidence=float(row["confidence"]),
                    response_delay_ms=float(row["response_delay_ms"]),
                )
            )
    return out
