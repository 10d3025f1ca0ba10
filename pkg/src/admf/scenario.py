"""Seeded synthetic Smart-Logistics telemetry: route, vibration, anomalies,
and a network delay/loss model.

A generated dataset stands in for field recordings: a vehicle loops a
piecewise-linear waypoint route with jittered speed while per-tick IMU
RMS values are drawn from a vibration profile. Two anomaly kinds are
injected into the test span only:

  SHAKE     multiplies the accelerometer RMS draws by a fixed intensity;
  OVERTURN  blends the per-axis profile toward a 90-degree tip: the
            gravity-bearing accel axis trades places with x, and the
            magnetic field vector is rotated the same way (its z
            component changes sign), with per-event blend intensity.

Everything downstream (CSV bytes included) is a pure function of the
config, so identical seeds give identical files.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields

import numpy as np

from .edge import EdgeNode, FeatureSchema
from .fog import FinalDecision, FogGateway
from .wire import encode_packet

COLUMNS = (
    "seq",
    "timestamp_ms",
    "lat",
    "lon",
    "alt",
    "speed",
    "sats",
    "acc_rms_x",
    "acc_rms_y",
    "acc_rms_z",
    "mag_rms_x",
    "mag_rms_y",
    "mag_rms_z",
)
EVENT_COLUMNS = ("event_id", "kind", "start_seq", "end_seq")
EVENT_KINDS = ("SHAKE", "OVERTURN")

# default loop near the 45.25N 19.85E area used in examples
DEFAULT_WAYPOINTS = (
    (45.25, 19.85),
    (45.262, 19.862),
    (45.271, 19.845),
    (45.263, 19.822),
    (45.249, 19.83),
)

METERS_PER_DEG_LAT = 111320.0


@dataclass(frozen=True)
class AnomalyEvent:
    event_id: int
    kind: str
    start_seq: int
    end_seq: int  # inclusive

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if not 0 <= self.start_seq <= self.end_seq:
            raise ValueError("event interval must satisfy 0 <= start <= end")

    def __contains__(self, seq: int) -> bool:
        return self.start_seq <= seq <= self.end_seq

    @property
    def length(self) -> int:
        return self.end_seq - self.start_seq + 1


@dataclass(frozen=True)
class DelayModel:
    """Log-normal uplink delay with a hard cap, plus independent loss."""

    median_ms: float = 200.0
    sigma: float = 1.2
    cap_ms: float = 30000.0
    loss_rate: float = 0.01

    def __post_init__(self):
        if self.median_ms <= 0 or self.cap_ms <= 0 or self.sigma < 0:
            raise ValueError("delay parameters must be positive")
        if not 0.0 <= self.loss_rate < 1.0:
            raise ValueError("loss_rate must lie in [0, 1)")


def sample_delay(model: DelayModel, rng: np.random.Generator) -> float | None:
    """One per-packet delay in ms, or None when the packet is lost."""
    if rng.random() < model.loss_rate:
        return None
    tau = model.median_ms * math.exp(model.sigma * rng.standard_normal())
    return min(tau, model.cap_ms)


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    n_train_points: int = 12000
    n_test_points: int = 1600
    n_events: int = 42
    delta1_s: float = 10.0
    delta2_ms: float = 15.0
    waypoints: tuple[tuple[float, float], ...] = DEFAULT_WAYPOINTS
    speed_mean_mps: float = 13.0
    speed_jitter_mps: float = 2.0
    alt_m: float = 80.0
    alt_jitter_m: float = 2.0
    # vibration profile: per-axis accel RMS in g (z carries gravity)
    accel_rms_mean: tuple[float, float, float] = (0.08, 0.08, 1.0)
    accel_rms_sigma: tuple[float, float, float] = (0.02, 0.02, 0.03)
    # Earth-frame magnetic field in uT; x/y follow vehicle heading
    mag_field_north_ut: float = 20.0
    mag_field_east_ut: float = 2.0
    mag_field_down_ut: float = 45.0
    mag_noise_ut: float = 1.5
    # normal driving rocks the body a little; this wobble is what weak
    # overturn events must stand out against
    tilt_jitter_deg: float = 2.5
    shake_intensity: float = 8.0
    # weak tips sit inside the wobble band on purpose: the edge detector
    # alone cannot separate them, a windowed look usually can
    overturn_min_intensity: float = 0.05
    overturn_max_intensity: float = 0.15
    event_min_len: int = 4
    event_max_len: int = 12
    event_margin: int = 25
    event_gap: int = 3
    delay_median_ms: float = 200.0
    delay_sigma: float = 1.2
    delay_cap_ms: float = 30000.0
    loss_rate: float = 0.01

    def __post_init__(self):
        if self.n_train_points < 2 or self.n_test_points < 1:
            raise ValueError("dataset sizes must be positive (train >= 2)")
        if self.n_events < 0:
            raise ValueError("n_events must be nonnegative")
        if self.delta1_s <= 0 or self.delta2_ms <= 0:
            raise ValueError("sampling intervals must be positive")
        if len(self.waypoints) < 2:
            raise ValueError("route needs at least 2 waypoints")
        if not 1 <= self.event_min_len <= self.event_max_len:
            raise ValueError("event lengths must satisfy 1 <= min <= max")
        if self.shake_intensity <= 1.0:
            raise ValueError("shake intensity must exceed 1")
        if not 0.0 <= self.tilt_jitter_deg < 45.0:
            raise ValueError("tilt jitter must lie in [0, 45) degrees")
        if not 0.0 < self.overturn_min_intensity <= self.overturn_max_intensity <= 1.0:
            raise ValueError("overturn intensity range must lie in (0, 1]")
        for lat, lon in self.waypoints:
            if not (-90 <= lat <= 90 and -180 <= lon <= 180):
                raise ValueError("waypoints must be valid lat/lon coordinates")

    def delay_model(self) -> DelayModel:
        return DelayModel(
            median_ms=self.delay_median_ms,
            sigma=self.delay_sigma,
            cap_ms=self.delay_cap_ms,
            loss_rate=self.loss_rate,
        )

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ScenarioConfig":
        """Build a config from flat key=value strings (see parse_config_file)."""
        kwargs = {}
        by_name = {f.name: f for f in fields(cls)}
        for key, raw in mapping.items():
            if key not in by_name:
                raise ValueError(f"unknown config key {key!r}")
            if key == "waypoints":
                pts = []
                for chunk in raw.split(";"):
                    lat_s, lon_s = chunk.split(",")
                    pts.append((float(lat_s), float(lon_s)))
                kwargs[key] = tuple(pts)
            elif key in ("accel_rms_mean", "accel_rms_sigma"):
                vals = tuple(float(v) for v in raw.split(","))
                if len(vals) != 3:
                    raise ValueError(f"{key} needs 3 comma-separated values")
                kwargs[key] = vals
            elif isinstance(getattr(cls, key), bool):
                kwargs[key] = raw.strip().lower() in ("1", "true", "yes")
            elif isinstance(getattr(cls, key), int):
                kwargs[key] = int(raw)
            else:
                kwargs[key] = float(raw)
        return cls(**kwargs)


def parse_config_file(path) -> dict:
    """Flat key=value file: one pair per line, '#' starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


@dataclass(frozen=True)
class LabeledDataset:
    """Per-tick sensor rows (COLUMNS order) plus labeled anomaly events."""

    data: np.ndarray  # (N, len(COLUMNS))
    events: tuple[AnomalyEvent, ...] = ()

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[1] != len(COLUMNS):
            raise ValueError(f"dataset must have {len(COLUMNS)} columns")
        if not np.all(np.isfinite(data)):
            raise ValueError("dataset contains non-finite values")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        spans = sorted((e.start_seq, e.end_seq) for e in self.events)
        for (s1, e1), (s2, _) in zip(spans, spans[1:]):
            if s2 <= e1:
                raise ValueError("events must be pairwise disjoint")

    @property
    def n_points(self) -> int:
        return self.data.shape[0]

    @property
    def seqs(self) -> np.ndarray:
        return self.data[:, 0].astype(np.int64)

    @property
    def timestamps_ms(self) -> np.ndarray:
        return self.data[:, 1].astype(np.int64)

    def feature_matrix(self, schema: FeatureSchema) -> np.ndarray:
        idx = [COLUMNS.index(name) for name in schema.names]
        return self.data[:, idx]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(COLUMNS)
            for row in self.data:
                writer.writerow([int(row[0]), int(row[1])] + [repr(float(v)) for v in row[2:]])

    def write_events_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(EVENT_COLUMNS)
            for e in self.events:
                writer.writerow([e.event_id, e.kind, e.start_seq, e.end_seq])


def read_dataset_csv(path, events_path=None) -> LabeledDataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != COLUMNS:
            raise ValueError(f"unexpected dataset header {header}")
        rows = [[float(v) for v in row] for row in reader]
    events: tuple[AnomalyEvent, ...] = ()
    if events_path is not None:
        events = tuple(read_events_csv(events_path))
    return LabeledDataset(data=np.array(rows, dtype=np.float64), events=events)


def read_events_csv(path) -> list[AnomalyEvent]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            out.append(
                AnomalyEvent(
                    event_id=int(row["event_id"]),
                    kind=row["kind"],
                    start_seq=int(row["start_seq"]),
                    end_seq=int(row["end_seq"]),
                )
            )
    return out


def _local_xy(waypoints) -> tuple[np.ndarray, float, float, float]:
    """Project waypoints to local meters (equirectangular, loop closed)."""
    lat0 = float(np.mean([w[0] for w in waypoints]))
    m_lon = METERS_PER_DEG_LAT * math.cos(math.radians(lat0))
    pts = np.array([(w[1] * m_lon, w[0] * METERS_PER_DEG_LAT) for w in waypoints])
    pts = np.vstack([pts, pts[0]])  # close the loop
    return pts, lat0, m_lon, METERS_PER_DEG_LAT


def _place_events(cfg: ScenarioConfig, rng: np.random.Generator) -> tuple[AnomalyEvent, ...]:
    """Disjoint event intervals inside the test span, gap-separated."""
    if cfg.n_events == 0:
        return ()
    lengths = rng.integers(cfg.event_min_len, cfg.event_max_len + 1, size=cfg.n_events)
    usable = cfg.n_test_points - 2 * cfg.event_margin
    slack = usable - int(lengths.sum()) - cfg.event_gap * (cfg.n_events - 1)
    if slack < 0:
        raise ValueError(
            f"{cfg.n_events} events of length up to {cfg.event_max_len} do not fit "
            f"in {cfg.n_test_points} test points"
        )
    offsets = np.sort(rng.integers(0, slack + 1, size=cfg.n_events))
    events = []
    cursor = cfg.event_margin
    for i, (length, off) in enumerate(zip(lengths, offsets)):
        start = cursor + int(off) + i * cfg.event_gap + int(lengths[:i].sum())
        kind = EVENT_KINDS[int(rng.integers(0, len(EVENT_KINDS)))]
        events.append(AnomalyEvent(event_id=i, kind=kind, start_seq=start, end_seq=start + int(length) - 1))
    return tuple(events)


def _generate_split(
    cfg: ScenarioConfig, n_points: int, events: tuple[AnomalyEvent, ...], rng: np.random.Generator
) -> LabeledDataset:
    pts, _, m_lon, m_lat = _local_xy(cfg.waypoints)
    seg_vec = np.diff(pts, axis=0)
    seg_len = np.hypot(seg_vec[:, 0], seg_vec[:, 1])
    if not np.all(seg_len > 0):
        raise ValueError("route waypoints must be pairwise distinct")
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = cum[-1]

    speeds = np.clip(
        rng.normal(cfg.speed_mean_mps, cfg.speed_jitter_mps, size=n_points),
        1.0,
        None,
    )
    dist = np.concatenate([[0.0], np.cumsum(speeds * cfg.delta1_s)])[:-1] % total
    seg_idx = np.minimum(np.searchsorted(cum, dist, side="right") - 1, len(seg_len) - 1)
    frac = (dist - cum[seg_idx]) / seg_len[seg_idx]
    xy = pts[seg_idx] + seg_vec[seg_idx] * frac[:, None]
    heading = seg_vec[seg_idx] / seg_len[seg_idx, None]  # unit (east, north)

    lat = xy[:, 1] / m_lat
    lon = xy[:, 0] / m_lon
    alt = cfg.alt_m + rng.normal(0.0, cfg.alt_jitter_m, size=n_points)
    sats = rng.integers(7, 14, size=n_points).astype(np.float64)

    # per-tick channel targets, then body wobble, then event edits, then
    # jittered draws
    accel_mean = np.tile(np.asarray(cfg.accel_rms_mean), (n_points, 1))
    east, north = heading[:, 0], heading[:, 1]
    mag_mean = np.column_stack(
        [
            cfg.mag_field_east_ut * east + cfg.mag_field_north_ut * north,
            -cfg.mag_field_east_ut * north + cfg.mag_field_north_ut * east,
            np.full(n_points, cfg.mag_field_down_ut),
        ]
    )

    # body wobble rotates the static field with the chassis; the
    # road-texture accel RMS barely notices a few degrees of tilt
    tilt_rad = math.radians(cfg.tilt_jitter_deg)
    pitch = rng.normal(0.0, tilt_rad, size=n_points)
    roll = rng.normal(0.0, tilt_rad, size=n_points)
    sp, cp = np.sin(pitch), np.cos(pitch)
    sr, cr = np.sin(roll), np.cos(roll)
    mx, my, mz = mag_mean.T.copy()
    mx, mz = mx * cp - mz * sp, mx * sp + mz * cp
    my, mz = my * cr - mz * sr, my * sr + mz * cr
    mag_mean = np.column_stack([mx, my, mz])

    for ev in events:
        span = slice(ev.start_seq, ev.end_seq + 1)
        if ev.kind == "SHAKE":
            accel_mean[span] *= cfg.shake_intensity
        else:
            lam = rng.uniform(cfg.overturn_min_intensity, cfg.overturn_max_intensity)
            a = accel_mean[span]
            accel_mean[span] = (1 - lam) * a + lam * a[:, [2, 1, 0]]
            m = mag_mean[span]
            tipped = np.column_stack([-m[:, 2], m[:, 1], m[:, 0]])
            mag_mean[span] = (1 - lam) * m + lam * tipped

    accel_rms = np.abs(rng.normal(accel_mean, np.asarray(cfg.accel_rms_sigma)))
    mag_noise = rng.normal(0.0, cfg.mag_noise_ut, size=(n_points, 3))
    mag_rms = np.sqrt(mag_mean * mag_mean + mag_noise * mag_noise)

    seqs = np.arange(n_points, dtype=np.float64)
    timestamps = seqs * (cfg.delta1_s * 1000.0)
    data = np.column_stack(
        [seqs, timestamps, lat, lon, alt, speeds, sats, accel_rms, mag_rms]
    )
    return LabeledDataset(data=data, events=events)


def generate(cfg: ScenarioConfig) -> tuple[LabeledDataset, LabeledDataset]:
    """(train, test): train is event-free; test carries the labeled events."""
    master = np.random.default_rng(cfg.seed)
    train_rng, test_rng, event_rng = master.spawn(3)
    train = _generate_split(cfg, cfg.n_train_points, (), train_rng)
    events = _place_events(cfg, event_rng)
    test = _generate_split(cfg, cfg.n_test_points, events, test_rng)
    return train, test


@dataclass
class ReplayResult:
    decisions: list[FinalDecision]
    emitted: int
    received: int
    lost: int
    # seqs the edge tier flagged anomalous, over all emitted packets
    # (edge decisions happen on-device, before any loss)
    edge_flags: set[int]

    @property
    def final_flags(self) -> set[int]:
        return {d.seq for d in self.decisions if d.is_anomaly}

    @property
    def offload_fraction(self) -> float:
        if not self.decisions:
            return 0.0
        return sum(1 for d in self.decisions if d.source == "FOG") / len(self.decisions)

    def mean_response_delay_ms(self) -> float:
        if not self.decisions:
            return 0.0
        return sum(d.response_delay_ms for d in self.decisions) / len(self.decisions)


def replay(
    test: LabeledDataset,
    node: EdgeNode,
    gateway: FogGateway,
    delay: DelayModel,
    schema: FeatureSchema,
    seed: int = 0,
) -> ReplayResult:
    """Drive edge ticks over the test stream in simulated time.

    Each packet is encoded to wire bytes, delayed or dropped by the delay
    model, and delivered to the gateway in arrival order (ties broken by
    emission order, so constant delay preserves FIFO).
    """
    rng = np.random.default_rng(seed)
    feats = test.feature_matrix(schema)
    stamps = test.timestamps_ms
    deliveries = []
    edge_flags: set[int] = set()
    lost = 0
    for i in range(test.n_points):
        packet = node.tick_point(feats[i], int(stamps[i]))
        if packet.edge_is_anomaly:
            edge_flags.add(packet.seq)
        tau = sample_delay(delay, rng)
        if tau is None:
            lost += 1
            continue
        deliveries.append((float(stamps[i]) + tau, i, encode_packet(packet)))
    deliveries.sort(key=lambda d: (d[0], d[1]))
    decisions = []
    for arrival_ms, _, blob in deliveries:
        decision = gateway.ingest_datagram(blob, arrival_ms)
        if decision is not None:
            decisions.append(decision)
    return ReplayResult(
        decisions=decisions,
        emitted=test.n_points,
        received=len(deliveries),
        lost=lost,
        edge_flags=edge_flags,
    )
