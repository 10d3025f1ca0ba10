"""Event-level scoring, precision/recall/F1, and the two-tier experiment.

Scoring is against labeled anomaly intervals: an event counts as detected
when at least one of its ticks is flagged, and a false positive is one
maximal contiguous run of flagged ticks touching no event (so a single
sustained false alarm counts once). Point-level counts are also computed
for diagnostics.
"""

from __future__ import annotations

import csv
import statistics
from dataclasses import dataclass, field

import numpy as np

from .autoencoder import build_architecture
from .detector import DEFAULT_CONFIDENCE_THRESHOLD, Detector
from .edge import EdgeNode, FeatureSchema
from .fog import DEFAULT_REORDER_TOLERANCE, FogGateway, build_fog_training_set
from .scenario import AnomalyEvent, LabeledDataset, ReplayResult, ScenarioConfig, generate, replay
from .training import TrainConfig, fit


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn) < 0:
            raise ValueError("counts must be nonnegative")


def _flag_runs(flagged) -> list[tuple[int, int]]:
    """Maximal contiguous [start, end] runs of flagged seqs."""
    seqs = sorted(set(flagged))
    runs = []
    for s in seqs:
        if runs and s == runs[-1][1] + 1:
            runs[-1][1] = s
        else:
            runs.append([s, s])
    return [(a, b) for a, b in runs]


def score_events(events, flagged) -> ConfusionCounts:
    """Count event hits and out-of-event alarm runs.

    TP: events containing at least one flagged seq. FN: the rest.
    FP: maximal contiguous flagged runs overlapping no event.
    """
    events = list(events)
    spans = sorted((e.start_seq, e.end_seq) for e in events)
    for (_, e1), (s2, _) in zip(spans, spans[1:]):
        if s2 <= e1:
            raise ValueError("events must be disjoint")
    flag_set = set(flagged)
    tp = sum(1 for e in events if any(s in flag_set for s in range(e.start_seq, e.end_seq + 1)))
    fp = 0
    for a, b in _flag_runs(flag_set):
        if not any(s <= b and a <= e for s, e in spans):
            fp += 1
    return ConfusionCounts(tp=tp, fp=fp, fn=len(events) - tp)


def score_points(events, flagged, n_points: int) -> ConfusionCounts:
    """Per-tick diagnostic counts over seqs 0..n_points-1."""
    flag_set = {s for s in flagged if 0 <= s < n_points}
    event_seqs = set()
    for e in events:
        event_seqs.update(range(e.start_seq, e.end_seq + 1))
    tp = len(flag_set & event_seqs)
    return ConfusionCounts(tp=tp, fp=len(flag_set - event_seqs), fn=len(event_seqs - flag_set))


def f1_from_pr(p: float, r: float) -> float:
    """Harmonic mean of precision and recall, 0 when both are 0."""
    return 2 * p * r / (p + r) if p + r else 0.0


def precision_recall_f1(c: ConfusionCounts) -> tuple[float, float, float]:
    """(P, R, F1) with every 0/0 defined as 0."""
    p = c.tp / (c.tp + c.fp) if c.tp + c.fp else 0.0
    r = c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0
    return p, r, f1_from_pr(p, r)


@dataclass(frozen=True)
class ExperimentConfig:
    """One two-tier experiment: scenario, schemas, architectures, ensemble."""

    scenario: ScenarioConfig = ScenarioConfig()
    schema_variant: str = "gps"
    edge_profile: str = "HL1"
    fog_profile: str = "HL5"
    window_len: int = 10
    confidence_threshold: float = DEFAULT_CONFIDENCE_THRESHOLD
    reorder_tolerance: int = DEFAULT_REORDER_TOLERANCE
    ensemble: int = 20
    train: TrainConfig = TrainConfig()

    def __post_init__(self):
        if self.ensemble < 1:
            raise ValueError("ensemble size must be at least 1")


@dataclass(frozen=True)
class MemberResult:
    """Metrics of one ensemble member (one training seed, one replay)."""

    seed: int
    edge_events: ConfusionCounts
    fog_events: ConfusionCounts
    edge_points: ConfusionCounts
    fog_points: ConfusionCounts
    offload_fraction: float
    mean_response_delay_ms: float

    @property
    def edge_prf(self):
        return precision_recall_f1(self.edge_events)

    @property
    def fog_prf(self):
        return precision_recall_f1(self.fog_events)


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    members: list[MemberResult] = field(default_factory=list)

    def _tier_stats(self, tier: str):
        prfs = [m.edge_prf if tier == "edge" else m.fog_prf for m in self.members]
        cols = list(zip(*prfs))
        means = [statistics.fmean(c) for c in cols]
        sigmas = [float(np.std(c)) for c in cols]
        return means, sigmas

    def mean_f1(self, tier: str) -> float:
        return self._tier_stats(tier)[0][2]

    def rows(self) -> list[dict]:
        out = []
        cfg = self.config
        for tier, profile, window in (
            ("edge", cfg.edge_profile, ""),
            ("fog", cfg.fog_profile, cfg.window_len),
        ):
            means, sigmas = self._tier_stats(tier)
            pts = [m.edge_points if tier == "edge" else m.fog_points for m in self.members]
            point_f1 = statistics.fmean(precision_recall_f1(c)[2] for c in pts)
            out.append(
                {
                    "model": f"ae-{tier}",
                    "profile": profile,
                    "L": window,
                    "variant": cfg.schema_variant,
                    "ensemble": len(self.members),
                    "p_mean": means[0],
                    "p_sigma": sigmas[0],
                    "r_mean": means[1],
                    "r_sigma": sigmas[1],
                    "f1_mean": means[2],
                    "f1_sigma": sigmas[2],
                    "point_f1_mean": point_f1,
                    "offload_fraction_mean": statistics.fmean(
                        m.offload_fraction for m in self.members
                    )
                    if tier == "fog"
                    else 0.0,
                    "mean_response_delay_ms": statistics.fmean(
                        m.mean_response_delay_ms for m in self.members
                    )
                    if tier == "fog"
                    else 0.0,
                }
            )
        return out

    def write_csv(self, path) -> None:
        rows = self.rows()
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(rows[0].keys())
            for row in rows:
                writer.writerow([v if isinstance(v, (str, int)) else repr(v) for v in row.values()])


def train_detector(rows: np.ndarray, profile: str, train_cfg: TrainConfig) -> Detector:
    """Train on normal rows and calibrate the max-error threshold."""
    spec = build_architecture(rows.shape[1], profile)
    model, _ = fit(rows, spec, train_cfg)
    return Detector.from_training(model, rows)


def run_member(
    exp: ExperimentConfig,
    member_seed: int,
    train_ds: LabeledDataset,
    test_ds: LabeledDataset,
) -> tuple[MemberResult, ReplayResult]:
    """Train one edge/fog detector pair and replay the test stream."""
    schema = FeatureSchema.for_variant(exp.schema_variant)
    train_rows = train_ds.feature_matrix(schema)
    train_cfg = TrainConfig(
        epochs=exp.train.epochs,
        batch_size=exp.train.batch_size,
        learning_rate=exp.train.learning_rate,
        beta1=exp.train.beta1,
        beta2=exp.train.beta2,
        epsilon=exp.train.epsilon,
        early_stop_patience=exp.train.early_stop_patience,
        rng_seed=member_seed,
    )
    edge_det = train_detector(train_rows, exp.edge_profile, train_cfg)
    fog_rows = build_fog_training_set(train_rows, exp.window_len)
    fog_det = train_detector(fog_rows, exp.fog_profile, train_cfg)

    node = EdgeNode(device_id=0, schema=schema, detector=edge_det)
    gateway = FogGateway(
        fog_det,
        window_len=exp.window_len,
        confidence_threshold=exp.confidence_threshold,
        reorder_tolerance=exp.reorder_tolerance,
    )
    result = replay(
        test_ds,
        node,
        gateway,
        exp.scenario.delay_model(),
        schema,
        seed=member_seed,
    )
    events = test_ds.events
    n = test_ds.n_points
    member = MemberResult(
        seed=member_seed,
        edge_events=score_events(events, result.edge_flags),
        fog_events=score_events(events, result.final_flags),
        edge_points=score_points(events, result.edge_flags, n),
        fog_points=score_points(events, result.final_flags, n),
        offload_fraction=result.offload_fraction,
        mean_response_delay_ms=result.mean_response_delay_ms(),
    )
    return member, result


def run_experiment(exp: ExperimentConfig) -> ExperimentReport:
    """Generate data once, then train/replay/score each ensemble member."""
    train_ds, test_ds = generate(exp.scenario)
    report = ExperimentReport(config=exp)
    for i in range(exp.ensemble):
        member, _ = run_member(exp, exp.train.rng_seed + i, train_ds, test_ds)
        report.members.append(member)
    return report


def write_plot_data(path, rows) -> None:
    """F1-vs-L curve data: rows of (L, f1_mean, f1_sigma)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["L", "f1_mean", "f1_sigma"])
        for window_len, f1_mean, f1_sigma in rows:
            writer.writerow([window_len, repr(float(f1_mean)), repr(float(f1_sigma))])
