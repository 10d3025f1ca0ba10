"""Event scoring, aggregate metrics, and the two-tier experiment driver."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from admf.evaluation import (
    ConfusionCounts,
    ExperimentConfig,
    precision_recall_f1,
    run_experiment,
    score_events,
    score_points,
    write_plot_data,
)
from admf.scenario import AnomalyEvent, ScenarioConfig
from admf.training import TrainConfig


def ev(start, end, kind="SHAKE", event_id=0):
    return AnomalyEvent(event_id=event_id, kind=kind, start_seq=start, end_seq=end)


class TestScoreEvents:
    def test_reference_example(self):
        # one event [10, 20]; flags at 12 hit it, the 35-36 run is one FP
        counts = score_events([ev(10, 20)], {12, 35, 36})
        assert (counts.tp, counts.fp, counts.fn) == (1, 1, 0)

    def test_missed_event(self):
        counts = score_events([ev(10, 20), ev(40, 50)], {45})
        assert (counts.tp, counts.fp, counts.fn) == (1, 0, 1)

    def test_run_touching_event_not_fp(self):
        # run 18..22 overlaps the event, so it is credit not alarm
        counts = score_events([ev(10, 20)], {18, 19, 20, 21, 22})
        assert (counts.tp, counts.fp, counts.fn) == (1, 0, 0)

    def test_sustained_false_alarm_counts_once(self):
        counts = score_events([ev(100, 110)], set(range(0, 50)))
        assert (counts.tp, counts.fp, counts.fn) == (0, 1, 1)

    def test_separate_runs_count_separately(self):
        counts = score_events([], {1, 2, 5, 6, 9})
        assert counts.fp == 3

    def test_no_flags(self):
        counts = score_events([ev(0, 4)], set())
        assert (counts.tp, counts.fp, counts.fn) == (0, 0, 1)

    def test_one_run_spanning_two_events(self):
        counts = score_events([ev(10, 12), ev(16, 18)], set(range(10, 19)))
        assert (counts.tp, counts.fp, counts.fn) == (2, 0, 0)

    def test_overlapping_events_rejected(self):
        with pytest.raises(ValueError):
            score_events([ev(0, 5), ev(5, 9, event_id=1)], set())

    @given(
        flags=st.sets(st.integers(0, 200), max_size=80),
        extra_dup=st.booleans(),
    )
    @settings(max_examples=60, deadline=None)
    def test_duplicate_and_order_invariance(self, flags, extra_dup):
        events = [ev(20, 30), ev(60, 70, event_id=1)]
        as_list = list(flags) + (list(flags)[:3] if extra_dup else [])
        a = score_events(events, flags)
        b = score_events(list(reversed(events)), as_list)
        assert a == b

    @given(flags=st.sets(st.integers(0, 120), max_size=60))
    @settings(max_examples=60, deadline=None)
    def test_counts_bounded(self, flags):
        events = [ev(10, 20), ev(50, 55, event_id=1)]
        c = score_events(events, flags)
        assert 0 <= c.tp <= len(events)
        assert c.tp + c.fn == len(events)
        assert c.fp <= max(1, len(flags))


class TestScorePoints:
    def test_basic_counts(self):
        c = score_points([ev(2, 4)], {3, 4, 9}, n_points=12)
        assert (c.tp, c.fp, c.fn) == (2, 1, 1)

    def test_out_of_range_flags_ignored(self):
        c = score_points([ev(0, 1)], {0, 1, 500, -3}, n_points=10)
        assert (c.tp, c.fp, c.fn) == (2, 0, 0)


class TestPrecisionRecallF1:
    def test_reference_rows(self):
        # agreement windows: fixed (P, R) pairs and their harmonic means
        for p, r, want in (
            (0.681, 0.764, 0.720),
            (0.821, 0.8205, 0.8208),
            (0.8255, 0.8462, 0.8357),
        ):
            f1 = 2 * p * r / (p + r)
            assert abs(f1 - want) <= 0.001

    def test_from_counts(self):
        p, r, f1 = precision_recall_f1(ConfusionCounts(tp=8, fp=2, fn=2))
        assert p == pytest.approx(0.8)
        assert r == pytest.approx(0.8)
        assert f1 == pytest.approx(0.8)

    def test_zero_over_zero_is_zero(self):
        assert precision_recall_f1(ConfusionCounts(0, 0, 0)) == (0.0, 0.0, 0.0)
        assert precision_recall_f1(ConfusionCounts(0, 0, 5)) == (0.0, 0.0, 0.0)
        assert precision_recall_f1(ConfusionCounts(0, 5, 0)) == (0.0, 0.0, 0.0)

    @given(tp=st.integers(0, 50), fp=st.integers(0, 50), fn=st.integers(0, 50))
    @settings(max_examples=100)
    def test_f1_between_min_and_max_of_p_r(self, tp, fp, fn):
        p, r, f1 = precision_recall_f1(ConfusionCounts(tp, fp, fn))
        assert 0.0 <= f1 <= 1.0
        assert min(p, r) - 1e-12 <= f1 <= max(p, r) + 1e-12

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError):
            ConfusionCounts(-1, 0, 0)


SMALL_EXPERIMENT = ExperimentConfig(
    scenario=ScenarioConfig(seed=4, n_train_points=400, n_test_points=300, n_events=4),
    window_len=4,
    ensemble=1,
    train=TrainConfig(epochs=8, rng_seed=3),
)


class TestExperiment:
    def test_single_member_runs_and_reports(self, tmp_path):
        report = run_experiment(SMALL_EXPERIMENT)
        assert len(report.members) == 1
        rows = report.rows()
        assert [r["model"] for r in rows] == ["ae-edge", "ae-fog"]
        for row in rows:
            assert 0.0 <= row["f1_mean"] <= 1.0
            assert row["f1_sigma"] == 0.0  # single member
            assert row["ensemble"] == 1
        out = tmp_path / "report.csv"
        report.write_csv(out)
        header = out.read_text().splitlines()[0]
        assert header.startswith("model,profile,L,variant,ensemble,p_mean")

    def test_members_get_distinct_seeds(self):
        exp = ExperimentConfig(
            scenario=ScenarioConfig(seed=4, n_train_points=400, n_test_points=300, n_events=4),
            window_len=4,
            ensemble=2,
            train=TrainConfig(epochs=5, rng_seed=10),
        )
        report = run_experiment(exp)
        assert [m.seed for m in report.members] == [10, 11]

    def test_ensemble_must_be_positive(self):
        with pytest.raises(ValueError):
            ExperimentConfig(ensemble=0)

    def test_plot_data_format(self, tmp_path):
        out = tmp_path / "curve.csv"
        write_plot_data(out, [(2, 0.5, 0.01), (10, np.float64(0.75), np.float64(0.0))])
        lines = out.read_text().splitlines()
        assert lines[0] == "L,f1_mean,f1_sigma"
        assert lines[2] == "10,0.75,0.0"
