"""Command-line entry point for the full pipeline.

Subcommands: generate, train, export, serve-fog, run-edge, replay,
evaluate, report. Every batch command is deterministic given its seeds:
rerunning with identical inputs produces byte-identical outputs. The
socket commands (serve-fog, run-edge, replay --mode socket) stamp wall
clock arrival times, so their delay columns vary run to run.

ADMF_LOG={error|info|debug} controls stderr verbosity.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import socket
import sys
import threading
import time
from pathlib import Path

import numpy as np

from . import evaluation, fog, model_format, scenario
from .autoencoder import PROFILES, build_architecture
from .baselines import BASELINE_KINDS, DEFAULT_CONTAMINATION, baseline_scores, fit_baseline
from .detector import DEFAULT_CONFIDENCE_THRESHOLD, Detector
from .edge import EdgeNode, FeatureSchema
from .fog import DECISION_LOG_COLUMNS, FogGateway, build_fog_training_set
from .training import TrainConfig, fit
from .wire import DEFAULT_PORT, encode_packet

log = logging.getLogger("admf")


class CliError(Exception):
    """User-facing failure: printed as a diagnostic, exit code 1."""


def _configure_logging() -> None:
    level = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(
        os.environ.get("ADMF_LOG", "error").lower(), logging.ERROR
    )
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def _load_scenario(args) -> scenario.ScenarioConfig:
    mapping = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise CliError(f"config file not found: {path}")
        mapping = scenario.parse_config_file(path)
    try:
        cfg = scenario.ScenarioConfig.from_mapping(mapping)
    except ValueError as exc:
        raise CliError(f"bad config: {exc}") from exc
    if args.seed is not None:
        cfg = scenario.ScenarioConfig.from_mapping({**mapping, "seed": str(args.seed)})
    return cfg


def _schema(args) -> FeatureSchema:
    return FeatureSchema.for_variant(args.schema)


def _profile(name: str) -> str:
    prof = name.upper()
    if prof not in PROFILES:
        raise CliError(f"unknown profile {name!r}, expected one of {PROFILES}")
    return prof


def _read_training_rows(path, schema: FeatureSchema) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise CliError(f"training CSV not found: {path}")
    ds = scenario.read_dataset_csv(path)
    return ds.feature_matrix(schema)


def _load_detector(path) -> model_format.DecodedModel:
    path = Path(path)
    if not path.exists():
        raise CliError(f"model file not found: {path}")
    try:
        return model_format.load_model(path)
    except model_format.ModelFormatError as exc:
        raise CliError(f"cannot load {path}: {exc}") from exc


def cmd_generate(args) -> int:
    cfg = _load_scenario(args)
    train_ds, test_ds = scenario.generate(cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train_ds.write_csv(out / "train.csv")
    test_ds.write_csv(out / "test.csv")
    test_ds.write_events_csv(out / "events.csv")
    print(
        f"generated {train_ds.n_points} train rows, {test_ds.n_points} test rows, "
        f"{len(test_ds.events)} events -> {out}"
    )
    return 0


def _train_config(args, seed: int) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        early_stop_patience=args.patience,
        rng_seed=seed,
    )


def cmd_train(args) -> int:
    if args.role == "fog" and args.window_len is None:
        raise CliError("--role fog requires --L")
    if args.role == "edge" and args.window_len is not None:
        raise CliError("--role edge does not take --L")
    schema = _schema(args)
    rows = _read_training_rows(args.train_csv, schema)
    if args.role == "fog":
        rows = build_fog_training_set(rows, args.window_len)
    profile = _profile(args.profile or ("hl1" if args.role == "edge" else "hl5"))
    spec = build_architecture(rows.shape[1], profile)
    cfg = _train_config(args, args.seed if args.seed is not None else 0)
    log.info("training %s %s on %d rows of %d features", args.role, profile, *rows.shape)
    model, history = fit(rows, spec, cfg)
    detector = Detector.from_training(model, rows)
    model_format.save_model(detector, args.out, args.precision)
    if args.history:
        history.write_csv(args.history)
    size = model_format.footprint(spec, args.precision)
    print(
        f"trained {args.role} {profile} ({spec.input_dim} features): "
        f"final loss {history.final_loss:.6g} after {len(history.epochs)} epochs"
        f"{' (early stop)' if history.early_stopped else ''}, "
        f"threshold e {detector.threshold:.6g}, footprint {size} bytes -> {args.out}"
    )
    return 0


def cmd_export(args) -> int:
    decoded = _load_detector(args.model)
    model_format.save_model(decoded.detector, args.out, args.precision)
    spec = decoded.detector.model.spec
    print(
        f"re-exported {args.model} ({decoded.precision}) as {args.precision}: "
        f"{model_format.footprint(spec, args.precision)} bytes -> {args.out}"
    )
    return 0


def _print_metrics(events, result_flags, decisions) -> None:
    counts = evaluation.score_events(events, result_flags)
    p, r, f1 = evaluation.precision_recall_f1(counts)
    total = len(decisions)
    offload = sum(1 for d in decisions if d.source == "FOG") / total if total else 0.0
    delay = sum(d.response_delay_ms for d in decisions) / total if total else 0.0
    print(f"events: tp={counts.tp} fp={counts.fp} fn={counts.fn}")
    print(f"precision {p:.4f}  recall {r:.4f}  f1 {f1:.4f}")
    print(f"offload fraction {offload:.4f}  mean response delay {delay:.1f} ms")


def cmd_replay(args) -> int:
    edge_dec = _load_detector(args.edge_model)
    fog_dec = _load_detector(args.fog_model)
    schema = _schema(args)
    test_path = Path(args.test_csv)
    events_path = Path(args.events_csv)
    if not test_path.exists():
        raise CliError(f"test CSV not found: {test_path}")
    if not events_path.exists():
        raise CliError(f"events CSV not found: {events_path}")
    test_ds = scenario.read_dataset_csv(test_path, events_path)
    node = EdgeNode(device_id=args.device_id, schema=schema, detector=edge_dec.detector)
    gateway = FogGateway(
        fog_dec.detector,
        window_len=args.window_len,
        confidence_threshold=args.confidence_threshold,
        reorder_tolerance=args.reorder_tolerance,
    )
    if args.mode == "socket":
        decisions = _socket_replay(test_ds, node, gateway, schema, args)
        flags = {d.seq for d in decisions if d.is_anomaly}
    else:
        cfg = _load_scenario(args)
        result = scenario.replay(
            test_ds, node, gateway, cfg.delay_model(), schema, seed=args.seed or 0
        )
        decisions = result.decisions
        flags = result.final_flags
        log.info("replayed %d packets, %d lost, %d malformed", result.emitted, result.lost, gateway.malformed_count)
    if args.out:
        fog.write_decision_log(decisions, args.out)
    _print_metrics(test_ds.events, flags, decisions)
    return 0


def _socket_replay(test_ds, node, gateway, schema, args) -> list:
    """Round-trip every packet through a real loopback datagram socket."""
    server = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    server.bind(("127.0.0.1", 0))
    server.settimeout(0.5)
    port = server.getsockname()[1]
    decisions = []
    done = threading.Event()

    def serve():
        while not done.is_set():
            try:
                blob, _ = server.recvfrom(65535)
            except socket.timeout:
                continue
            if blob == b"":
                break
            d = gateway.ingest_datagram(blob, time.time() * 1000.0)
            if d is not None:
                decisions.append(d)

    thread = threading.Thread(target=serve, daemon=True)
    thread.start()
    sender = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    feats = test_ds.feature_matrix(schema)
    stamps = test_ds.timestamps_ms
    for i in range(test_ds.n_points):
        packet = node.tick_point(feats[i], int(stamps[i]))
        sender.sendto(encode_packet(packet), ("127.0.0.1", port))
        if i % 64 == 63:
            time.sleep(0.001)  # let the reader drain the socket buffer
    deadline = time.time() + 10.0
    while len(decisions) < test_ds.n_points and time.time() < deadline:
        time.sleep(0.02)
    done.set()
    sender.sendto(b"", ("127.0.0.1", port))
    thread.join(timeout=2.0)
    sender.close()
    server.close()
    log.info("socket replay delivered %d of %d packets", len(decisions), test_ds.n_points)
    return decisions


def cmd_evaluate(args) -> int:
    decisions_path = Path(args.decisions)
    events_path = Path(args.events_csv)
    if not decisions_path.exists():
        raise CliError(f"decision log not found: {decisions_path}")
    if not events_path.exists():
        raise CliError(f"events CSV not found: {events_path}")
    decisions = fog.read_decision_log(decisions_path)
    events = scenario.read_events_csv(events_path)
    flags = {d.seq for d in decisions if d.is_anomaly}
    _print_metrics(events, flags, decisions)
    return 0


def cmd_serve_fog(args) -> int:
    fog_dec = _load_detector(args.model)
    gateway = FogGateway(
        fog_dec.detector,
        window_len=args.window_len,
        confidence_threshold=args.confidence_threshold,
        reorder_tolerance=args.reorder_tolerance,
    )
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    sock.bind((args.host, args.port))
    sock.settimeout(0.5)
    print(f"fog gateway listening on {args.host}:{sock.getsockname()[1]}")
    received = 0
    with open(args.log, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DECISION_LOG_COLUMNS)
        try:
            while args.max_packets == 0 or received < args.max_packets:
                try:
                    blob, _ = sock.recvfrom(65535)
                except socket.timeout:
                    continue
                received += 1
                d = gateway.ingest_datagram(blob, time.time() * 1000.0)
                if d is not None:
                    writer.writerow(
                        [d.device_id, d.seq, d.source, int(d.is_anomaly), repr(d.confidence), repr(d.response_delay_ms)]
                    )
                    fh.flush()
        except KeyboardInterrupt:
            pass
        finally:
            sock.close()
    print(f"served {received} datagrams ({gateway.malformed_count} malformed) -> {args.log}")
    return 0


def cmd_run_edge(args) -> int:
    edge_dec = _load_detector(args.model)
    schema = _schema(args)
    test_path = Path(args.test_csv)
    if not test_path.exists():
        raise CliError(f"test CSV not found: {test_path}")
    test_ds = scenario.read_dataset_csv(test_path)
    node = EdgeNode(device_id=args.device_id, schema=schema, detector=edge_dec.detector)
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    feats = test_ds.feature_matrix(schema)
    sent = 0
    for i in range(test_ds.n_points):
        packet = node.tick_point(feats[i], int(time.time() * 1000))
        sock.sendto(encode_packet(packet), (args.host, args.port))
        sent += 1
        if args.interval_ms > 0:
            time.sleep(args.interval_ms / 1000.0)
        elif i % 64 == 63:
            time.sleep(0.001)
    sock.close()
    print(
        f"sent {sent} packets to {args.host}:{args.port}, "
        f"median edge latency {node.median_latency_ms():.3f} ms"
    )
    return 0


def cmd_report(args) -> int:
    cfg = _load_scenario(args)
    schema = _schema(args)
    if args.detector == "ae":
        exp = evaluation.ExperimentConfig(
            scenario=cfg,
            schema_variant=schema.variant_name(),
            edge_profile=_profile(args.edge_profile),
            fog_profile=_profile(args.fog_profile),
            window_len=args.window_len,
            confidence_threshold=args.confidence_threshold,
            ensemble=args.ensemble,
            train=_train_config(args, args.seed if args.seed is not None else 0),
        )
        report = evaluation.run_experiment(exp)
        report.write_csv(args.out)
        for row in report.rows():
            print(
                f"{row['model']} {row['profile']} L={row['L'] or '-'} {row['variant']}: "
                f"f1 {row['f1_mean']:.4f} +- {row['f1_sigma']:.4f}"
            )
        print(f"report -> {args.out}")
        return 0
    return _baseline_report(args, cfg, schema)


def _baseline_report(args, cfg, schema) -> int:
    train_ds, test_ds = scenario.generate(cfg)
    train_rows = train_ds.feature_matrix(schema)
    test_rows = test_ds.feature_matrix(schema)
    window_len = args.window_len
    rows = []
    for mode in ("point", "window"):
        if mode == "point":
            fit_rows, query_rows = train_rows, test_rows
            seq_of = lambda i: i
        else:
            fit_rows = build_fog_training_set(train_rows, window_len)
            query_rows = build_fog_training_set(test_rows, window_len)
            seq_of = lambda i: i + window_len - 1  # window decision lands on its newest point
        model = fit_baseline(
            args.detector, fit_rows, contamination=args.contamination, seed=args.seed or 0
        )
        scores = baseline_scores(model, query_rows)
        flags = {seq_of(i) for i, s in enumerate(scores) if s > model.threshold}
        counts = evaluation.score_events(test_ds.events, flags)
        p, r, f1 = evaluation.precision_recall_f1(counts)
        rows.append(
            {
                "model": f"{args.detector}-{mode}",
                "profile": "",
                "L": window_len if mode == "window" else "",
                "variant": schema.variant_name(),
                "ensemble": 1,
                "p_mean": p,
                "p_sigma": 0.0,
                "r_mean": r,
                "r_sigma": 0.0,
                "f1_mean": f1,
                "f1_sigma": 0.0,
                "point_f1_mean": evaluation.precision_recall_f1(
                    evaluation.score_points(test_ds.events, flags, test_ds.n_points)
                )[2],
                "offload_fraction_mean": 0.0,
                "mean_response_delay_ms": 0.0,
            }
        )
        print(f"{args.detector}-{mode}: f1 {f1:.4f} (p {p:.4f}, r {r:.4f})")
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(rows[0].keys())
        for row in rows:
            writer.writerow([v if isinstance(v, (str, int)) else repr(v) for v in row.values()])
    print(f"report -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="admf", description="Hierarchical edge/fog anomaly detection pipeline."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the RNG seed")
    common.add_argument("--config", default=None, help="flat key=value scenario config file")

    schema_arg = argparse.ArgumentParser(add_help=False)
    schema_arg.add_argument("--schema", choices=["gps", "no-gps"], default="gps")

    train_knobs = argparse.ArgumentParser(add_help=False)
    train_knobs.add_argument("--epochs", type=int, default=100)
    train_knobs.add_argument("--batch-size", type=int, default=16)
    train_knobs.add_argument("--learning-rate", type=float, default=0.001)
    train_knobs.add_argument("--patience", type=int, default=10)

    p = sub.add_parser("generate", parents=[common], help="write train/test/events CSVs")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", parents=[common, schema_arg, train_knobs], help="train a detector")
    p.add_argument("--role", choices=["edge", "fog"], required=True)
    p.add_argument("--profile", choices=["hl1", "hl3", "hl5"], default=None)
    p.add_argument("--L", dest="window_len", type=int, default=None)
    p.add_argument("--train-csv", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--precision", choices=["f32", "f64"], default="f32")
    p.add_argument("--history", default=None, help="write per-epoch loss CSV (timing column varies)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("export", parents=[common], help="re-encode a model file")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--precision", choices=["f32", "f64"], default="f32")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("replay", parents=[common, schema_arg], help="replay a test stream and score it")
    p.add_argument("--edge-model", required=True)
    p.add_argument("--fog-model", required=True)
    p.add_argument("--test-csv", required=True)
    p.add_argument("--events-csv", required=True)
    p.add_argument("--L", dest="window_len", type=int, default=10)
    p.add_argument("--c-th", dest="confidence_threshold", type=float, default=DEFAULT_CONFIDENCE_THRESHOLD)
    p.add_argument("--reorder-tolerance", type=int, default=3)
    p.add_argument("--mode", choices=["inproc", "socket"], default="inproc")
    p.add_argument("--device-id", type=int, default=0)
    p.add_argument("--out", default=None, help="write the decision log CSV here")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("evaluate", parents=[common], help="score an existing decision log")
    p.add_argument("--decisions", required=True)
    p.add_argument("--events-csv", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("serve-fog", parents=[common], help="run the gateway on a UDP port")
    p.add_argument("--model", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=DEFAULT_PORT)
    p.add_argument("--L", dest="window_len", type=int, required=True)
    p.add_argument("--c-th", dest="confidence_threshold", type=float, default=DEFAULT_CONFIDENCE_THRESHOLD)
    p.add_argument("--reorder-tolerance", type=int, default=3)
    p.add_argument("--log", required=True, help="decision log CSV path")
    p.add_argument("--max-packets", type=int, default=0, help="stop after N datagrams (0 = run until interrupted)")
    p.set_defaults(func=cmd_serve_fog)

    p = sub.add_parser("run-edge", parents=[common, schema_arg], help="stream a test CSV to a gateway")
    p.add_argument("--model", required=True)
    p.add_argument("--test-csv", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=DEFAULT_PORT)
    p.add_argument("--device-id", type=int, default=0)
    p.add_argument("--interval-ms", type=float, default=0.0, help="pause between packets")
    p.set_defaults(func=cmd_run_edge)

    p = sub.add_parser("report", parents=[common, schema_arg, train_knobs], help="run an experiment and write the report CSV")
    p.add_argument("--detector", choices=["ae", *BASELINE_KINDS], default="ae")
    p.add_argument("--edge-profile", default="hl1")
    p.add_argument("--fog-profile", default="hl5")
    p.add_argument("--L", dest="window_len", type=int, default=10)
    p.add_argument("--c-th", dest="confidence_threshold", type=float, default=DEFAULT_CONFIDENCE_THRESHOLD)
    p.add_argument("--ensemble", type=int, default=5)
    p.add_argument("--contamination", type=float, default=DEFAULT_CONTAMINATION)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
