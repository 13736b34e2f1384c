"""Command-line surface: one executable, nine subcommands.

Exit codes: 0 success, 1 usage error (usage text on stderr), 2 runtime
failure.  An optional key=value config file fills in flags the user did
not pass explicitly; explicit flags always win.
"""

from __future__ import annotations

import argparse
import sys
import threading
from pathlib import Path

import numpy as np

from .anomaly import (
    ShapeAnomalyDetector,
    load_library,
    save_library,
    write_report_csv,
)
from .classify import (
    DecisionTreeActivityClassifier,
    GaussianNaiveBayesActivityClassifier,
    HaarFeatureExtractor,
    LstmActivityClassifier,
    evaluate,
    features_matrix,
    load_dataset,
    load_model,
    save_model,
)
from .classify.dataset import LABELS
from .dsp import AmplitudePipeline, DspConfig
from .exceptions import CsiSentryError, IoFailure
from .store import RecordLog
from .synth import (
    ChannelConfig,
    MotionEvent,
    gen_stream,
    labels_path_for,
    write_labels,
)
from .transport import (
    IngestServer,
    default_port,
    read_capture,
    stream_packets,
    write_capture,
)


class _Parser(argparse.ArgumentParser):
    """argparse's default usage-error exit code is 2; this tool uses 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _event(text: str) -> MotionEvent:
    """--event value: start,end[,depth[,doppler_hz]] in seconds."""
    try:
        parts = [float(p) for p in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad event {text!r}") from None
    if not 2 <= len(parts) <= 4:
        raise argparse.ArgumentTypeError(
            f"event {text!r} needs 2-4 comma-separated numbers"
        )
    return MotionEvent(*parts)


def _load_config_file(path: str) -> dict[str, str]:
    values = {}
    for line_number, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{line_number}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _merge_config(args: argparse.Namespace, sub: argparse.ArgumentParser) -> None:
    """Fill flags still at their defaults from the key=value config file."""
    if not getattr(args, "config", None):
        return
    values = _load_config_file(args.config)
    for action in sub._actions:
        dest = action.dest
        if dest in ("help", "config") or dest not in values:
            continue
        if getattr(args, dest) != action.default:
            continue  # explicitly set flags win
        convert = action.type or str
        value = convert(values[dest])
        if action.choices is not None and value not in action.choices:
            raise ValueError(
                f"config {dest}={values[dest]!r} not one of {sorted(action.choices)}"
            )
        if isinstance(action, argparse._AppendAction):
            value = [value]
        setattr(args, dest, value)


def build_parser() -> tuple[
    _Parser, dict[str, argparse.ArgumentParser], dict[str, list[str]]
]:
    parser = _Parser(
        prog="csi-sentry",
        description="CSI motion sensing: synth, ingest, analytics, classifiers.",
    )
    subs = parser.add_subparsers(dest="subcommand", required=True, metavar="COMMAND")
    registry: dict[str, argparse.ArgumentParser] = {}
    # flags a run cannot proceed without; enforced only after the config
    # file has had its chance to supply them
    required: dict[str, list[str]] = {}

    current = {"name": ""}

    def sub(name: str, help_text: str) -> argparse.ArgumentParser:
        p = subs.add_parser(name, help=help_text)
        p.add_argument("--config", help="key=value file filling in unset flags")
        registry[name] = p
        required[name] = []
        current["name"] = name
        return p

    def require(p: argparse.ArgumentParser, flag: str, **kwargs):
        p.add_argument(flag, **kwargs)
        required[current["name"]].append(flag.lstrip("-").replace("-", "_"))

    p = sub("synth", "generate a packet capture with optional motion events")
    require(p, "--duration", type=float, help="seconds (required)")
    p.add_argument("--rate", type=float, default=100.0, help="packets per second")
    p.add_argument("--seed", type=int, default=0)
    require(p, "--out", help="capture file to write (required)")
    p.add_argument("--labels", help="ground-truth sidecar CSV (default: OUT.labels.csv)")
    p.add_argument("--ntx", type=int, default=1)
    p.add_argument("--nrx", type=int, default=3)
    p.add_argument("--noise-sigma", type=float, default=1.0)
    p.add_argument(
        "--event",
        type=_event,
        action="append",
        default=[],
        metavar="START,END[,DEPTH[,DOPPLER]]",
        help="motion event in seconds; repeatable",
    )

    p = sub("serve", "TCP server: ingest packets into a store log")
    p.add_argument("--port", type=int, default=default_port())
    p.add_argument("--host", default="127.0.0.1")
    require(p, "--store", help="record log to append to (required)")
    p.add_argument("--duration", type=float, default=None,
                   help="seconds to serve; default: until interrupted")
    p.add_argument("--queue-capacity", type=int, default=256)

    p = sub("ingest", "decode a capture file into a store log (offline)")
    require(p, "--capture", help="framed capture to read (required)")
    require(p, "--store", help="record log to append to (required)")

    p = sub("replay", "stream a capture file to a TCP server")
    require(p, "--capture", help="framed capture to read (required)")
    p.add_argument("--port", type=int, default=default_port())
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--rate", type=float, default=100.0,
                   help="packets per second; 0 = unpaced")

    p = sub("export-plot", "export a store log as plot-ready CSV")
    require(p, "--store")
    require(p, "--out")

    p = sub("anomaly-train", "learn a shape library from a store log")
    require(p, "--store")
    require(p, "--out", help="library file to write (required)")
    p.add_argument("--segment-len", type=int, default=64)
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--threshold-c", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=0)

    p = sub("anomaly-detect", "flag anomalous intervals in a store log")
    require(p, "--store")
    require(p, "--library", help="library file from anomaly-train (required)")
    p.add_argument("--threshold-c", type=float, default=3.0)
    require(p, "--out", help="report CSV to write (required)")

    p = sub("har-train", "train an activity classifier on a dataset file")
    require(p, "--dataset")
    require(p, "--model", choices=("tree", "gnb", "lstm"))
    require(p, "--out", help="model file to write (required)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--levels", type=int, default=None,
                   help="wavelet depth for tree/gnb features (default: auto)")
    p.add_argument("--epochs", type=int, default=150)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--max-depth", type=int, default=None)

    p = sub("har-eval", "evaluate a trained model on a dataset file")
    require(p, "--dataset")
    require(p, "--model-file")

    return parser, registry, required


# -- subcommands ---------------------------------------------------------


def _require_file(path: str, kind: str) -> None:
    if not Path(path).is_file():
        raise IoFailure(f"{kind} {path} does not exist")


def cmd_synth(args) -> int:
    cfg = ChannelConfig(
        ntx=args.ntx,
        nrx=args.nrx,
        noise_sigma=args.noise_sigma,
        rate_hz=args.rate,
        seed=args.seed,
    )
    labeled = list(gen_stream(cfg, args.duration, args.event))
    count = write_capture(args.out, (item.packet for item in labeled))
    labels_path = args.labels or labels_path_for(args.out)
    write_labels(labels_path, labeled)
    print(f"wrote {count} packets to {args.out} (labels: {labels_path})")
    return 0


def _store_sink(store_path):
    log = RecordLog(store_path)
    pipeline = AmplitudePipeline(DspConfig())

    def sink(packet) -> None:
        log.append(pipeline.process(packet))

    return log, sink


def cmd_serve(args) -> int:
    log, sink = _store_sink(args.store)
    server = IngestServer(
        args.host, args.port, args.queue_capacity, sink
    ).start()
    print(f"serving on {args.host}:{server.port}, storing to {args.store}")
    try:
        if args.duration is None:
            threading.Event().wait()  # until KeyboardInterrupt
        else:
            threading.Event().wait(args.duration)
    except KeyboardInterrupt:
        pass
    finally:
        stats = server.stop()
        log.close()
    print(
        f"received={stats.received} decoded={stats.decoded} "
        f"decode_errors={stats.decode_errors} dropped={stats.dropped} "
        f"stored={len(log)}"
    )
    return 0


def cmd_ingest(args) -> int:
    _require_file(args.capture, "capture")
    log, sink = _store_sink(args.store)
    count = 0
    with log:
        for packet in read_capture(args.capture):
            sink(packet)
            count += 1
    print(f"ingested {count} packets into {args.store}")
    return 0


def cmd_replay(args) -> int:
    _require_file(args.capture, "capture")
    sent = stream_packets(
        args.host, args.port, read_capture(args.capture), args.rate or None
    )
    print(f"sent {sent} packets to {args.host}:{args.port}")
    return 0


def cmd_export_plot(args) -> int:
    _require_file(args.store, "store")
    with RecordLog(args.store) as log:
        count = log.export_csv(args.out)
    print(f"exported {count} rows to {args.out}")
    return 0


def _store_amplitudes(store_path) -> np.ndarray:
    _require_file(store_path, "store")
    with RecordLog(store_path) as log:
        return np.array([rec.amplitude_db for rec in log.records()])


def cmd_anomaly_train(args) -> int:
    amplitudes = _store_amplitudes(args.store)
    detector = ShapeAnomalyDetector(
        segment_len=args.segment_len,
        stride=args.stride,
        n_clusters=args.k,
        threshold_c=args.threshold_c,
        random_state=args.seed,
    ).fit(amplitudes)
    save_library(args.out, detector)
    print(
        f"library {args.out}: k={args.k} L={args.segment_len} "
        f"S={detector.stride_} threshold={detector.threshold_:.6g}"
    )
    return 0


def cmd_anomaly_detect(args) -> int:
    _require_file(args.library, "library")
    detector = load_library(args.library, threshold_c=args.threshold_c)
    report = detector.detect(_store_amplitudes(args.store))
    write_report_csv(args.out, report)
    spans = ", ".join(f"[{a}, {b}]" for a, b in report.intervals) or "none"
    print(f"{len(report.intervals)} anomalous interval(s): {spans}")
    return 0


def cmd_har_train(args) -> int:
    _require_file(args.dataset, "dataset")
    labels, series = load_dataset(args.dataset)
    if args.model == "lstm":
        model = LstmActivityClassifier(
            hidden_size=args.hidden,
            epochs=args.epochs,
            learning_rate=args.lr,
            random_state=args.seed,
        ).fit(series, labels)
        levels = 0
        predictions = model.predict(series)
    else:
        extractor = HaarFeatureExtractor(levels=args.levels).fit(series)
        X = extractor.transform(series)
        if args.model == "tree":
            model = DecisionTreeActivityClassifier(max_depth=args.max_depth)
        else:
            model = GaussianNaiveBayesActivityClassifier()
        model.fit(X, labels)
        levels = extractor.levels_
        predictions = model.predict(X)
    save_model(args.out, model, levels=levels)
    accuracy = float(np.mean(np.asarray(predictions) == np.asarray(labels)))
    print(f"trained {args.model} on {len(labels)} samples; "
          f"train accuracy {accuracy:.3f}; saved to {args.out}")
    return 0


def cmd_har_eval(args) -> int:
    _require_file(args.dataset, "dataset")
    _require_file(args.model_file, "model file")
    model, levels = load_model(args.model_file)
    labels, series = load_dataset(args.dataset)
    if isinstance(model, LstmActivityClassifier):
        predictions = model.predict(series)
    else:
        predictions = model.predict(features_matrix(series, levels))
    result = evaluate(labels, predictions, LABELS)
    print(f"accuracy {result['accuracy']:.3f}  macro-F1 {result['macro_f1']:.3f}")
    width = max(len(label) for label in LABELS)
    header = " ".join(f"{label[:7]:>7}" for label in LABELS)
    print(f"{'':{width}}  {header}")
    for i, label in enumerate(LABELS):
        row = " ".join(f"{n:>7}" for n in result["confusion"][i])
        print(f"{label:<{width}}  {row}")
    return 0


_COMMANDS = {
    "synth": cmd_synth,
    "serve": cmd_serve,
    "ingest": cmd_ingest,
    "replay": cmd_replay,
    "export-plot": cmd_export_plot,
    "anomaly-train": cmd_anomaly_train,
    "anomaly-detect": cmd_anomaly_detect,
    "har-train": cmd_har_train,
    "har-eval": cmd_har_eval,
}


def main(argv=None) -> int:
    parser, registry, required = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    sub = registry[args.subcommand]
    try:
        _merge_config(args, sub)
    except (OSError, ValueError) as exc:
        print(f"csi-sentry: error: {exc}", file=sys.stderr)
        return 2
    missing = [d for d in required[args.subcommand] if getattr(args, d) is None]
    if missing:
        sub.print_usage(sys.stderr)
        flags = ", ".join("--" + d.replace("_", "-") for d in missing)
        print(
            f"{sub.prog}: error: the following arguments are required "
            f"(by flag or config file): {flags}",
            file=sys.stderr,
        )
        return 1
    try:
        return _COMMANDS[args.subcommand](args)
    except (CsiSentryError, OSError, ValueError) as exc:
        print(f"csi-sentry: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
