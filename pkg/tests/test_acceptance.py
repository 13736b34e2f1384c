"""Acceptance suite: one test per shipped guarantee, run with ``pytest -v``.

Each test is numbered and self-contained, pins its own tolerances, and
prints the measured values after its assertions pass, so a verbose run
reads as a ten-line pass/fail checklist:

 1. codec round-trip soundness plus decoder fuzzing
 2. zero-loss TCP ingest at 100 Hz (6000 packets, gap-free ids)
 3. motion discrimination: variance inside an event >= 5x outside
 4. no-motion baseline variance stays flat (max/median <= 3)
 5. streaming DSP matches brute-force oracles
 6. anomaly detector: k-means descent, perfect-library reconstruction,
    and ROC AUC >= 0.9 against generator labels
 7. Haar DWT Parseval identity plus an exact hand oracle
 8. activity classifiers reach pinned accuracy; LSTM gradients check out
 9. store survives SIGKILL mid-append without losing acknowledged rows
10. the full CLI pipeline is byte-for-byte deterministic per seed
"""

from __future__ import annotations

import subprocess
import sys
import time

import numpy as np
import pytest
from sklearn.metrics import roc_auc_score

from csi_sentry import (
    AmplitudePipeline,
    AmplitudeRecord,
    ChannelConfig,
    CsiSentryError,
    DecisionTreeActivityClassifier,
    GaussianNaiveBayesActivityClassifier,
    HaarFeatureExtractor,
    IngestServer,
    LstmActivityClassifier,
    MotionEvent,
    RecordLog,
    ShapeAnomalyDetector,
    amplitude_db,
    decode_packet,
    encode_packet,
    gen_activity_dataset,
    gen_stream,
    moving_average,
    stream_packets,
    windowed_variance,
    write_dataset,
)
from csi_sentry.anomaly import kmeans_fit, reconstruct, segment_and_window
from csi_sentry.classify.dwt import haar_dwt
from csi_sentry.classify.lstm import init_params, loss_and_grads
from csi_sentry.cli import main as cli_main
from csi_sentry.synth import labels_path_for

from conftest import make_packet


def _relative_error(actual: np.ndarray, expected: np.ndarray) -> float:
    denom = np.maximum(np.abs(expected), 1e-12)
    return float(np.max(np.abs(actual - expected) / denom))


# -- 1. codec soundness --------------------------------------------------


def test_criterion_01_codec_roundtrip_and_fuzz():
    t0 = time.monotonic()
    rng = np.random.default_rng(20260817)

    for _ in range(1000):
        packet = make_packet(rng)
        again = decode_packet(encode_packet(packet))
        assert again.header == packet.header
        assert np.array_equal(again.csi, packet.csi)

    outcomes = {"ok": 0, "error": 0}
    for i in range(100_000):
        n = int(rng.integers(0, 601))
        buf = rng.integers(0, 256, size=n, dtype=np.uint8).tobytes()
        if i % 5 == 0:
            # prefix a plausible header so deeper decode paths get fuzzed too
            head = bytearray(encode_packet(make_packet(rng))[:20])
            buf = bytes(head) + buf
        try:
            decode_packet(buf)
            outcomes["ok"] += 1
        except CsiSentryError:
            outcomes["error"] += 1
    assert outcomes["ok"] > 0  # the corpus must reach the success path as well

    elapsed = time.monotonic() - t0
    assert elapsed < 10.0
    print(
        f"CRITERION 1: PASS - 1000 round-trips bit-exact; 100000 fuzz buffers "
        f"({outcomes['error']} rejected, {outcomes['ok']} decoded) in {elapsed:.1f}s"
    )


# -- 2. zero-loss pipeline ------------------------------------------------


def test_criterion_02_zero_loss_ingest_at_100hz(tmp_path):
    cfg = ChannelConfig(seed=11)
    packets = [lp.packet for lp in gen_stream(cfg, 60.0)]
    assert len(packets) == 6000

    store = RecordLog(tmp_path / "store.csv")
    pipeline = AmplitudePipeline()
    server = IngestServer(
        host="127.0.0.1",
        port=0,
        queue_capacity=256,
        sink=lambda pkt: store.append(pipeline.process(pkt)),
        block_on_full=True,
    ).start()
    try:
        sent = stream_packets("127.0.0.1", server.port, packets, rate_hz=100.0)
    finally:
        stats = server.stop()
        store.close()

    assert sent == 6000
    assert stats.received == 6000
    assert stats.decode_errors == 0
    assert stats.dropped == 0

    reopened = RecordLog(tmp_path / "store.csv")
    ids = [rec.packet_id for rec in reopened]
    reopened.close()
    assert ids == list(range(1, 6001))
    print(
        "CRITERION 2: PASS - 6000 packets replayed at 100 Hz; store holds "
        f"6000 records, ids gap-free, dropped={stats.dropped}"
    )


# -- 3 & 4. motion discrimination and quiet baseline ----------------------


def _variance_trace(seed: int, events: list[MotionEvent]) -> tuple[np.ndarray, np.ndarray]:
    cfg = ChannelConfig(seed=seed)  # noise_sigma=1.0, 100 Hz
    labeled = list(gen_stream(cfg, 120.0, events))
    amps = np.array([amplitude_db(lp.packet) for lp in labeled])
    in_motion = np.array([lp.in_motion for lp in labeled])
    return windowed_variance(amps, window=20), in_motion


def test_criterion_03_motion_discrimination():
    onset, max_delay = 6000, 200  # event starts at 60 s; 2 s at 100 Hz
    for seed in (0, 1, 2):
        variance, in_motion = _variance_trace(seed, [MotionEvent(60.0, 70.0)])
        inside = float(np.median(variance[in_motion]))
        outside = float(np.median(variance[~in_motion]))
        ratio = inside / outside
        assert ratio >= 5.0, f"seed {seed}: inside/outside median ratio {ratio:.1f} < 5"

        threshold = 5.0 * outside
        above = np.nonzero(variance > threshold)[0]
        assert above.size > 0, f"seed {seed}: variance never crossed threshold"
        first = int(above[0])
        assert onset <= first <= onset + max_delay, (
            f"seed {seed}: first crossing at sample {first}, "
            f"expected within [{onset}, {onset + max_delay}]"
        )
    print(
        "CRITERION 3: PASS - seeds 0,1,2: event/quiet median variance ratio >= 5, "
        "first crossing within 2 s of onset, no earlier false crossing"
    )


def test_criterion_04_no_motion_baseline_flat():
    warmup = 20
    ratios = []
    for seed in (0, 1, 2, 7):
        variance, _ = _variance_trace(seed, [])
        post = variance[warmup:]
        ratios.append(float(np.max(post) / np.median(post)))
    assert all(r <= 3.0 for r in ratios), f"max/median ratios {ratios}"
    print(
        "CRITERION 4: PASS - no-motion variance max/median "
        f"{', '.join(f'{r:.2f}' for r in ratios)} (all <= 3) on seeds 0,1,2,7"
    )


# -- 5. DSP oracles --------------------------------------------------------


def test_criterion_05_dsp_matches_brute_force():
    rng = np.random.default_rng(55)
    x = 50.0 + 5.0 * rng.standard_normal(10_000)

    ma = moving_average(x, window=5)
    ma_oracle = np.array([np.mean(x[max(0, i - 4) : i + 1]) for i in range(len(x))])
    ma_err = _relative_error(ma, ma_oracle)
    assert ma_err <= 1e-10

    var = windowed_variance(x, window=20)
    var_oracle = np.array(
        [np.var(x[max(0, i - 19) : i + 1]) for i in range(len(x))]
    )
    var_err = _relative_error(var, var_oracle)
    assert var_err <= 1e-10

    constant = windowed_variance(np.full(1000, 3.7), window=20)
    assert np.all(constant == 0.0)
    print(
        f"CRITERION 5: PASS - 10000 samples: moving-average rel err {ma_err:.2e}, "
        f"variance rel err {var_err:.2e} (both <= 1e-10); constant input exactly 0"
    )


# -- 6. anomaly detector ----------------------------------------------------


def test_criterion_06_anomaly_detector():
    t0 = time.monotonic()

    # (a) k-means objective never increases across iterations
    for seed in range(5):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(40, 16))
        result = kmeans_fit(X, 4, rng)
        h = np.array(result.inertia_history)
        slack = 1e-12 * h[0] + 1e-12  # float-sum rounding only
        assert np.all(np.diff(h) <= slack), f"seed {seed}: objective rose: {h}"

    # (b) a library that tiles the signal reconstructs it almost exactly
    rng = np.random.default_rng(6)
    base = rng.normal(size=8)
    x = np.tile(base, 30)  # stride-periodic, so every segment is identical
    segments, _ = segment_and_window(x, 16, 8)
    library = segments[:1]
    recon = reconstruct(x, library, segment_len=16, stride=8)
    interior_err = float(np.max(np.abs(recon[16:-16] - x[16:-16])))
    assert interior_err < 1e-9

    # (c) transient events score above the periodic baseline
    cfg = ChannelConfig(seed=5)
    labeled = list(gen_stream(cfg, 120.0, [MotionEvent(70.0, 75.0), MotionEvent(95.0, 100.0)]))
    amps = np.array([amplitude_db(lp.packet) for lp in labeled])
    labels = np.array([lp.in_motion for lp in labeled], dtype=int)
    detector = ShapeAnomalyDetector(segment_len=64, n_clusters=8, random_state=0)
    detector.fit(amps[:6000])  # first 60 s are event-free
    auc = float(roc_auc_score(labels, detector.score_samples(amps)))
    assert auc >= 0.9

    elapsed = time.monotonic() - t0
    assert elapsed < 30.0
    print(
        f"CRITERION 6: PASS - k-means descent on 5 seeds; perfect-library interior "
        f"error {interior_err:.1e} < 1e-9; ROC AUC {auc:.4f} >= 0.9 ({elapsed:.1f}s)"
    )


# -- 7. Haar DWT -------------------------------------------------------------


def test_criterion_07_dwt_parseval_and_oracle():
    rng = np.random.default_rng(7)
    lengths = [int(rng.integers(2, 301)) for _ in range(94)] + [5, 9, 100, 127, 2, 3]
    worst = 0.0
    for n in lengths:
        x = rng.standard_normal(n)
        approx, details = haar_dwt(x)
        energy = float(np.sum(approx**2) + sum(np.sum(d**2) for d in details))
        worst = max(worst, abs(energy - float(np.sum(x**2))) / float(np.sum(x**2)))
    assert worst <= 1e-9

    # hand oracle for [1..8], one level: bit-exact
    sqrt2 = np.sqrt(2.0)
    approx, details = haar_dwt(np.arange(1.0, 9.0), levels=1)
    assert np.array_equal(details[0], np.array([-1 / sqrt2] * 4))
    assert np.array_equal(approx, np.array([3, 7, 11, 15]) / sqrt2)
    print(
        f"CRITERION 7: PASS - Parseval rel err {worst:.2e} <= 1e-9 over 100 signals "
        "(non-dyadic included); length-8 oracle matches exactly"
    )


# -- 8. activity classifiers -------------------------------------------------


def test_criterion_08_classifiers_and_gradient_check():
    train = gen_activity_dataset(n_per_class=50, series_len=128, seed=100)
    test = gen_activity_dataset(n_per_class=20, series_len=128, seed=200)
    assert len(train) == 300 and len(test) == 120
    y_tr = np.array([label for label, _ in train])
    y_te = np.array([label for label, _ in test])
    X_tr = [series for _, series in train]
    X_te = [series for _, series in test]

    extractor = HaarFeatureExtractor().fit(X_tr)
    F_tr, F_te = extractor.transform(X_tr), extractor.transform(X_te)

    tree_acc = float(np.mean(DecisionTreeActivityClassifier().fit(F_tr, y_tr).predict(F_te) == y_te))
    gnb_acc = float(np.mean(GaussianNaiveBayesActivityClassifier().fit(F_tr, y_tr).predict(F_te) == y_te))
    assert tree_acc >= 0.90, f"tree accuracy {tree_acc:.3f} < 0.90"
    assert gnb_acc >= 0.90, f"GNB accuracy {gnb_acc:.3f} < 0.90"

    t0 = time.monotonic()
    lstm = LstmActivityClassifier(random_state=0).fit(X_tr, y_tr)
    train_time = time.monotonic() - t0
    lstm_acc = float(np.mean(lstm.predict(X_te) == y_te))
    assert train_time < 300.0, f"LSTM training took {train_time:.0f}s >= 300s"
    assert lstm_acc >= 0.80, f"LSTM accuracy {lstm_acc:.3f} < 0.80"

    # gradient check on a tiny configuration, dropout disabled
    rng = np.random.default_rng(8)
    params = init_params(n_inputs=2, hidden_size=3, n_classes=6, rng=rng)
    X = rng.standard_normal((2, 4, 2))
    y_idx = np.array([1, 4])
    _, grads = loss_and_grads(params, X, y_idx)
    worst = 0.0
    h = 1e-5
    for key, value in params.items():
        flat = value.ravel()
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + h
            up, _ = loss_and_grads(params, X, y_idx)
            flat[i] = original - h
            down, _ = loss_and_grads(params, X, y_idx)
            flat[i] = original
            numeric = (up - down) / (2 * h)
            analytic = grads[key].ravel()[i]
            scale = max(abs(numeric), abs(analytic), 1e-8)
            worst = max(worst, abs(numeric - analytic) / scale)
    assert worst < 1e-4, f"gradient check relative error {worst:.2e}"
    print(
        f"CRITERION 8: PASS - tree {tree_acc:.3f}, GNB {gnb_acc:.3f} (both >= 0.90); "
        f"LSTM {lstm_acc:.3f} >= 0.80 in {train_time:.0f}s; gradient check {worst:.1e} < 1e-4"
    )


# -- 9. store durability ------------------------------------------------------


_WRITER = """
import sys
from csi_sentry.dsp import AmplitudeRecord
from csi_sentry.store import RecordLog

log = RecordLog(sys.argv[1])
i = 0
while True:
    i += 1
    log.append(AmplitudeRecord(i, i * 10_000, 40.0 + i * 0.001, 40.0, 0.5))
    print(i, flush=True)  # acknowledge only after append returned
"""


def test_criterion_09_store_survives_sigkill(tmp_path):
    for run, kill_after in enumerate((120, 200, 350)):
        path = tmp_path / f"killed-{run}.csv"
        proc = subprocess.Popen(
            [sys.executable, "-c", _WRITER, str(path)],
            stdout=subprocess.PIPE,
            text=True,
        )
        acked = 0
        try:
            for line in proc.stdout:
                acked = int(line)
                if acked >= kill_after:
                    break
        finally:
            proc.kill()
            proc.wait()

        log = RecordLog(path)
        ids = [rec.packet_id for rec in log]
        assert ids == list(range(1, len(ids) + 1))  # gap-free, in order
        assert len(ids) >= acked, f"lost acknowledged rows: {len(ids)} < {acked}"
        log.append(AmplitudeRecord(len(ids) + 1, 0, 1.0, 1.0, 0.0))
        assert len(log) == len(ids) + 1  # still writable after the crash
        log.close()

    # a torn (unterminated) tail line is dropped, terminated rows survive
    path = tmp_path / "torn.csv"
    log = RecordLog(path)
    for i in range(1, 6):
        log.append(AmplitudeRecord(i, i, 10.0, 10.0, 0.0))
    log.close()
    with open(path, "ab") as f:
        f.write(b"6,6000,41.2")  # interrupted before the newline
    reopened = RecordLog(path)
    assert len(reopened) == 5
    assert reopened.last_packet_id == 5
    reopened.append(AmplitudeRecord(6, 6000, 41.2, 41.0, 0.1))
    assert len(reopened) == 6
    reopened.close()
    print(
        "CRITERION 9: PASS - 3 SIGKILL runs kept every acknowledged row and "
        "stayed appendable; torn tail line dropped cleanly"
    )


# -- 10. determinism -----------------------------------------------------------


def _run_cli_pipeline(workdir, dataset) -> list:
    """Drive every artifact-producing subcommand; return the files written."""
    capture = workdir / "capture.bin"
    store = workdir / "store.csv"
    export = workdir / "export.csv"
    library = workdir / "library.bin"
    report = workdir / "report.csv"
    tree_model = workdir / "tree.model"
    gnb_model = workdir / "gnb.model"
    lstm_model = workdir / "lstm.model"

    steps = [
        ["synth", "--duration", "4", "--rate", "50", "--seed", "9",
         "--noise-sigma", "1.0", "--event", "1.0,2.0", "--out", str(capture)],
        ["ingest", "--capture", str(capture), "--store", str(store)],
        ["export-plot", "--store", str(store), "--out", str(export)],
        ["anomaly-train", "--store", str(store), "--out", str(library),
         "--segment-len", "16", "--k", "3", "--seed", "0"],
        ["anomaly-detect", "--store", str(store), "--library", str(library),
         "--out", str(report)],
        ["har-train", "--dataset", str(dataset), "--model", "tree",
         "--out", str(tree_model), "--seed", "0"],
        ["har-train", "--dataset", str(dataset), "--model", "gnb",
         "--out", str(gnb_model), "--seed", "0"],
        ["har-train", "--dataset", str(dataset), "--model", "lstm",
         "--out", str(lstm_model), "--seed", "0", "--epochs", "2"],
    ]
    for argv in steps:
        assert cli_main(argv) == 0, f"cli {argv[0]} failed"
    return [
        capture, labels_path_for(capture), store, export,
        library, report, tree_model, gnb_model, lstm_model,
    ]


def test_criterion_10_cli_pipeline_deterministic(tmp_path, capsys):
    dataset = tmp_path / "activities.txt"
    write_dataset(dataset, gen_activity_dataset(n_per_class=3, series_len=32, seed=4))

    dir_a, dir_b = tmp_path / "a", tmp_path / "b"
    dir_a.mkdir()
    dir_b.mkdir()
    files_a = _run_cli_pipeline(dir_a, dataset)
    files_b = _run_cli_pipeline(dir_b, dataset)
    capsys.readouterr()  # the subcommand chatter is not under test

    for fa, fb in zip(files_a, files_b):
        assert fa.read_bytes() == fb.read_bytes(), f"{fa.name} differs between runs"
    print(
        "CRITERION 10: PASS - capture, labels, store, export, library, report, "
        "and all three model files byte-identical across two seeded runs"
    )
