"""End-to-end smoke checks for the Python bindings.

Run with PYTHONPATH containing the built extension module's directory and the
``python/`` package directory.  Exercises every exposed operation once with
small inputs; numeric ground truths are frozen from the library's unit suite.
"""

import math
import sys
import tempfile
from pathlib import Path

import numpy as np

import avtpids


FAILURES = []


def check(name, fn):
    try:
        fn()
    except Exception as exc:  # noqa: BLE001 - report and continue
        FAILURES.append((name, exc))
        print(f"[FAIL] {name}: {exc!r}")
    else:
        print(f"[ ok ] {name}")


def test_module_surface():
    assert avtpids.__version__ == "0.1.0"
    assert avtpids.FEATURE_BYTES == 58
    assert avtpids.AVTP_ETHERTYPE == 0x22F0
    assert list(avtpids.WINDOW_LENGTHS) == [8, 16, 24, 32, 40]


def test_synth_and_ingest(tmp):
    cap = str(tmp / "clean.pcap")
    info = avtpids.synth_capture(cap, seed=7, frames=600)
    assert info["frames"] == 600 and info["injected"] == 0
    feats, stats = avtpids.ingest(cap)
    assert feats.shape == (600, 58) and feats.dtype == np.uint8
    assert stats["avtp_frames"] == 600 and stats["total_frames"] == 600

    # Same seed, same bytes.
    cap2 = str(tmp / "clean2.pcap")
    avtpids.synth_capture(cap2, seed=7, frames=600)
    assert Path(cap).read_bytes() == Path(cap2).read_bytes()


def test_attack_and_windows(tmp):
    cap = str(tmp / "attacked.pcap")
    info = avtpids.synth_capture(cap, seed=7, frames=600, inject=36)
    assert info["injected"] > 0 and info["replay_size"] > 0
    ws = avtpids.WindowSet.from_pcap(cap, 8, replay=info["replay_path"])
    assert ws.w == 8
    assert ws.count == info["frames"] - 8 + 1 == len(ws)
    labels = ws.labels
    assert labels.dtype == np.uint8 and labels.shape == (ws.count,)
    assert 0 < labels.sum() < ws.count

    flat = ws.flat()
    assert flat.shape == (ws.count, 8 * 58)
    assert flat.min() >= 0.0 and flat.max() <= 1.0

    sub = ws.flat([0, 5])
    assert np.array_equal(sub[0], flat[0]) and np.array_equal(sub[1], flat[5])

    # Cache round trip.
    cache = str(tmp / "win.bin")
    ws.save(cache)
    back = avtpids.WindowSet.load(cache)
    assert back.w == ws.w and back.count == ws.count
    assert np.array_equal(back.labels, ws.labels)
    assert np.array_equal(back.features, ws.features)


def test_window_building_from_rows():
    rng = np.random.default_rng(3)
    rows = rng.integers(0, 256, size=(40, 58), dtype=np.uint8)
    ws = avtpids.WindowSet.from_features(rows, 8)
    assert ws.count == 33
    # Window 0's image is rows 0..7 scaled into [0,1].
    img = ws.flat([0])[0].reshape(8, 58)
    assert np.allclose(img, rows[:8] / 255.0)
    # Labelling against row 12 marks exactly the windows covering it.
    ws.label_with(rows[12:13])
    covered = {k for k in range(ws.count) if k <= 12 <= k + 7}
    assert {int(k) for k in np.flatnonzero(ws.labels)} == covered


def test_model_param_counts():
    assert avtpids.Model.cae(16).param_count == 4382593
    assert avtpids.Model.lstm_ae(8).param_count == 12338
    assert avtpids.Model.lstm_ae(40).param_count == 12338


def test_model_forward_shapes():
    m = avtpids.Model.cae(8)
    m.init_params(1)
    x = np.random.default_rng(0).random((3, 8, 58))
    y = m.forward(x)
    assert y.shape == (3, 8, 58)
    assert np.isfinite(y).all()


def test_training_and_checkpoint(tmp):
    rng = np.random.default_rng(11)
    rows = rng.integers(0, 256, size=(90, 58), dtype=np.uint8)
    ws = avtpids.WindowSet.from_features(rows, 8)

    m = avtpids.Model.lstm_ae(8)
    m.init_params(5)
    hist = m.train(ws, epochs=2, patience=2, seed=5, verbose=False)
    assert len(hist["epochs"]) >= 1
    assert hist["best_epoch"] >= 1
    assert math.isfinite(hist["best_val_loss"])
    assert m.error_mu is not None and m.error_sigma is not None

    errs = m.errors(ws)
    assert errs.shape == (ws.count,) and (errs >= 0).all()

    path = str(tmp / "model.bin")
    m.save(path)
    back = avtpids.Model.load(path)
    assert back.kind == m.kind and back.w == m.w
    assert back.param_count == m.param_count
    assert back.error_mu == m.error_mu and back.error_sigma == m.error_sigma

    x = ws.flat([0, 1]).reshape(2, 8, 58)
    assert np.array_equal(m.forward(x), back.forward(x))


def test_split():
    train, val = avtpids.split_train_val(100, 0.9, 1)
    assert len(train) == 90 and len(val) == 10
    assert sorted(train + val) == list(range(100))
    train2, val2 = avtpids.split_train_val(100, 0.9, 1)
    assert train == train2 and val == val2


def test_calibration():
    mu, sigma = avtpids.error_stats(np.array([1.0, 1.0, 1.0, 1.0]))
    assert (mu, sigma) == (1.0, 0.0)
    mu, sigma = avtpids.error_stats(np.array([0.0, 2.0]))
    assert (mu, sigma) == (1.0, 1.0)

    assert avtpids.classify(1.01, 1.0) == 1
    assert avtpids.classify(1.0, 1.0) == 0

    scores = np.array([0.95, 1.0, 1.05, 0.98, 1.02, 3.0, 3.1])
    labels = np.array([0, 0, 0, 0, 0, 1, 1], dtype=np.uint8)
    sweep = avtpids.sweep_and_select(1.0, 0.5, scores, labels)
    assert len(sweep["candidates"]) == 9
    alphas = [c["alpha"] for c in sweep["candidates"]]
    assert alphas == [-2.0 + 0.5 * i for i in range(9)]
    best = sweep["best"]
    assert best["f1"] == 1.0 and best["beta"] == 1.25
    assert sweep["candidates"][sweep["best_index"]] == best


def test_metrics():
    cm = avtpids.confusion(
        np.array([1, 0, 1], dtype=np.uint8), np.array([1, 0, 0], dtype=np.uint8)
    )
    assert cm == {"tp": 1, "fp": 1, "tn": 1, "fn": 0}
    p, r, f = avtpids.precision_recall_f1(50, 10, 30, 10)
    assert (p, r) == (50 / 60, 50 / 60) and abs(f - 50 / 60) < 1e-15
    assert round(avtpids.f1_from(0.9794, 0.5508), 4) == 0.7051
    assert avtpids.f1_from(0.0, 0.0) == 0.0


def make_blob_with_outlier():
    rng = np.random.default_rng(21)
    x = rng.normal(0.0, 1.0, size=(60, 4))
    outlier = np.full((1, 4), 8.0)
    return np.vstack([x, outlier])


def test_isolation_forest():
    data = make_blob_with_outlier()
    model = avtpids.IsolationForest.fit(data[:-1], trees=50, psi=32, seed=3)
    s = model.scores(data)
    assert s.argmax() == len(data) - 1
    assert ((s > 0) & (s < 1)).all()


def test_lof():
    data = make_blob_with_outlier()
    model = avtpids.Lof.fit(data[:-1], k=10)
    s = model.scores(data)
    assert s.argmax() == len(data) - 1
    assert model.train_scores().shape == (60,)


def test_ocsvm():
    data = make_blob_with_outlier()
    model = avtpids.Ocsvm.fit(data[:-1], nu=0.1)
    assert model.converged and model.n_support >= 1
    s = model.scores(data)
    assert s.argmin() == len(data) - 1


def test_threshold(tmp):
    scores = np.array([0.1, 0.2, 0.3, 5.0, 6.0])
    labels = np.array([0, 0, 0, 1, 1], dtype=np.uint8)
    cut = avtpids.classical_threshold(scores, labels, "high")
    assert cut["f1"] == 1.0
    preds = avtpids.apply_threshold(scores, cut["threshold"], "high")
    assert np.array_equal(preds, labels)

    # Detector checkpoints round trip.
    data = make_blob_with_outlier()
    forest = avtpids.IsolationForest.fit(data, trees=10, psi=16, seed=1)
    path = str(tmp / "forest.bin")
    forest.save(path)
    back = avtpids.IsolationForest.load(path)
    assert np.array_equal(back.scores(data), forest.scores(data))


def test_errors_are_python_exceptions():
    try:
        avtpids.WindowSet.from_features(np.zeros((4, 58), dtype=np.uint8), 9)
    except avtpids.AvtpError:
        pass
    else:
        raise AssertionError("invalid window length must raise AvtpError")

    try:
        avtpids.ingest("/nonexistent/capture.pcap")
    except avtpids.AvtpError:
        pass
    else:
        raise AssertionError("missing capture must raise AvtpError")


def main():
    with tempfile.TemporaryDirectory() as d:
        tmp = Path(d)
        check("module surface", test_module_surface)
        check("synth + ingest", lambda: test_synth_and_ingest(tmp))
        check("attack + windows", lambda: test_attack_and_windows(tmp))
        check("windows from rows", test_window_building_from_rows)
        check("model param counts", test_model_param_counts)
        check("model forward shapes", test_model_forward_shapes)
        check("training + checkpoint", lambda: test_training_and_checkpoint(tmp))
        check("train/val split", test_split)
        check("calibration", test_calibration)
        check("metrics", test_metrics)
        check("isolation forest", test_isolation_forest)
        check("local outlier factor", test_lof)
        check("one-class svm", test_ocsvm)
        check("threshold + checkpoints", lambda: test_threshold(tmp))
        check("exception mapping", test_errors_are_python_exceptions)

    if FAILURES:
        print(f"{len(FAILURES)} smoke check(s) failed")
        return 1
    print("all smoke checks passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
