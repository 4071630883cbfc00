import numpy as np
import pytest

from indoorloc.geomap import TestBed
from indoorloc.mobility import RwpConfig, generate_traces
from indoorloc.nn.models import LstmRegressor
from indoorloc.pipelines import (
    CnnPipelineConfig, LstmPipelineConfig, TrainingError, TrajectoryEstimator, average_windows,
    estimate_trajectory, evaluate_lstm, phase_lanes, predict_windows, replace_config, train_cnn,
    train_lstm,
)
from indoorloc.sequences import SequenceDataset, build_dataset, normalize, sliding_window
from indoorloc.synthetic import linear_field, linear_map, separable_rss
from indoorloc.rss_image import build_layout, render_batch
from indoorloc.database import Database, FingerprintRecord

BED = TestBed(6, 2.4)


def small_split(steps=400, T=8, seed=0):
    tr = generate_traces(RwpConfig(BED, steps, seed=seed), 1)
    return normalize(build_dataset(tr, linear_map(BED), T), 0.75)


@pytest.mark.parametrize("n,T,lanes", [(71, 30, 5), (10, 3, 4), (5, 8, 2), (100, 1, 7), (40, 4, 1)])
def test_phase_lanes_walk(n, T, lanes):
    seen = []
    prev = None
    for reset, idx in phase_lanes(n, T, lanes):
        seen.extend(idx.tolist())
        if not reset:
            # each surviving lane advances by exactly one window length
            np.testing.assert_array_equal(idx, prev[:len(idx)] + T)
        else:
            assert idx[0] < T
        prev = idx
    assert sorted(seen) == list(range(n))


def test_predict_windows_equals_one_long_pass():
    rng = np.random.default_rng(0)
    model = LstmRegressor(3, 6, 2, 2, dropout=0.0, seed=1)
    series = rng.normal(size=(47, 3))
    T = 5
    ds = sliding_window(series, np.zeros((47, 2)), T)
    pred = predict_windows(model, ds.inputs)
    for p in range(T):
        idx = np.arange(p, len(ds), T)
        full, _, _ = model.forward(series[None, p:p + len(idx) * T])
        np.testing.assert_allclose(pred[idx].reshape(-1, 2), full[0], atol=1e-12)


def test_average_windows_manual():
    rng = np.random.default_rng(1)
    w = rng.normal(size=(7, 4, 2))
    got = average_windows(w, 10)
    for s in range(10):
        vals = [w[i, s - i] for i in range(7) if 0 <= s - i < 4]
        np.testing.assert_allclose(got[s], np.mean(vals, axis=0), atol=1e-15)
    with pytest.raises(ValueError):
        average_windows(w, 11)


def test_training_deterministic_and_loss_decreasing():
    train, test = small_split()
    cfg = LstmPipelineConfig(time_steps=8, hidden=12, batch=4, epochs=6, seed=5, lr=0.01)
    e1, h1 = train_lstm(cfg, train, test)
    e2, h2 = train_lstm(cfg, train, test)
    for k, v in e1.model.store.items():
        assert v.tobytes() == e2.model.store[k].tobytes()
    assert [r.train_loss for r in h1] == [r.train_loss for r in h2]
    losses = [r.train_loss for r in h1]
    assert losses[-1] < losses[0]
    assert all(b <= a * 1.05 for a, b in zip(losses, losses[1:]))
    e3, _ = train_lstm(replace_config(cfg, seed=6), train, test)
    assert e3.model.store["dense.W"].tobytes() != e1.model.store["dense.W"].tobytes()


def test_history_and_evaluation_fields():
    train, test = small_split()
    cfg = LstmPipelineConfig(time_steps=8, hidden=8, batch=5, epochs=2, seed=0)
    est, hist = train_lstm(cfg, train, test)
    assert [r.epoch for r in hist] == [1, 2]
    assert all(0 <= r.accuracy <= 1 and r.test_loss >= 0 for r in hist)
    rep = evaluate_lstm(est, test, "x", hist)
    assert rep.n_samples == len(test) * 8 and len(rep.per_epoch) == 2
    assert rep.p95_whisker[0] <= rep.p75_box[0] <= rep.median_err_m <= rep.p75_box[1] <= rep.p95_whisker[1]


def test_time_budget_stops_early():
    train, test = small_split()
    cfg = LstmPipelineConfig(time_steps=8, hidden=8, batch=5, epochs=50, seed=0)
    _, hist = train_lstm(cfg, train, None, time_budget_s=0.0)
    assert len(hist) == 1 and np.isnan(hist[0].test_loss)


def test_training_errors():
    train, test = small_split()
    with pytest.raises(ValueError):
        train_lstm(LstmPipelineConfig(time_steps=9), train)
    bad = SequenceDataset(train.inputs.copy(), train.targets, train.norm)
    bad.inputs[0, 0, 0] = np.nan
    with pytest.raises(TrainingError):
        train_lstm(LstmPipelineConfig(time_steps=8, hidden=4, epochs=1), bad)


def test_estimator_round_trip_and_trajectory(tmp_path):
    train, test = small_split()
    est, _ = train_lstm(LstmPipelineConfig(time_steps=8, hidden=8, batch=5, epochs=1), train)
    est.save(tmp_path / "m.bin")
    back = TrajectoryEstimator.load(tmp_path / "m.bin")
    assert back.norm == est.norm and back.time_steps == 8
    pos = generate_traces(RwpConfig(BED, 30, seed=9), 1)[0].positions
    geo = linear_field(pos[:, 0], pos[:, 1])
    a = estimate_trajectory(est, geo)
    assert a.shape == (30, 2)
    np.testing.assert_array_equal(a, estimate_trajectory(back, geo))
    with pytest.raises(ValueError):
        estimate_trajectory(est, geo[:5])


def test_config_files(tmp_path):
    cfg = LstmPipelineConfig(hidden=512, batch=20, seed=3)
    cfg.to_file(tmp_path / "a.ini")
    assert LstmPipelineConfig.from_file(tmp_path / "a.ini") == cfg
    (tmp_path / "b.ini").write_text("[lstm]\nhidden_nodes = 64\nfoo = 1\n")
    with pytest.raises(ValueError, match="foo"):
        LstmPipelineConfig.from_file(tmp_path / "b.ini")
    (tmp_path / "c.ini").write_text("[cnn]\nconvolutions = 4x3, 8x3\nnumber_of_epochs = 3\n")
    c = CnnPipelineConfig.from_file(tmp_path / "c.ini")
    assert c.convs == ((4, 3), (8, 3)) and c.epochs == 3
    with pytest.raises(ValueError):
        LstmPipelineConfig(split=1.5)


def _images(n_classes, per_class, seed):
    rss, labels = separable_rss(n_classes, per_class, seed)
    recs = [FingerprintRecord(tuple(int(v) for v in r), 0, 0, "4", "B", (0.0,) * 3, (0.0,) * 3) for r in rss]
    return render_batch(rss, build_layout(Database(tuple(recs)))), labels


def test_cnn_learns_small_separable_set():
    x, y = _images(4, 8, 0)
    cfg = CnnPipelineConfig(convs=((4, 3), (8, 3)), dense_hidden=16, epochs=15, batch=8, lr=0.003)
    model, hist = train_cnn(cfg, x, y)
    assert hist.train_accuracy[-1] > 0.95
    m2, h2 = train_cnn(cfg, x, y)
    assert hist.train_loss == h2.train_loss
    with pytest.raises(ValueError):
        train_cnn(cfg, x, np.zeros(len(x), dtype=int))
