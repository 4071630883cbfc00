"""Training and evaluation pipelines for the LSTM trajectory estimator and
the RSS-image CNN.

Stateful batching
-----------------
Training windows come from a stride-1 sliding window, so window ``i + T``
starts right where window ``i`` ends. An epoch is run as ``T`` phases; phase
``p`` takes windows ``p, p+T, p+2T, ...`` (a gap-free walk along the trace),
cuts them into ``batch`` contiguous lanes and feeds lane ``j`` through batch
row ``j``. The LSTM state is zeroed at the start of every phase and carried
from batch to batch otherwise, so the state entering a window is the state
at the step just before it. Inference uses the same walk with one lane per
phase. Gradients are truncated at window boundaries.

All randomness derives from the config seed through
``SeedSequence(seed).spawn(2)``: the first child seeds weight init, the
second dropout masks and CNN shuffling.
"""

from __future__ import annotations

import configparser
import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import metrics
from .nn.checkpoint import load_model, save_model
from .nn.layers import mse, softmax_crossentropy
from .nn.models import CnnClassifier, CnnSpec, LstmRegressor
from .nn.optim import Adam
from .sequences import MinMaxNorm, SequenceDataset, sliding_window

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


def _seeds(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    a, b = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(a), np.random.default_rng(b)


# ------------------------------------------------------------- configs ----

# INI key -> (field name, type)
_LSTM_KEYS = {
    "ratio_of_training_data": ("split", float),
    "number_of_epochs": ("epochs", int),
    "batch_size": ("batch", int),
    "time_steps": ("time_steps", int),
    "hidden_nodes": ("hidden", int),
    "dropout_rate": ("dropout", float),
    "lstm_layers": ("layers", int),
    "learning_rate": ("lr", float),
    "beta1": ("beta1", float),
    "beta2": ("beta2", float),
    "epsilon": ("eps", float),
    "seed": ("seed", int),
    "accuracy_threshold_m": ("accuracy_threshold_m", float),
}


@dataclass
class LstmPipelineConfig:
    time_steps: int = 30
    hidden: int = 128
    layers: int = 2
    batch: int = 5
    epochs: int = 100
    dropout: float = 0.2
    split: float = 0.75
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    accuracy_threshold_m: float = metrics.DEFAULT_ACCURACY_THRESHOLD_M

    def __post_init__(self):
        if min(self.time_steps, self.hidden, self.layers, self.batch) < 1 or self.epochs < 0:
            raise ValueError("LSTM dimensions must be positive and epochs non-negative")
        if not 0 < self.split < 1:
            raise ValueError("split must be in (0, 1)")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")

    @classmethod
    def from_file(cls, path) -> "LstmPipelineConfig":
        cp = configparser.ConfigParser()
        if not cp.read(path, encoding="utf-8"):
            raise FileNotFoundError(path)
        if "lstm" not in cp:
            raise ValueError(f"{path}: missing [lstm] section")
        kwargs = {}
        for key, value in cp["lstm"].items():
            if key in ("optimizer", "loss"):
                if value.strip().lower() not in ("adam", "mse"):
                    raise ValueError(f"{path}: only optimizer=adam and loss=mse are supported")
                continue
            if key not in _LSTM_KEYS:
                raise ValueError(f"{path}: unknown key {key!r}")
            name, typ = _LSTM_KEYS[key]
            kwargs[name] = typ(value)
        return cls(**kwargs)

    def to_file(self, path) -> None:
        cp = configparser.ConfigParser()
        sec = {"optimizer": "adam", "loss": "mse"}
        for key, (name, _) in _LSTM_KEYS.items():
            sec[key] = repr(getattr(self, name))
        cp["lstm"] = sec
        with open(path, "w", encoding="utf-8") as fh:
            cp.write(fh)


_CNN_KEYS = {
    "number_of_epochs": ("epochs", int),
    "batch_size": ("batch", int),
    "learning_rate": ("lr", float),
    "seed": ("seed", int),
    "dense_hidden": ("dense_hidden", int),
    "dropout_rate_1": ("dropout1", float),
    "dropout_rate_2": ("dropout2", float),
    "holdout_ratio": ("holdout", float),
}


@dataclass
class CnnPipelineConfig:
    convs: tuple = ((8, 3), (16, 3), (16, 3), (32, 3))
    dense_hidden: int = 64
    dropout1: float = 0.25
    dropout2: float = 0.5
    epochs: int = 50
    batch: int = 16
    lr: float = 0.001
    seed: int = 0
    holdout: float = 0.0

    def spec(self) -> CnnSpec:
        return CnnSpec(tuple(tuple(c) for c in self.convs), self.dense_hidden, self.dropout1, self.dropout2)

    @classmethod
    def from_file(cls, path) -> "CnnPipelineConfig":
        cp = configparser.ConfigParser()
        if not cp.read(path, encoding="utf-8"):
            raise FileNotFoundError(path)
        sec = cp["cnn"]
        kwargs = {}
        for key, value in sec.items():
            if key == "convolutions":
                # "8x3, 16x3, ..." -> channels x kernel
                kwargs["convs"] = tuple(tuple(int(t) for t in item.strip().split("x"))
                                        for item in value.split(","))
                continue
            if key not in _CNN_KEYS:
                raise ValueError(f"{path}: unknown key {key!r}")
            name, typ = _CNN_KEYS[key]
            kwargs[name] = typ(value)
        return cls(**kwargs)


# ---------------------------------------------------------------- LSTM ----

def phase_lanes(n: int, T: int, n_lanes: int):
    """Yield ``(reset, window_indices)`` batches for one epoch over ``n``
    windows (see module docstring). Active lanes are always a prefix, so the
    carried state can be truncated to ``len(window_indices)`` rows."""
    for p in range(min(T, n)):
        idx = np.arange(p, n, T)
        lanes = np.array_split(idx, min(n_lanes, len(idx)))
        for k in range(len(lanes[0])):
            yield k == 0, np.array([lane[k] for lane in lanes if len(lane) > k])


def _truncate_state(state, m):
    return [(h[:m], c[:m]) for h, c in state]


def predict_windows(model: LstmRegressor, inputs: np.ndarray) -> np.ndarray:
    """Normalized predictions for every window, stateful along each phase."""
    n, T, _ = inputs.shape
    out = np.empty((n, T, model.out_features))
    if n == 0:
        return out
    phases = [np.arange(p, n, T) for p in range(min(T, n))]
    state = None
    for k in range(len(phases[0])):
        active = np.array([ph[k] for ph in phases if len(ph) > k])
        if state is not None:
            state = _truncate_state(state, len(active))
        y, state, _ = model.forward(inputs[active], state, training=False)
        out[active] = y
    return out


@dataclass
class TrajectoryEstimator:
    """A trained LSTM plus what is needed to map field readings to metres."""

    model: LstmRegressor
    norm: MinMaxNorm
    time_steps: int
    accuracy_threshold_m: float = metrics.DEFAULT_ACCURACY_THRESHOLD_M

    def save(self, path) -> None:
        save_model(path, self.model, {
            "norm": self.norm.to_dict(),
            "time_steps": self.time_steps,
            "accuracy_threshold_m": self.accuracy_threshold_m,
        })

    @classmethod
    def load(cls, path) -> "TrajectoryEstimator":
        model, extra = load_model(path)
        if not isinstance(model, LstmRegressor):
            raise ValueError(f"{path} does not hold an LSTM model")
        return cls(model, MinMaxNorm.from_dict(extra["norm"]), int(extra["time_steps"]),
                   float(extra.get("accuracy_threshold_m", metrics.DEFAULT_ACCURACY_THRESHOLD_M)))

    def predict_windows_m(self, inputs: np.ndarray) -> np.ndarray:
        return self.norm.inverse_targets(predict_windows(self.model, inputs))


def _epoch_eval(est: TrajectoryEstimator, ds: SequenceDataset) -> tuple[float, float]:
    pred = predict_windows(est.model, ds.inputs)
    loss, _ = mse(pred, ds.targets)
    acc = metrics.accuracy(est.norm.inverse_targets(pred), est.norm.inverse_targets(ds.targets),
                           est.accuracy_threshold_m)
    return loss, acc


def train_lstm(cfg: LstmPipelineConfig, train: SequenceDataset, test: SequenceDataset | None = None,
               time_budget_s: float | None = None, progress=None):
    """Fit an LSTM estimator. Returns ``(estimator, history)``.

    ``history`` holds one :class:`metrics.EpochRecord` per finished epoch;
    test loss/accuracy are NaN without a test split. ``time_budget_s`` stops
    after the first epoch that ends past the budget.
    """
    if train.norm is None:
        raise ValueError("training data must be normalized")
    if train.time_steps != cfg.time_steps:
        raise ValueError(f"dataset has {train.time_steps} time steps, config expects {cfg.time_steps}")
    init_rng, drop_rng = _seeds(cfg.seed)
    model = LstmRegressor(train.inputs.shape[2], cfg.hidden, cfg.layers, train.targets.shape[2],
                          cfg.dropout, seed=int(init_rng.integers(2**63)))
    est = TrajectoryEstimator(model, train.norm, cfg.time_steps, cfg.accuracy_threshold_m)
    opt = Adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    history: list[metrics.EpochRecord] = []
    n = len(train)
    t0 = time.perf_counter()
    span = train.norm.out_max - train.norm.out_min
    thr = cfg.accuracy_threshold_m
    for epoch in range(1, cfg.epochs + 1):
        state = None
        loss_sum = 0.0
        hits = 0
        count = 0
        for step, (reset, idx) in enumerate(phase_lanes(n, cfg.time_steps, cfg.batch)):
            if reset:
                state = None
            else:
                state = _truncate_state(state, len(idx))
            x = train.inputs[idx]
            y = train.targets[idx]
            out, state, cache = model.forward(x, state, training=True, rng=drop_rng)
            loss, dout = mse(out, y)
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, step {step}")
            grads = model.backward(cache, dout)
            opt.step(model.store, grads)
            loss_sum += loss * len(idx)
            err = np.sqrt((((out - y) * span) ** 2).sum(axis=-1))
            hits += int((err < thr).sum())
            count += err.size
        rec = metrics.EpochRecord(epoch, loss_sum / n, float("nan"), float("nan"), hits / count)
        if test is not None and len(test):
            rec.test_loss, rec.accuracy = _epoch_eval(est, test)
        history.append(rec)
        log.info("epoch %d train_loss=%.6g test_loss=%.6g acc=%.4f (%.1fs)", epoch, rec.train_loss,
                 rec.test_loss, rec.accuracy, time.perf_counter() - t0)
        if progress is not None:
            progress(rec)
        if time_budget_s is not None and time.perf_counter() - t0 > time_budget_s:
            log.info("time budget reached after epoch %d", epoch)
            break
    return est, history


def evaluate_lstm(est: TrajectoryEstimator, ds: SequenceDataset, label: str = "",
                  history=None) -> metrics.EvalReport:
    """Error statistics in metres over every (window, step) prediction."""
    pred = est.predict_windows_m(ds.inputs)
    truth = est.norm.inverse_targets(ds.targets)
    rep = metrics.error_stats(pred, truth, est.accuracy_threshold_m, label)
    rep.per_epoch = list(history or [])
    return rep


def average_windows(window_preds: np.ndarray, n_steps: int) -> np.ndarray:
    """Average overlapping stride-1 window outputs back onto ``n_steps`` steps."""
    n, T, d = window_preds.shape
    if n != n_steps - T + 1:
        raise ValueError("window count does not match series length")
    acc = np.zeros((n_steps, d))
    cnt = np.zeros((n_steps, 1))
    for j in range(T):
        acc[j:j + n] += window_preds[:, j]
        cnt[j:j + n] += 1
    return acc / cnt


def estimate_trajectory(est: TrajectoryEstimator, geo) -> np.ndarray:
    """Positions in metres, one per field reading (``(T', 3)`` -> ``(T', 2)``)."""
    g = np.asarray(geo, dtype=float)
    if g.ndim != 2 or g.shape[1] != est.model.in_features:
        raise ValueError(f"field sequence must be (steps, {est.model.in_features})")
    if len(g) < est.time_steps:
        raise ValueError(f"sequence of {len(g)} steps is shorter than the window {est.time_steps}")
    x = est.norm.transform_inputs(g)
    ds = sliding_window(x, np.zeros((len(g), est.model.out_features)), est.time_steps)
    pred = predict_windows(est.model, np.ascontiguousarray(ds.inputs))
    return est.norm.inverse_targets(average_windows(pred, len(g)))


# ----------------------------------------------------------------- CNN ----

@dataclass
class CnnHistory:
    epoch: list = field(default_factory=list)
    train_loss: list = field(default_factory=list)
    train_accuracy: list = field(default_factory=list)
    test_accuracy: list = field(default_factory=list)

    def rows(self):
        return list(zip(self.epoch, self.train_loss, self.train_accuracy, self.test_accuracy))


def _cnn_accuracy(model: CnnClassifier, x, labels) -> float:
    if len(x) == 0:
        return float("nan")
    return float(np.mean(model.predict_proba(x).argmax(axis=1) == labels))


def train_cnn(cfg: CnnPipelineConfig, images, labels, n_classes: int | None = None,
              test_images=None, test_labels=None):
    """Cross-entropy training of the RSS-image classifier.

    ``images`` is ``(N, side, side)``. With ``cfg.holdout > 0`` and no
    explicit test set, a seeded random ``holdout`` fraction is held out.
    Returns ``(model, history)``.
    """
    x = np.asarray(images, dtype=float)
    y = np.asarray(labels, dtype=np.int64)
    if x.ndim != 3 or x.shape[1] != x.shape[2]:
        raise ValueError(f"images must be (N, side, side), got {x.shape}")
    if len(np.unique(y)) < 2:
        raise ValueError("need at least two classes to train a classifier")
    init_rng, rng = _seeds(cfg.seed)
    if test_images is None and cfg.holdout > 0:
        perm = rng.permutation(len(x))
        k = int(round(len(x) * cfg.holdout))
        test_images, test_labels = x[perm[:k]], y[perm[:k]]
        x, y = x[perm[k:]], y[perm[k:]]
    n_classes = n_classes or int(max(y.max(), -1 if test_labels is None else np.max(test_labels)) + 1)
    model = CnnClassifier(x.shape[1], n_classes, cfg.spec(), seed=int(init_rng.integers(2**63)))
    opt = Adam(cfg.lr)
    hist = CnnHistory()
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(x))
        total = 0.0
        for s in range(0, len(x), cfg.batch):
            b = order[s:s + cfg.batch]
            logits, cache = model.forward(x[b], training=True, rng=rng)
            loss, d, _ = softmax_crossentropy(logits, y[b])
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {s // cfg.batch}")
            opt.step(model.store, model.backward(cache, d))
            total += loss * len(b)
        hist.epoch.append(epoch)
        hist.train_loss.append(total / len(x))
        hist.train_accuracy.append(_cnn_accuracy(model, x, y))
        hist.test_accuracy.append(float("nan") if test_images is None
                                  else _cnn_accuracy(model, np.asarray(test_images, float), np.asarray(test_labels)))
        log.info("cnn epoch %d loss=%.4f train_acc=%.3f test_acc=%.3f", epoch, hist.train_loss[-1],
                 hist.train_accuracy[-1], hist.test_accuracy[-1])
    return model, hist


def replace_config(cfg, **changes):
    return dataclasses.replace(cfg, **changes)
