"""Model checkpoints in the shared container format (kind tag ``"model"``).

Header keys: ``format_version``, ``model`` (``"lstm"`` or ``"cnn"``),
``gate_order`` (``"ifgo"``), ``config`` (constructor arguments) and a free
``extra`` dict (normalization parameters, class table). Parameter blobs
follow in store order as float64 row-major arrays named after the store
keys, e.g. ``lstm0.W`` with shape ``(4H, F+H)``.
"""

from __future__ import annotations

from .. import binfmt
from .layers import GATE_ORDER
from .models import CnnClassifier, CnnSpec, LstmRegressor
from .optim import ParamStore

CHECKPOINT_VERSION = 1


def save_model(path, model, extra: dict | None = None) -> None:
    binfmt.dump(path, "model", {
        "format_version": CHECKPOINT_VERSION,
        "model": model.kind,
        "gate_order": GATE_ORDER,
        "config": model.config(),
        "extra": extra or {},
    }, dict(model.store.items()))


def load_model(path):
    """Returns ``(model, extra)``."""
    meta, arrays = binfmt.load(path, "model")
    if meta.get("format_version") != CHECKPOINT_VERSION:
        raise binfmt.FormatError(f"{path}: unsupported checkpoint version {meta.get('format_version')}")
    if meta.get("gate_order") != GATE_ORDER:
        raise binfmt.FormatError(f"{path}: gate order {meta.get('gate_order')!r} != {GATE_ORDER!r}")
    store = ParamStore(arrays)
    cfg = meta["config"]
    if meta["model"] == "lstm":
        model = LstmRegressor(store=store, **cfg)
    elif meta["model"] == "cnn":
        spec = CnnSpec(tuple(tuple(c) for c in cfg["convs"]), cfg["dense_hidden"],
                       cfg["dropout1"], cfg["dropout2"])
        model = CnnClassifier(cfg["side"], cfg["n_classes"], spec,
                              in_channels=cfg["in_channels"], store=store)
    else:
        raise binfmt.FormatError(f"{path}: unknown model kind {meta['model']!r}")
    if meta["model"] == "lstm":
        fresh = LstmRegressor(**cfg)
    else:
        fresh = CnnClassifier(cfg["side"], cfg["n_classes"], model.spec, in_channels=cfg["in_channels"])
    for name, arr in fresh.store.items():
        if name not in store.params or store[name].shape != arr.shape:
            raise binfmt.FormatError(f"{path}: parameter {name!r} missing or misshapen")
    if set(store) != set(fresh.store):
        raise binfmt.FormatError(f"{path}: unexpected parameters {sorted(set(store) - set(fresh.store))}")
    return model, meta.get("extra", {})
