"""MLLP construction and training with Random Binarization.

Layer ``l`` (1-based) is a conjunction layer when ``l`` is odd and a
disjunction layer when even. During training, each epoch draws a Bernoulli
mask per weight; masked weights are replaced by their binarized value in the
forward pass and receive no update, while the continuous master weights are
kept untouched underneath.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import _kernels, logic
from .binarizer import BinarizedDataset, FeatureDictionary
from .crs import CrsModel
from .errors import ConfigError, DataError, DimensionError, NumericError

log = logging.getLogger(__name__)

MODEL_FORMAT = "mllp.model"
FORMAT_VERSION = 1
OPTIMIZERS = ("sgd", "adam")


def default_hidden_width(n_features: int) -> int:
    """Smallest power of two >= 2J, clamped to [32, 256]."""
    w = 1
    while w < 2 * n_features:
        w *= 2
    return max(32, min(256, w))


def default_widths(n_features: int, n_classes: int, n_logical: int = 4, hidden: int | None = None) -> list[int]:
    if n_logical < 2 or n_logical % 2:
        raise ConfigError(f"number of logical layers must be even and >= 2, got {n_logical}")
    h = hidden or default_hidden_width(n_features)
    return [n_features] + [h] * (n_logical - 1) + [n_classes]


@dataclass
class TrainConfig:
    layer_widths: list[int]
    epochs: int = 400
    batch_size: int = 128
    lr: float = 0.05
    lr_decay_factor: float = 0.75
    lr_decay_every: int = 100
    weight_decay: float = 1e-8
    rb_rate: float = 0.0
    threshold: float = 0.5
    seed: int = 0
    optimizer: str = "adam"

    def __post_init__(self):
        self.layer_widths = [int(w) for w in self.layer_widths]
        self.validate()

    def validate(self) -> None:
        w = self.layer_widths
        if len(w) < 3 or len(w) % 2 == 0:
            raise ConfigError(f"layer_widths needs an odd length >= 3 (input + 2L layers), got {w}")
        if any(x < 1 for x in w):
            raise ConfigError(f"layer widths must be >= 1, got {w}")
        if self.epochs < 0 or self.batch_size < 1 or self.lr_decay_every < 1:
            raise ConfigError("epochs >= 0, batch_size >= 1 and lr_decay_every >= 1 required")
        if not 0.0 <= self.rb_rate <= 1.0:
            raise ConfigError(f"rb_rate must lie in [0, 1], got {self.rb_rate}")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError(f"threshold must lie in (0, 1), got {self.threshold}")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {OPTIMIZERS}")

    @property
    def n_logical(self) -> int:
        return len(self.layer_widths) - 1

    def replace(self, **changes) -> "TrainConfig":
        d = asdict(self)
        d.update(changes)
        return TrainConfig(**d)


def layer_kind(l: int) -> str:
    """Kind of logical layer ``l`` (1-based)."""
    return "conjunction" if l % 2 == 1 else "disjunction"


@dataclass
class MllpModel:
    weights: list[np.ndarray]  # weights[l-1] has shape (n_l, n_{l-1})
    config: TrainConfig
    dictionary: FeatureDictionary | None = None
    label_order: list[str] = field(default_factory=list)
    majority_class: int = 0  # majority class of the training data, the CRS fallback

    @property
    def widths(self) -> list[int]:
        return [self.weights[0].shape[1]] + [W.shape[0] for W in self.weights]

    def copy(self) -> "MllpModel":
        return MllpModel([W.copy() for W in self.weights], self.config, self.dictionary,
                         list(self.label_order), self.majority_class)

    def to_json(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": FORMAT_VERSION,
            "kind": "mllp",
            "widths": self.widths,
            "layer_kinds": [layer_kind(l) for l in range(1, len(self.weights) + 1)],
            "weights": [W.tolist() for W in self.weights],
            "config": asdict(self.config),
            "seed": self.config.seed,
            "label_order": self.label_order,
            "majority_class": self.majority_class,
            "dictionary": self.dictionary.to_json() if self.dictionary else None,
        }

    @classmethod
    def from_json(cls, d: dict) -> "MllpModel":
        if d.get("format") != MODEL_FORMAT or d.get("version") != FORMAT_VERSION or d.get("kind") != "mllp":
            raise DataError("not a version-1 MLLP model document")
        dic = FeatureDictionary.from_json(d["dictionary"]) if d.get("dictionary") else None
        return cls(
            [np.asarray(W, dtype=float).reshape(n, m) for W, n, m in zip(d["weights"], d["widths"][1:], d["widths"][:-1])],
            TrainConfig(**d["config"]),
            dic,
            list(d.get("label_order", [])),
            int(d.get("majority_class", 0)),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "MllpModel":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def init_model(config: TrainConfig, dictionary: FeatureDictionary | None = None,
               label_order: list[str] | None = None) -> MllpModel:
    """All weights i.i.d. Uniform(0, 0.1), drawn from ``config.seed``."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    w = config.layer_widths
    weights = [rng.uniform(0.0, 0.1, size=(w[l], w[l - 1])) for l in range(1, len(w))]
    return MllpModel(weights, config, dictionary, list(label_order or []))


@dataclass
class MaskSet:
    masks: list[np.ndarray]
    rb_rate: float
    epoch: int = 0


def sample_masks(model: MllpModel, rb_rate: float, rng: np.random.Generator, epoch: int = 0) -> MaskSet:
    if not 0.0 <= rb_rate <= 1.0:
        raise ConfigError(f"rb_rate must lie in [0, 1], got {rb_rate}")
    masks = [(rng.uniform(0.0, 1.0, size=W.shape) < rb_rate).astype(np.float64) for W in model.weights]
    return MaskSet(masks, rb_rate, epoch)


def effective_weights(W, M, threshold: float = 0.5) -> np.ndarray:
    W = np.asarray(W, dtype=float)
    M = np.asarray(M)
    if W.shape != M.shape:
        raise DimensionError(f"mask shape {M.shape} differs from weights {W.shape}")
    return np.where(M > 0, logic.binarize_weight(W, threshold), W)


def _effective(model: MllpModel, masks: MaskSet | None) -> list[np.ndarray]:
    if masks is None:
        return model.weights
    return [effective_weights(W, M, model.config.threshold) for W, M in zip(model.weights, masks.masks)]


def _is_binary(X: np.ndarray) -> bool:
    return bool(np.all((X == 0) | (X == 1)))


def forward(model: MllpModel, masks: MaskSet | None, X, weights: list[np.ndarray] | None = None):
    """Run the network on ``X`` (shape ``(J,)`` or ``(B, J)``).

    Returns the list of activations ``[X, h1, ..., h_2L]`` (batched) and a
    cache consumed by :func:`backward`.
    """
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    Ws = weights if weights is not None else _effective(model, masks)
    if X.shape[1] != Ws[0].shape[1]:
        raise DimensionError(f"input has {X.shape[1]} features, model expects {Ws[0].shape[1]}")
    acts = [X]
    cache: dict = {"weights": Ws, "first": None}
    for l, W in enumerate(Ws, start=1):
        H = acts[-1]
        if l == 1 and _is_binary(H):
            out, cache["first"] = logic.conj_binary_input_forward(H, W)
        elif l % 2 == 1:
            out = _kernels.conj_forward(H, W)
        else:
            out = _kernels.disj_forward(H, W)
        acts.append(out)
    if single:
        return [a[0] for a in acts], cache
    return acts, cache


def predict_proba(model: MllpModel, X, batch: int = 512) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    outs = [forward(model, None, X[i:i + batch])[0][-1] for i in range(0, X.shape[0], batch)]
    return np.concatenate(outs) if outs else np.zeros((0, model.widths[-1]))


def predict_mllp(model: MllpModel, X) -> np.ndarray:
    """Argmax decoding of the continuous outputs (first index on ties)."""
    return predict_proba(model, X).argmax(axis=1)


def loss(outputs, targets, model: MllpModel | None = None, weight_decay: float = 0.0) -> float:
    """Batch-mean per-instance MSE plus ``weight_decay * sum(W**2)``."""
    outputs = np.asarray(outputs, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if outputs.shape != targets.shape:
        raise DimensionError(f"outputs {outputs.shape} vs targets {targets.shape}")
    mse = float(np.mean((outputs - targets) ** 2))
    reg = 0.0
    if model is not None and weight_decay:
        reg = weight_decay * float(sum(np.sum(W * W) for W in model.weights))
    return mse + reg


def backward(acts, cache, targets) -> list[np.ndarray]:
    """Gradients of the batch MSE w.r.t. the effective weights."""
    Ws = cache["weights"]
    out = acts[-1]
    up = 2.0 * (out - np.asarray(targets, dtype=float)) / out.size
    grads: list[np.ndarray] = [None] * len(Ws)  # type: ignore[list-item]
    for l in range(len(Ws), 0, -1):
        W, H = Ws[l - 1], acts[l - 1]
        if l == 1 and cache["first"] is not None:
            grads[0] = logic.conj_binary_input_backward(W, up, cache["first"])
            break
        fn = _kernels.conj_backward if l % 2 == 1 else _kernels.disj_backward
        grads[l - 1], up = fn(H, W, up, l > 1)
    return grads


@dataclass
class EpochLog:
    epoch: int
    lr: float
    loss: float
    crs_f1: float | None = None


class _Adam:
    def __init__(self, shapes, b1=0.9, b2=0.999, eps=1e-8):
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.b1, self.b2, self.eps, self.t = b1, b2, eps, 0

    def steps(self, grads, lr):
        self.t += 1
        out = []
        for m, v, g in zip(self.m, self.v, grads):
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            mh = m / (1 - self.b1 ** self.t)
            vh = v / (1 - self.b2 ** self.t)
            out.append(lr * mh / (np.sqrt(vh) + self.eps))
        return out


def train(
    model: MllpModel,
    data: BinarizedDataset,
    config: TrainConfig | None = None,
    on_step: Callable | None = None,
    on_epoch: Callable[[EpochLog, MllpModel], None] | None = None,
) -> tuple[MllpModel, list[EpochLog]]:
    """Mini-batch training; returns a new model and the per-epoch log.

    Gradients of masked entries (data term and L2 term alike) are multiplied
    by ``1 - M`` and the update itself is gated the same way, so masked
    master weights stay bitwise unchanged. Weights are clipped to [0, 1]
    after every step. ``on_step(model, masks, step)`` runs after each update.
    """
    config = config or model.config
    config.validate()
    if data.features.shape[1] != model.widths[0] or data.labels.shape[1] != model.widths[-1]:
        raise DimensionError(
            f"data is {data.features.shape[1]} -> {data.labels.shape[1]}, model is {model.widths[0]} -> {model.widths[-1]}"
        )
    model = model.copy()
    model.config = config
    model.majority_class = majority_class(data.labels)
    rng = np.random.default_rng([config.seed, 1])
    X = data.features.astype(np.float64)
    Y = data.labels.astype(np.float64)
    n = X.shape[0]
    adam = _Adam([W.shape for W in model.weights]) if config.optimizer == "adam" else None
    history: list[EpochLog] = []
    step = 0
    for epoch in range(1, config.epochs + 1):
        lr = config.lr * config.lr_decay_factor ** ((epoch - 1) // config.lr_decay_every)
        masks = sample_masks(model, config.rb_rate, rng, epoch)
        keep = [1.0 - M for M in masks.masks]
        order = rng.permutation(n)
        total, seen = 0.0, 0
        for b, start in enumerate(range(0, n, config.batch_size), start=1):
            idx = order[start:start + config.batch_size]
            Ws = _effective(model, masks)
            acts, cache = forward(model, masks, X[idx], weights=Ws)
            batch_loss = loss(acts[-1], Y[idx], model, config.weight_decay)
            if not math.isfinite(batch_loss):
                norms = [float(np.linalg.norm(W)) for W in model.weights]
                raise NumericError(f"non-finite loss at epoch {epoch}, batch {b}; layer norms {norms}")
            grads = backward(acts, cache, Y[idx])
            grads = [(g + 2.0 * config.weight_decay * W) * k for g, W, k in zip(grads, model.weights, keep)]
            deltas = adam.steps(grads, lr) if adam else [lr * g for g in grads]
            for W, d, k in zip(model.weights, deltas, keep):
                W -= d * k
                np.clip(W, 0.0, 1.0, out=W)
            total += batch_loss * len(idx)
            seen += len(idx)
            step += 1
            if on_step is not None:
                on_step(model, masks, step)
        entry = EpochLog(epoch, lr, total / max(seen, 1))
        if on_epoch is not None:
            on_epoch(entry, model)
        history.append(entry)
        log.debug("epoch %d lr %.3g loss %.6f", epoch, lr, entry.loss)
    return model, history


def majority_class(Y) -> int:
    """Most frequent class of a one-hot label matrix (lowest index on ties)."""
    return int(np.argmax(np.asarray(Y).sum(axis=0)))


def extract_crs(model: MllpModel, threshold: float | None = None, fallback_class: int | None = None) -> CrsModel:
    """Binarize every weight at the threshold; the fallback defaults to the training majority class."""
    t = model.config.threshold if threshold is None else threshold
    if fallback_class is None:
        fallback_class = model.majority_class
    layers = [(W > t).astype(np.uint8) for W in model.weights]
    return CrsModel(layers, model.dictionary, fallback_class, list(model.label_order))
