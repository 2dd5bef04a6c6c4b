"""Small multilayer perceptron in numpy.

tanh hidden layers, one logistic output giving P(valid), trained with Adam
on mean binary cross-entropy. A model carries its feature mask, scaler and
decision threshold, so raw 20-feature rows can be scored directly with
:meth:`MlpModel.predict_proba`; :meth:`MlpModel.predict_proba_scaled` takes
rows that are already masked and standardized.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._io import write_atomic
from .dataset import N_FEATURES, FeatureMask, Scaler, standardize_apply

FORMAT_VERSION = 1
HIDDEN = (16, 32, 16)
DEFAULT_THRESHOLD = 1e-4
# trained on the bundled corpus by the scripted pipeline with seed 0
SHIPPED_MODEL = Path(__file__).parent / "data" / "model.json"


class TrainingError(RuntimeError):
    pass


class ModelFormatError(ValueError):
    pass


def _sigmoid(z: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1 / (1 + e), e / (1 + e))


@dataclass
class MlpModel:
    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    mask: FeatureMask | None = None
    scaler: Scaler | None = None
    threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        sizes = self.layer_sizes
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ValueError("one weight matrix and bias vector per layer")
        for w, b, n_in, n_out in zip(self.weights, self.biases, sizes, sizes[1:]):
            if w.shape != (n_in, n_out) or b.shape != (n_out,):
                raise ValueError(f"layer shape {w.shape}/{b.shape} does not match {n_in}->{n_out}")
        if self.mask is not None and self.mask.k != sizes[0]:
            raise ValueError(f"mask keeps {self.mask.k} features, network takes {sizes[0]}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")

    def params(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def logits(self, X: np.ndarray) -> np.ndarray:
        a = np.atleast_2d(np.asarray(X, dtype=float))
        if a.shape[1] != self.layer_sizes[0]:
            raise ValueError(f"expected {self.layer_sizes[0]} inputs, got {a.shape[1]}")
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            a = np.tanh(a @ w + b)
        return (a @ self.weights[-1] + self.biases[-1])[:, 0]

    def predict_proba_scaled(self, X: np.ndarray) -> np.ndarray:
        return _sigmoid(self.logits(X))

    def prepare(self, X_raw: np.ndarray) -> np.ndarray:
        """Standardize raw 20-feature rows and apply the mask."""
        X_raw = np.atleast_2d(np.asarray(X_raw, dtype=float))
        if X_raw.shape[1] != N_FEATURES:
            raise ValueError(f"raw rows must have {N_FEATURES} features")
        Z = standardize_apply(self.scaler, X_raw) if self.scaler is not None else X_raw
        return self.mask.apply(Z) if self.mask is not None else Z

    def predict_proba(self, X_raw: np.ndarray) -> np.ndarray:
        return self.predict_proba_scaled(self.prepare(X_raw))


def forward(m: MlpModel, x) -> float:
    """P(valid) for one already-prepared row."""
    return float(m.predict_proba_scaled(np.asarray(x, dtype=float)[None, :])[0])


def init(layer_sizes, seed: int = 0) -> MlpModel:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    ws, bs = [], []
    for n_in, n_out in zip(layer_sizes, layer_sizes[1:]):
        bound = math.sqrt(6.0 / (n_in + n_out))
        ws.append(rng.uniform(-bound, bound, size=(n_in, n_out)))
        bs.append(np.zeros(n_out))
    return MlpModel(list(layer_sizes), ws, bs)


def loss_and_grads(m: MlpModel, X: np.ndarray, y: np.ndarray) -> tuple[float, list[np.ndarray]]:
    """Mean binary cross-entropy and its gradient, ordered like :meth:`MlpModel.params`."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    acts = [X]
    a = X
    for w, b in zip(m.weights[:-1], m.biases[:-1]):
        a = np.tanh(a @ w + b)
        acts.append(a)
    z = (a @ m.weights[-1] + m.biases[-1])[:, 0]
    n = len(y)
    # log(1 + e^z) - y z, stable in both tails
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    delta = ((_sigmoid(z) - y) / n)[:, None]
    grads: list[np.ndarray] = []
    for layer in range(len(m.weights) - 1, -1, -1):
        grads.append(delta.sum(axis=0))
        grads.append(acts[layer].T @ delta)
        if layer:
            delta = (delta @ m.weights[layer].T) * (1.0 - acts[layer] ** 2)
    grads.reverse()
    return loss, grads


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 400
    batch_size: int = 200
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.epochs <= 0 or self.batch_size <= 0:
            raise ValueError("epochs and batch_size must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


def train(X: np.ndarray, y: np.ndarray, cfg: TrainConfig = TrainConfig(),
          hidden=HIDDEN, model: MlpModel | None = None) -> tuple[MlpModel, list[float]]:
    """Fit on prepared rows ``X``; returns the model and per-epoch mean loss."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(X) == 0:
        raise TrainingError("empty training set")
    m = model or init([X.shape[1], *hidden, 1], cfg.seed)
    rng = np.random.default_rng(cfg.seed + 1)
    params = m.params()
    mom = [np.zeros_like(p) for p in params]
    vel = [np.zeros_like(p) for p in params]
    step = 0
    curve: list[float] = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(X))
        total = 0.0
        for start in range(0, len(X), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grads = loss_and_grads(m, X[idx], y[idx])
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss {loss} at epoch {epoch}, step {step}")
            total += loss * len(idx)
            step += 1
            c1 = 1 - cfg.beta1 ** step
            c2 = 1 - cfg.beta2 ** step
            for p, g, mo, ve in zip(params, grads, mom, vel):
                mo *= cfg.beta1
                mo += (1 - cfg.beta1) * g
                ve *= cfg.beta2
                ve += (1 - cfg.beta2) * g * g
                p -= cfg.learning_rate * (mo / c1) / (np.sqrt(ve / c2) + cfg.eps)
        curve.append(total / len(X))
    return m, curve


def gradient_check(m: MlpModel, X: np.ndarray, y: np.ndarray, eps: float = 1e-5) -> float:
    """Largest relative gap between backprop and central finite differences."""
    _, grads = loss_and_grads(m, X, y)
    worst = 0.0
    for p, g in zip(m.params(), grads):
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + eps
            up, _ = loss_and_grads(m, X, y)
            flat[i] = old - eps
            down, _ = loss_and_grads(m, X, y)
            flat[i] = old
            num = (up - down) / (2 * eps)
            # the floor keeps exact zeros (e.g. a zero-weight net) from dividing by zero
            rel = abs(num - gflat[i]) / max(abs(num) + abs(gflat[i]), 1e-8)
            worst = max(worst, rel)
    return worst


# ------------------------------------------------------------------ metrics

@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float
    accuracy: float
    recall_valid: float
    recall_invalid: float
    tn: int
    fp: int
    fn: int
    tp: int

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _ratio(a: float, b: float) -> float:
    return a / b if b else 0.0


def metrics_from_predictions(y_true, y_pred) -> Metrics:
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    tp = int(((y_pred == 1) & (y_true == 1)).sum())
    tn = int(((y_pred == 0) & (y_true == 0)).sum())
    fp = int(((y_pred == 1) & (y_true == 0)).sum())
    fn = int(((y_pred == 0) & (y_true == 1)).sum())
    p1, r1 = _ratio(tp, tp + fp), _ratio(tp, tp + fn)
    p0, r0 = _ratio(tn, tn + fn), _ratio(tn, tn + fp)
    f1_1 = _ratio(2 * p1 * r1, p1 + r1)
    f1_0 = _ratio(2 * p0 * r0, p0 + r0)
    return Metrics((p0 + p1) / 2, (r0 + r1) / 2, (f1_0 + f1_1) / 2,
                   _ratio(tp + tn, len(y_true)), r1, r0, tn, fp, fn, tp)


def evaluate(m: MlpModel, X_raw: np.ndarray, y, threshold: float | None = None) -> Metrics:
    t = m.threshold if threshold is None else threshold
    if not 0.0 <= t <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    return metrics_from_predictions(y, m.predict_proba(X_raw) >= t)


def roc_points(m: MlpModel, X_raw: np.ndarray, y) -> list[tuple[float, float, float]]:
    """(threshold, fpr, tpr) from just above 1 down to 0."""
    y = np.asarray(y, dtype=int)
    pos, neg = int((y == 1).sum()), int((y == 0).sum())
    if not pos or not neg:
        raise ValueError("ROC needs both classes")
    scores = m.predict_proba(X_raw)
    thresholds = sorted(set(scores.tolist()) | {0.0, 1.0, float(np.nextafter(1.0, 2.0))},
                        reverse=True)
    out = []
    for t in thresholds:
        pred = scores >= t
        out.append((t, float((pred & (y == 0)).sum() / neg), float((pred & (y == 1)).sum() / pos)))
    return out


# ----------------------------------------------------------- serialization

def to_dict(m: MlpModel) -> dict:
    return {
        "version": FORMAT_VERSION,
        "layer_sizes": list(m.layer_sizes),
        "mask": list(m.mask.indices) if m.mask else None,
        "scaler_mean": m.scaler.mean.tolist() if m.scaler else None,
        "scaler_std": m.scaler.std.tolist() if m.scaler else None,
        "threshold": m.threshold,
        "activation": {"hidden": "tanh", "output": "sigmoid"},
        "weights": [w.tolist() for w in m.weights],
        "biases": [b.tolist() for b in m.biases],
    }


def from_dict(d: dict) -> MlpModel:
    if d.get("version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model version {d.get('version')!r}, "
                               f"expected {FORMAT_VERSION}")
    try:
        mask = FeatureMask(tuple(d["mask"])) if d["mask"] is not None else None
        scaler = None
        if d["scaler_mean"] is not None:
            scaler = Scaler(np.array(d["scaler_mean"], dtype=float),
                            np.array(d["scaler_std"], dtype=float))
            if scaler.mean.shape != (N_FEATURES,) or scaler.std.shape != (N_FEATURES,):
                raise ModelFormatError("scaler must cover all raw features")
        return MlpModel(list(d["layer_sizes"]),
                        [np.array(w, dtype=float).reshape(a, b) for w, a, b in
                         zip(d["weights"], d["layer_sizes"], d["layer_sizes"][1:])],
                        [np.array(b, dtype=float) for b in d["biases"]],
                        mask, scaler, float(d["threshold"]))
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, ModelFormatError):
            raise
        raise ModelFormatError(f"corrupt model file: {e}") from e


def save(m: MlpModel, path: str | Path) -> None:
    write_atomic(path, json.dumps(to_dict(m), indent=1) + "\n")


def load(path: str | Path = SHIPPED_MODEL) -> MlpModel:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"{path}: not a model file ({e})") from e
    return from_dict(d)

