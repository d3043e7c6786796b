"""Small fully connected regressor with hand-written backprop and Adam."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "TrainConfig",
    "MlpModel",
    "TrainingDiverged",
    "ModelFormatError",
    "init_mlp",
    "mlp_forward",
    "loss_and_grads",
    "gradient_check",
    "train",
]

DEFAULT_LAYERS = (2, 32, 64, 1)


class TrainingDiverged(RuntimeError):
    pass


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1000
    learning_rate: float = 0.06
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.epochs <= 0:
            raise ValueError("epochs must be positive")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1) or not self.eps > 0:
            raise ValueError("invalid Adam constants")


@dataclass
class MlpModel:
    """tanh hidden layers, linear output, z-scored inputs and target.

    ``weights[k]`` has shape ``(layer_sizes[k], layer_sizes[k + 1])``.
    """

    layer_sizes: tuple
    weights: list
    biases: list
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: float = 0.0
    y_std: float = 1.0
    seed: int = 0
    config: dict = field(default_factory=dict)
    trained: bool = False

    def __post_init__(self):
        self.layer_sizes = tuple(int(n) for n in self.layer_sizes)
        self.weights = [np.asarray(w, dtype=float) for w in self.weights]
        self.biases = [np.asarray(b, dtype=float) for b in self.biases]
        self.x_mean = np.asarray(self.x_mean, dtype=float)
        self.x_std = np.asarray(self.x_std, dtype=float)
        sizes = self.layer_sizes
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ModelFormatError("layer count mismatch")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[k], sizes[k + 1]) or b.shape != (sizes[k + 1],):
                raise ModelFormatError(f"layer {k} has wrong shape")
        if self.x_mean.shape != (sizes[0],) or self.x_std.shape != (sizes[0],):
            raise ModelFormatError("normalisation constants have wrong shape")
        if np.any(self.x_std <= 0) or not self.y_std > 0:
            raise ModelFormatError("normalisation stds must be positive")
        if not all(np.isfinite(a).all() for a in self.weights + self.biases):
            raise ModelFormatError("non-finite parameters")

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def params(self) -> list:
        """Parameter arrays in a fixed order: W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "MlpModel":
        return MlpModel(self.layer_sizes, [w.copy() for w in self.weights],
                        [b.copy() for b in self.biases], self.x_mean.copy(), self.x_std.copy(),
                        self.y_mean, self.y_std, self.seed, dict(self.config), self.trained)

    def __call__(self, x):
        return mlp_forward(self, x)

    # persistence
    def to_dict(self) -> dict:
        return {
            "layer_sizes": list(self.layer_sizes),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "norms": {"x_mean": self.x_mean.tolist(), "x_std": self.x_std.tolist(),
                      "y_mean": self.y_mean, "y_std": self.y_std},
            "seed": self.seed,
            "config": self.config,
            "trained": self.trained,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpModel":
        try:
            n = d["norms"]
            return cls(d["layer_sizes"], d["weights"], d["biases"], n["x_mean"], n["x_std"],
                       float(n["y_mean"]), float(n["y_std"]), int(d.get("seed", 0)),
                       dict(d.get("config", {})), bool(d.get("trained", True)))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ModelFormatError):
                raise
            raise ModelFormatError(f"malformed model: {exc}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "MlpModel":
        return cls.from_dict(json.loads(text))


def init_mlp(layer_sizes=DEFAULT_LAYERS, seed: int = 0) -> MlpModel:
    """Glorot-uniform weights, zero biases, identity normalisation."""
    rng = np.random.default_rng(seed)
    ws, bs = [], []
    for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        lim = math.sqrt(6.0 / (n_in + n_out))
        ws.append(rng.uniform(-lim, lim, size=(n_in, n_out)))
        bs.append(np.zeros(n_out))
    n0 = layer_sizes[0]
    return MlpModel(tuple(layer_sizes), ws, bs, np.zeros(n0), np.ones(n0), seed=seed)


def _as_batch(model, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != model.layer_sizes[0]:
        raise ValueError(f"expected {model.layer_sizes[0]} features, got {x.shape[1]}")
    if not np.isfinite(x).all():
        raise ValueError("non-finite input")
    return x, single


def _forward_norm(weights, biases, z):
    """Forward pass on normalised inputs; returns output and activations."""
    acts = [z]
    a = z
    last = len(weights) - 1
    for k, (w, b) in enumerate(zip(weights, biases)):
        a = a @ w + b
        if k < last:
            a = np.tanh(a)
        acts.append(a)
    return a[:, 0], acts


def mlp_forward(model: MlpModel, x):
    """Prediction in target units for one sample (shape (n_in,)) or a batch."""
    x, single = _as_batch(model, x)
    out, _ = _forward_norm(model.weights, model.biases, (x - model.x_mean) / model.x_std)
    y = out * model.y_std + model.y_mean
    return float(y[0]) if single else y


def loss_and_grads(weights, biases, z, t):
    """MSE on normalised data and its gradient for every weight and bias."""
    pred, acts = _forward_norm(weights, biases, z)
    n = len(t)
    err = pred - t
    loss = float(err @ err / n)
    delta = (2.0 / n) * err[:, None]
    gw = [None] * len(weights)
    gb = [None] * len(weights)
    for k in range(len(weights) - 1, -1, -1):
        gw[k] = acts[k].T @ delta
        gb[k] = delta.sum(axis=0)
        if k:
            delta = (delta @ weights[k].T) * (1.0 - acts[k] ** 2)
    return loss, gw, gb


def _normalise(model, X, y):
    return (X - model.x_mean) / model.x_std, (y - model.y_mean) / model.y_std


def gradient_check(model: MlpModel, X, y, n_probes: int = 100, h: float = 1e-6,
                   seed: int = 0) -> np.ndarray:
    """Relative errors between backprop and central differences at random parameters.

    Each probe perturbs one randomly chosen scalar parameter. The relative
    error is ``|g - g_fd| / max(|g|, |g_fd|, 1e-8)``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    z, t = _normalise(model, X, y)
    ws = [w.copy() for w in model.weights]
    bs = [b.copy() for b in model.biases]
    _, gw, gb = loss_and_grads(ws, bs, z, t)
    flat = []
    for k in range(len(ws)):
        flat += [(ws[k], gw[k]), (bs[k], gb[k])]
    sizes = np.array([p.size for p, _ in flat])
    rng = np.random.default_rng(seed)
    errs = np.empty(n_probes)
    for i in range(n_probes):
        which = int(rng.choice(len(flat), p=sizes / sizes.sum()))
        p, g = flat[which]
        idx = np.unravel_index(int(rng.integers(p.size)), p.shape)
        keep = p[idx]
        p[idx] = keep + h
        lp = loss_and_grads(ws, bs, z, t)[0]
        p[idx] = keep - h
        lm = loss_and_grads(ws, bs, z, t)[0]
        p[idx] = keep
        fd = (lp - lm) / (2 * h)
        errs[i] = abs(g[idx] - fd) / max(abs(g[idx]), abs(fd), 1e-8)
    return errs


def train(model: MlpModel, X, y, config: TrainConfig | None = None):
    """Full-batch Adam on the MSE of z-scored data.

    Returns a new trained model and the per-epoch loss history (loss before
    each update, in normalised units).
    """
    config = config or TrainConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or len(X) == 0 or len(X) != len(y):
        raise ValueError("dataset must be a non-empty (n, d) array with n targets")
    if X.shape[1] != model.layer_sizes[0]:
        raise ValueError(f"expected {model.layer_sizes[0]} features, got {X.shape[1]}")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValueError("dataset contains non-finite values")

    out = model.copy()
    x_std = X.std(axis=0)
    out.x_mean = X.mean(axis=0)
    out.x_std = np.where(x_std > 0, x_std, 1.0)
    out.y_mean = float(y.mean())
    out.y_std = float(y.std()) if y.std() > 0 else 1.0
    z, t = _normalise(out, X, y)

    params = out.params()
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    history = np.empty(config.epochs)
    b1, b2 = config.beta1, config.beta2
    for epoch in range(config.epochs):
        loss, gw, gb = loss_and_grads(out.weights, out.biases, z, t)
        if not math.isfinite(loss):
            raise TrainingDiverged(
                f"loss became {loss} at epoch {epoch}; learning rate {config.learning_rate} is too large")
        history[epoch] = loss
        grads = []
        for a, b in zip(gw, gb):
            grads += [a, b]
        step = epoch + 1
        lr_t = config.learning_rate * math.sqrt(1 - b2**step) / (1 - b1**step)
        for p, g, mk, vk in zip(params, grads, m, v):
            mk *= b1
            mk += (1 - b1) * g
            vk *= b2
            vk += (1 - b2) * g * g
            p -= lr_t * mk / (np.sqrt(vk) + config.eps)
    if not all(np.isfinite(p).all() for p in params):
        raise TrainingDiverged("parameters became non-finite")
    out.trained = True
    out.config = asdict(config)
    out.seed = config.seed
    return out, history
