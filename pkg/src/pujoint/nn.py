"""Feed-forward network with a sigmoid head, analytic gradients, and AMSGrad.

Everything is plain float64 numpy. The network maps R^d -> (0, 1); hidden
layers use a rectifier (or tanh), the output layer is always a single
logistic unit. Gradients are exact backprop for the fixed MLP graph, driven
by a per-sample upstream signal dL/dsigma supplied by the loss functions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FormatError, NumericError, ShapeError

# Keep sigmoid outputs strictly inside (0, 1) even when the pre-activation
# saturates in float64.
_SIGMOID_MARGIN = 1e-12

_HIDDEN_ACTIVATIONS = ("relu", "tanh")

CHECKPOINT_VERSION = 1


@dataclass
class MLPModel:
    """Layer weights/biases of a sigmoid-headed MLP.

    layer_sizes is (d, h1, ..., hk, 1); weights[i] has shape
    (layer_sizes[i], layer_sizes[i+1]).
    """

    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    hidden_activation: str = "relu"

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2:
            raise ValueError("need at least input and output layer sizes")
        if any(s < 1 for s in sizes):
            raise ValueError(f"layer sizes must be positive, got {sizes}")
        if sizes[-1] != 1:
            raise ValueError("output layer width must be 1")
        if self.hidden_activation not in _HIDDEN_ACTIVATIONS:
            raise ValueError(f"unknown hidden activation {self.hidden_activation!r}")
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ShapeError("one weight matrix and bias vector per layer required")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[i], sizes[i + 1]):
                raise ShapeError(f"weights[{i}] has shape {w.shape}, expected {(sizes[i], sizes[i + 1])}")
            if b.shape != (sizes[i + 1],):
                raise ShapeError(f"biases[{i}] has shape {b.shape}, expected {(sizes[i + 1],)}")
        self.layer_sizes = sizes

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    def copy(self) -> "MLPModel":
        return MLPModel(
            self.layer_sizes,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.hidden_activation,
        )


@dataclass
class Gradients:
    """Per-layer weight/bias gradients, same shapes as the model."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]


def init_mlp(layer_sizes, seed=0, hidden_activation: str = "relu") -> MLPModel:
    """Seeded uniform init scaled by 1/sqrt(fan_in)."""
    sizes = tuple(int(s) for s in layer_sizes)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MLPModel(sizes, weights, biases, hidden_activation)


def sigmoid(z: np.ndarray) -> np.ndarray:
    # Branch on sign to avoid overflow in exp.
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return np.clip(out, _SIGMOID_MARGIN, 1.0 - _SIGMOID_MARGIN)


def _check_batch(model: MLPModel, batch: np.ndarray) -> np.ndarray:
    batch = np.asarray(batch, dtype=float)
    if batch.ndim != 2:
        raise ShapeError(f"batch must be 2-d, got ndim={batch.ndim}")
    if batch.shape[1] != model.input_dim:
        raise ShapeError(f"batch has {batch.shape[1]} columns, model expects {model.input_dim}")
    return batch


def _hidden_forward(model: MLPModel, z: np.ndarray) -> np.ndarray:
    if model.hidden_activation == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _hidden_derivative(model: MLPModel, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if model.hidden_activation == "relu":
        return (z > 0.0).astype(float)
    return 1.0 - a * a


def _forward_cached(model: MLPModel, batch: np.ndarray):
    activations = [batch]
    pre = []
    a = batch
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        pre.append(z)
        a = sigmoid(z[:, 0])[:, None] if i == last else _hidden_forward(model, z)
        activations.append(a)
    return activations[-1][:, 0], pre, activations


def forward(model: MLPModel, batch: np.ndarray) -> np.ndarray:
    """Probability P(Y=1|x) per row of `batch`, strictly inside (0, 1)."""
    batch = _check_batch(model, batch)
    probs, _, _ = _forward_cached(model, batch)
    return probs


def backward(model: MLPModel, batch: np.ndarray, upstream: np.ndarray) -> Gradients:
    """Exact gradients of sum_i upstream_i * d sigma(x_i) / d theta.

    `upstream` is the per-sample dL/dsigma; any 1/n weighting belongs to the
    loss that produced it.
    """
    batch = _check_batch(model, batch)
    upstream = np.asarray(upstream, dtype=float)
    if upstream.shape != (batch.shape[0],):
        raise ShapeError(f"upstream has shape {upstream.shape}, expected {(batch.shape[0],)}")

    probs, pre, activations = _forward_cached(model, batch)
    # dL/dz at the logistic output
    delta = (upstream * probs * (1.0 - probs))[:, None]

    grad_w = [np.empty(0)] * len(model.weights)
    grad_b = [np.empty(0)] * len(model.biases)
    for i in range(len(model.weights) - 1, -1, -1):
        grad_w[i] = activations[i].T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * _hidden_derivative(model, pre[i - 1], activations[i])
    return Gradients(grad_w, grad_b)


class AmsGrad:
    """AMSGrad: Adam moments with an elementwise running max on the second
    moment, bias-corrected step eta * m_hat / (sqrt(v_hat_max) + eps)."""

    def __init__(self, model: MLPModel, lr: float = 0.005, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        if not (0 < beta1 < 1 and 0 < beta2 < 1):
            raise ValueError("decay rates must lie in (0, 1)")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._m = [np.zeros_like(p) for p in model.weights + model.biases]
        self._v = [np.zeros_like(p) for p in model.weights + model.biases]
        self._vmax = [np.zeros_like(p) for p in model.weights + model.biases]

    def step(self, model: MLPModel, grads: Gradients) -> None:
        params = model.weights + model.biases
        gs = grads.weights + grads.biases
        if len(gs) != len(params) or any(g.shape != p.shape for g, p in zip(gs, params)):
            raise ShapeError("gradient shapes do not match the model")
        for g in gs:
            if not np.all(np.isfinite(g)):
                raise NumericError("non-finite gradient entry; aborting trial")
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for p, g, m, v, vmax in zip(params, gs, self._m, self._v, self._vmax):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            np.maximum(vmax, v, out=vmax)
            p -= self.lr * (m / bc1) / (np.sqrt(vmax / bc2) + self.eps)

    @property
    def max_second_moments(self) -> list[np.ndarray]:
        return [v.copy() for v in self._vmax]


def save_checkpoint(model: MLPModel, path) -> None:
    """Versioned binary checkpoint; round-trips parameters bit-exactly."""
    arrays = {
        "version": np.array(CHECKPOINT_VERSION, dtype=np.int64),
        "layer_sizes": np.array(model.layer_sizes, dtype=np.int64),
        "hidden_activation": np.array(model.hidden_activation),
    }
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        arrays[f"w{i}"] = w
        arrays[f"b{i}"] = b
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path) -> MLPModel:
    try:
        with np.load(path, allow_pickle=False) as data:
            if "version" not in data:
                raise FormatError("not a model checkpoint: missing version field")
            version = int(data["version"])
            if version != CHECKPOINT_VERSION:
                raise FormatError(f"unsupported checkpoint version {version}")
            sizes = tuple(int(s) for s in data["layer_sizes"])
            act = str(data["hidden_activation"])
            weights = [data[f"w{i}"] for i in range(len(sizes) - 1)]
            biases = [data[f"b{i}"] for i in range(len(sizes) - 1)]
    except (OSError, KeyError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"unreadable checkpoint {path}: {exc}") from exc
    return MLPModel(sizes, weights, biases, act)
