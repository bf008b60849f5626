"""Local model: a softmax-output MLP with hand-rolled gradients.

Parameters live in one flat vector with a fixed canonical layout
(per layer: weight matrix row-major, then bias), which makes models
directly averageable and cheap to ship around.  All randomized
operations are pure given their seed; a ModelParams value is never
mutated after construction.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

ACTIVATIONS = ("relu", "tanh")


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss; carries the failing step index."""

    def __init__(self, step: int, loss: float):
        self.step = step
        self.loss = loss
        super().__init__(f"non-finite loss {loss} at gradient step {step}")


@dataclass(frozen=True)
class Architecture:
    """Layer widths [input_dim, hidden..., num_classes] plus the hidden
    nonlinearity.  The output layer is always linear into a softmax."""

    layer_sizes: tuple
    activation: str = "relu"

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise ValueError("architecture needs at least input and output layers")
        if any(s < 1 for s in sizes):
            raise ValueError("layer sizes must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def num_classes(self) -> int:
        return self.layer_sizes[-1]

    @property
    def param_count(self) -> int:
        sizes = self.layer_sizes
        return sum(sizes[l] * sizes[l + 1] + sizes[l + 1] for l in range(len(sizes) - 1))


@dataclass(frozen=True)
class ModelParams:
    arch: Architecture
    theta: np.ndarray

    def __post_init__(self):
        if self.theta.shape != (self.arch.param_count,):
            raise ValueError(
                f"theta has length {self.theta.shape}, architecture "
                f"{self.arch.layer_sizes} needs {self.arch.param_count}"
            )
        if not np.all(np.isfinite(self.theta)):
            raise ValueError("theta must be finite")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1
    batch_size: int = 32
    learning_rate: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        # 0 is allowed as the degenerate no-step limit
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")


def _unpack(arch: Architecture, theta: np.ndarray):
    """Views (W, b) per layer into the flat vector; no copies."""
    layers = []
    off = 0
    sizes = arch.layer_sizes
    for l in range(len(sizes) - 1):
        n_in, n_out = sizes[l], sizes[l + 1]
        W = theta[off : off + n_in * n_out].reshape(n_in, n_out)
        off += n_in * n_out
        b = theta[off : off + n_out]
        off += n_out
        layers.append((W, b))
    return layers


def init_model(arch: Architecture, seed: int) -> ModelParams:
    """Fan-in scaled zero-mean normal weights, zero biases."""
    rng = np.random.default_rng(seed)
    theta = np.zeros(arch.param_count)
    for W, _ in _unpack(arch, theta):
        n_in = W.shape[0]
        W[:] = rng.standard_normal(W.shape) / np.sqrt(n_in)
    return ModelParams(arch, theta)


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _activate_grad(a: np.ndarray, kind: str) -> np.ndarray:
    # derivative expressed through the activation output a = act(z)
    if kind == "relu":
        return (a > 0.0).astype(a.dtype)
    return 1.0 - a * a


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _forward_activations(model: ModelParams, X: np.ndarray):
    """All layer outputs for a batch; the last entry feeds the softmax."""
    layers = _unpack(model.arch, model.theta)
    acts = [X]
    a = X
    for W, b in layers[:-1]:
        a = _activate(a @ W + b, model.arch.activation)
        acts.append(a)
    W, b = layers[-1]
    logits = a @ W + b
    return acts, logits


def predict_proba(model: ModelParams, X: np.ndarray) -> np.ndarray:
    """Class probabilities for a batch X of shape [n, dim]."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.arch.input_dim:
        raise ValueError(
            f"expected inputs of dim {model.arch.input_dim}, got shape {X.shape}"
        )
    _, logits = _forward_activations(model, X)
    return np.exp(_log_softmax(logits))


def forward(model: ModelParams, x: np.ndarray) -> np.ndarray:
    """Probability vector for a single feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("forward takes a single feature vector")
    return predict_proba(model, x[None, :])[0]


def _loss_and_grad(model: ModelParams, X: np.ndarray, y: np.ndarray):
    """Mean cross-entropy and its analytic gradient w.r.t. flat theta."""
    n = X.shape[0]
    # divergence is detected from the loss value itself, so runaway models
    # may overflow to inf/nan here without numpy warning about it
    with np.errstate(over="ignore", invalid="ignore"):
        acts, logits = _forward_activations(model, X)
        log_probs = _log_softmax(logits)
        loss = float(-np.mean(log_probs[np.arange(n), y]))

        delta = np.exp(log_probs)
        delta[np.arange(n), y] -= 1.0
        delta /= n

        grad = np.zeros_like(model.theta)
        layers = _unpack(model.arch, model.theta)
        grad_layers = _unpack(model.arch, grad)
        for l in range(len(layers) - 1, -1, -1):
            W, _ = layers[l]
            gW, gb = grad_layers[l]
            gW[:] = acts[l].T @ delta
            gb[:] = delta.sum(axis=0)
            if l > 0:
                delta = (delta @ W.T) * _activate_grad(
                    acts[l], model.arch.activation
                )
    return loss, grad


def _check_data(model: ModelParams, X: np.ndarray, y: np.ndarray):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[1] != model.arch.input_dim:
        raise ValueError(
            f"expected inputs of dim {model.arch.input_dim}, got shape {X.shape}"
        )
    if y.shape != (X.shape[0],) or X.shape[0] == 0:
        raise ValueError("need a non-empty batch with one label per row")
    return X, y


def loss_gradient(model: ModelParams, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Analytic gradient of the mean cross-entropy over the batch."""
    X, y = _check_data(model, X, y)
    _, grad = _loss_and_grad(model, X, y)
    return grad


def local_train(
    model: ModelParams, X: np.ndarray, y: np.ndarray, cfg: TrainConfig
) -> ModelParams:
    """Mini-batch gradient descent on cross-entropy; returns new params.

    Runs epochs * ceil(n / batch_size) steps with seeded shuffling, so
    identical (model, data, cfg) always give the identical result.  The
    input model is left untouched.
    """
    X, y = _check_data(model, X, y)
    rng = np.random.default_rng(cfg.seed)
    theta = model.theta.copy()
    current = ModelParams(model.arch, theta)
    n = X.shape[0]
    step = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            loss, grad = _loss_and_grad(current, X[batch], y[batch])
            if not np.isfinite(loss):
                raise DivergenceError(step, loss)
            theta -= cfg.learning_rate * grad
            step += 1
    return current


def evaluate(model: ModelParams, X: np.ndarray, y: np.ndarray) -> dict:
    """Accuracy (argmax, ties to the lowest class index) and mean loss."""
    X, y = _check_data(model, X, y)
    _, logits = _forward_activations(model, X)
    n = X.shape[0]
    log_probs = _log_softmax(logits)
    loss = float(-np.mean(log_probs[np.arange(n), y]))
    accuracy = float(np.mean(np.argmax(logits, axis=1) == y))
    return {"accuracy": accuracy, "loss": loss}


def serialized_size(arch: Architecture) -> int:
    """Checkpoint byte size: int32 layer-count header, int32 sizes, f32 theta."""
    return 4 * (1 + len(arch.layer_sizes)) + 4 * arch.param_count


def save_model(model: ModelParams, path):
    """Checkpoint format: little-endian int32 count + layer sizes, then
    theta as little-endian float32."""
    sizes = model.arch.layer_sizes
    with open(path, "wb") as f:
        f.write(struct.pack("<I", len(sizes)))
        f.write(struct.pack(f"<{len(sizes)}I", *sizes))
        f.write(model.theta.astype("<f4").tobytes())


def load_model(path, activation: str = "relu") -> ModelParams:
    """Read a checkpoint written by save_model.  The activation is not
    part of the wire format and must be supplied."""
    with open(path, "rb") as f:
        (n_sizes,) = struct.unpack("<I", f.read(4))
        sizes = struct.unpack(f"<{n_sizes}I", f.read(4 * n_sizes))
        arch = Architecture(sizes, activation)
        raw = f.read(4 * arch.param_count)
        if len(raw) != 4 * arch.param_count:
            raise ValueError(f"{path}: truncated checkpoint")
        theta = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    return ModelParams(arch, theta)
