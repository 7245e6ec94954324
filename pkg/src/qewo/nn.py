"""Bias-free multilayer perceptron: forward pass, loss, accuracy, init."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EPS = 1e-12
ACTIVATIONS = ("tanh", "relu", "gelu", "swish")
INIT_SCHEMES = ("uniform", "xavier", "kaiming")

_GELU_C = np.sqrt(2.0 / np.pi)


def tanh(x):
    return np.tanh(x)


def relu(x):
    return np.maximum(x, 0.0)


def gelu(x):
    # tanh approximation
    return 0.5 * x * (1.0 + np.tanh(_GELU_C * (x + 0.044715 * x**3)))


def sigmoid(x):
    # split by sign so exp never overflows
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def swish(x):
    return x * sigmoid(np.asarray(x, dtype=float))


def activation_derivative(kind: str, z):
    """d phi / dz evaluated at pre-activation ``z``."""
    if kind == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    if kind == "relu":
        return (z > 0).astype(float)
    if kind == "gelu":
        u = _GELU_C * (z + 0.044715 * z**3)
        t = np.tanh(u)
        du = _GELU_C * (1.0 + 3 * 0.044715 * z**2)
        return 0.5 * (1.0 + t) + 0.5 * z * (1.0 - t * t) * du
    if kind == "swish":
        s = sigmoid(np.asarray(z, dtype=float))
        return s + z * s * (1.0 - s)
    raise ValueError(f"unknown activation {kind!r}")


_ACT_FUNCS = {"tanh": tanh, "relu": relu, "gelu": gelu, "swish": swish}


def activation(kind: str):
    try:
        return _ACT_FUNCS[kind]
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}; choose from {ACTIVATIONS}") from None


def softmax(z):
    """Row softmax over the last axis, log-sum-exp stabilized."""
    z = np.asarray(z, dtype=float)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class MlpModel:
    """Weight matrices shaped (fan_out, fan_in); softmax on the last layer."""

    layers: list
    activation: str = "tanh"

    def __post_init__(self):
        self.layers = [np.array(w, dtype=float) for w in self.layers]
        if not self.layers:
            raise ValueError("model needs at least one layer")
        activation(self.activation)
        for t in range(1, len(self.layers)):
            if self.layers[t].shape[1] != self.layers[t - 1].shape[0]:
                raise ValueError(
                    f"layer {t} fan_in {self.layers[t].shape[1]} does not match "
                    f"layer {t - 1} fan_out {self.layers[t - 1].shape[0]}"
                )

    @property
    def shapes(self) -> list[tuple[int, int]]:
        return [w.shape for w in self.layers]

    @property
    def sizes(self) -> list[int]:
        """Unit counts from input to output, e.g. [13, 32, 3]."""
        return [self.layers[0].shape[1]] + [w.shape[0] for w in self.layers]

    @property
    def n_weights(self) -> int:
        return sum(w.size for w in self.layers)

    def copy(self) -> "MlpModel":
        return MlpModel([w.copy() for w in self.layers], self.activation)

    def squared_norm(self) -> float:
        return float(sum(np.sum(w * w) for w in self.layers))

    def flat(self) -> np.ndarray:
        return np.concatenate([w.ravel() for w in self.layers])

    @classmethod
    def from_flat(cls, vector, shapes, activation="tanh") -> "MlpModel":
        layers, pos = [], 0
        for shape in shapes:
            size = shape[0] * shape[1]
            layers.append(np.asarray(vector[pos:pos + size], dtype=float).reshape(shape))
            pos += size
        return cls(layers, activation)


@dataclass
class LossConfig:
    l2_lambda: float = 1e-4
    dropout_p: float = 0.2

    def __post_init__(self):
        if self.l2_lambda < 0:
            raise ValueError("l2_lambda must be nonnegative")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError("dropout_p must lie in [0, 1)")


@dataclass
class DropoutMask:
    """Inverted-dropout masks, one (samples, units) matrix per hidden layer."""

    masks: list
    p: float

    @property
    def n_samples(self) -> int:
        return self.masks[0].shape[0] if self.masks else 0


def sample_dropout_mask(model: MlpModel, p: float, rng, n_samples: int) -> DropoutMask:
    if not 0.0 <= p < 1.0:
        raise ValueError("dropout probability must lie in [0, 1)")
    scale = 1.0 / (1.0 - p)
    masks = []
    for w in model.layers[:-1]:
        keep = rng.random((n_samples, w.shape[0])) >= p
        masks.append(keep * scale)
    return DropoutMask(masks, p)


def _check_input(model: MlpModel, X, mask: DropoutMask | None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[-1] != model.layers[0].shape[1]:
        raise ValueError(f"X has {X.shape[-1]} features, model expects {model.layers[0].shape[1]}")
    if mask is not None:
        if len(mask.masks) != len(model.layers) - 1:
            raise ValueError("dropout mask layer count does not match the model")
        for m, w in zip(mask.masks, model.layers[:-1]):
            if m.shape != (X.shape[0], w.shape[0]):
                raise ValueError(f"dropout mask shape {m.shape} != {(X.shape[0], w.shape[0])}")
    return X


def hidden_activations(model: MlpModel, X, mask: DropoutMask | None = None):
    """Inputs to every layer: [X, h1, ..., h_{n-1}] (dropout applied)."""
    X = _check_input(model, X, mask)
    phi = activation(model.activation)
    hs = [X]
    h = X
    for t, w in enumerate(model.layers[:-1]):
        h = phi(h @ w.T)
        if mask is not None:
            h = h * mask.masks[t]
        hs.append(h)
    return hs


def logits(model: MlpModel, X, mask: DropoutMask | None = None):
    hs = hidden_activations(model, X, mask)
    return hs[-1] @ model.layers[-1].T


def forward(model: MlpModel, X, mask: DropoutMask | None = None):
    """Class probabilities, shape (samples, classes)."""
    return softmax(logits(model, X, mask))


def cross_entropy(P, Y):
    """Mean of -ln(p_true + eps) over the sample axis; leading axes kept."""
    return -np.mean(np.sum(Y * np.log(P + EPS), axis=-1), axis=-1)


def loss(P, Y, model: MlpModel, cfg: LossConfig | None = None) -> float:
    cfg = cfg or LossConfig()
    P = np.asarray(P, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if P.shape != Y.shape:
        raise ValueError(f"prediction shape {P.shape} != target shape {Y.shape}")
    return float(cross_entropy(P, Y) + cfg.l2_lambda * model.squared_norm())


def accuracy(P, Y) -> float:
    P = np.asarray(P)
    Y = np.asarray(Y)
    if P.shape != Y.shape:
        raise ValueError(f"prediction shape {P.shape} != target shape {Y.shape}")
    return 100.0 * float(np.mean(np.argmax(P, axis=1) == np.argmax(Y, axis=1)))


def shape_plan(sizes) -> list[tuple[int, int]]:
    """[13, 32, 3] -> [(32, 13), (3, 32)]."""
    return [(fan_out, fan_in) for fan_in, fan_out in zip(sizes[:-1], sizes[1:])]


def init_weights(shapes, scheme: str, rng, activation: str = "tanh") -> MlpModel:
    layers = []
    for fan_out, fan_in in shapes:
        if scheme == "uniform":
            w = rng.uniform(-1.0, 1.0, (fan_out, fan_in))
        elif scheme == "xavier":
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            w = rng.uniform(-bound, bound, (fan_out, fan_in))
        elif scheme == "kaiming":
            w = rng.normal(0.0, np.sqrt(2.0 / fan_in), (fan_out, fan_in))
        else:
            raise ValueError(f"unknown init scheme {scheme!r}; choose from {INIT_SCHEMES}")
        layers.append(w)
    return MlpModel(layers, activation)
