"""Gradient-free training: per-weight candidate grids searched with Grover.

For every weight the trainer builds a grid of candidate values around the
current value, scores each candidate by the regularized loss, marks the
candidates within a relative tolerance of the best one, lets a Grover search
pick from the marked set, and writes the chosen value back. The per-layer
search factor alpha shrinks while the loss keeps improving and widens when it
stalls.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .grover import FIXED, GroverConfig, grover_search, minimum_search
from .metrics import EpochMetrics, epoch_metrics, iterate_batches
from .qsim import NoiseModel, RngStream

SIGMA_FALLBACK = 1e-3

SELECT_MINIMUM = "minimum"
SELECT_SAMPLE = "sample"

ALPHA_PER_BATCH = "batch"
ALPHA_PER_EPOCH = "epoch"

# child-stream tags
_TAG_SHUFFLE, _TAG_MASK, _TAG_SEARCH = 0, 1, 2


@dataclass
class QewoConfig:
    n_candidates_hidden: int = 32
    n_candidates_output: int = 64
    alpha0: float = 0.1
    gamma_down: float = 0.95
    gamma_up: float = 1.05
    alpha_min: float = 0.01
    alpha_max: float = 1.0
    tol_ratio_hidden: float = 0.05
    tol_ratio_output: float = 0.1
    initial_min_loss: float = 5.0
    epochs: int = 10
    batch_size: int | None = None
    dropout_p: float = 0.2
    l2_lambda: float = 1e-4
    keep_if_worse: bool = True
    selection: str = SELECT_MINIMUM
    max_retries: int = 5
    alpha_update: str = ALPHA_PER_BATCH

    def __post_init__(self):
        if not 0.0 < self.gamma_down < 1.0 < self.gamma_up:
            raise ValueError("need 0 < gamma_down < 1 < gamma_up")
        if not 0.0 < self.alpha_min <= self.alpha0 <= self.alpha_max:
            raise ValueError("need 0 < alpha_min <= alpha0 <= alpha_max")
        if self.tol_ratio_hidden <= 0 or self.tol_ratio_output <= 0:
            raise ValueError("tol ratios must be positive")
        if min(self.n_candidates_hidden, self.n_candidates_output) < 2:
            raise ValueError("grids need at least 2 candidates")
        if self.selection not in (SELECT_MINIMUM, SELECT_SAMPLE):
            raise ValueError(f"unknown selection mode {self.selection!r}")
        if self.alpha_update not in (ALPHA_PER_BATCH, ALPHA_PER_EPOCH):
            raise ValueError(f"alpha_update must be 'batch' or 'epoch', got {self.alpha_update!r}")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")

    def n_candidates(self, layer: int, n_layers: int) -> int:
        return self.n_candidates_output if layer == n_layers - 1 else self.n_candidates_hidden

    def tol_ratio(self, layer: int, n_layers: int) -> float:
        return self.tol_ratio_output if layer == n_layers - 1 else self.tol_ratio_hidden

    def loss_config(self) -> nn.LossConfig:
        return nn.LossConfig(l2_lambda=self.l2_lambda, dropout_p=self.dropout_p)

    def grover_config(self) -> GroverConfig:
        return GroverConfig(max_retries=self.max_retries, iteration_rule=FIXED)


@dataclass
class CandidateGrid:
    center: float
    sigma: float
    alpha: float
    n: int
    values: np.ndarray = field(repr=False)

    @property
    def step(self) -> float:
        return 2.0 * self.alpha * self.sigma / (self.n - 1)


@dataclass
class GroverStats:
    searches: int = 0
    retries: int = 0
    fallbacks: int = 0
    iterations: int = 0

    def record(self, outcome):
        self.searches += 1
        self.retries += outcome.retries_used
        self.fallbacks += int(not outcome.measured_in_marked)
        self.iterations += outcome.grover_iterations_used


@dataclass
class TrainerState:
    model: nn.MlpModel
    alpha_per_layer: np.ndarray
    tracked_min_loss: float
    epoch_metrics: list = field(default_factory=list)
    grover_stats: GroverStats = field(default_factory=GroverStats)
    epochs_done: int = 0

    @classmethod
    def start(cls, model: nn.MlpModel, cfg: QewoConfig) -> "TrainerState":
        alphas = np.full(len(model.layers), float(cfg.alpha0))
        return cls(model=model, alpha_per_layer=alphas, tracked_min_loss=float(cfg.initial_min_loss))


def layer_sigma(W) -> float:
    """Population standard deviation of all entries."""
    W = np.asarray(W, dtype=float)
    if W.size == 0:
        raise ValueError("empty weight matrix")
    if np.all(W == W.flat[0]):
        # np.std leaves rounding residue on constant input
        return 0.0
    return float(np.std(W))


def build_grid(w: float, alpha: float, sigma: float, n: int) -> CandidateGrid:
    if n < 2:
        raise ValueError("a grid needs n >= 2")
    if sigma == 0.0:
        sigma = SIGMA_FALLBACK
    half = alpha * sigma
    step = 2.0 * half / (n - 1)
    values = (w - half) + step * np.arange(n)
    values[-1] = w + half
    return CandidateGrid(float(w), float(sigma), float(alpha), int(n), values)


def evaluate_candidates(state: TrainerState, layer: int, i: int, j: int, grid: CandidateGrid,
                        X, Y, mask, cfg: QewoConfig) -> np.ndarray:
    """Reference scorer: full forward pass + loss for each candidate value."""
    W = state.model.layers[layer]
    original = W[i, j]
    loss_cfg = cfg.loss_config()
    losses = np.empty(grid.n)
    try:
        for k, value in enumerate(grid.values):
            W[i, j] = value
            P = nn.forward(state.model, X, mask)
            losses[k] = nn.loss(P, Y, state.model, loss_cfg)
    finally:
        W[i, j] = original
    return losses


class BatchEvaluator:
    """Candidate scorer for one mini-batch that only recomputes what changes.

    Changing ``W[t][i, j]`` moves pre-activation column ``i`` of layer ``t``
    alone, so candidates are scored by perturbing that column and pushing the
    (N, samples, units) stack through the remaining layers. Caches are
    refreshed after each accepted update.
    """

    def __init__(self, model: nn.MlpModel, X, Y, mask, l2_lambda: float):
        self.model = model
        self.X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        self.Y = Y
        self.labels = np.argmax(Y, axis=1)
        self.rows = np.arange(Y.shape[0])
        self.mask = mask
        self.l2_lambda = l2_lambda
        self.phi = nn.activation(model.activation)
        if model.activation == "tanh":
            self.phi_inplace = lambda z: np.tanh(z, out=z)
        else:
            self.phi_inplace = self.phi
        self.n_layers = len(model.layers)
        self._buffers = {}
        self.inputs = [self.X] + [None] * (self.n_layers - 1)
        self.pre = [None] * self.n_layers
        self.refresh(0)

    def _mask(self, t):
        return None if self.mask is None else self.mask.masks[t]

    def _buffer(self, n_cand, width):
        key = (n_cand, width)
        buf = self._buffers.get(key)
        if buf is None:
            buf = self._buffers[key] = np.empty((n_cand, self.X.shape[0], width))
        return buf

    def refresh(self, start: int):
        """Recompute layer inputs/pre-activations from layer ``start`` on."""
        W = self.model.layers
        for t in range(start, self.n_layers):
            self.pre[t] = self.inputs[t] @ W[t].T
            if t < self.n_layers - 1:
                h = self.phi(self.pre[t])
                m = self._mask(t)
                self.inputs[t + 1] = h if m is None else h * m
        self.sq_norm = self.model.squared_norm()

    def _data_loss(self, z):
        """Mean -ln(p_true + eps) over samples for logits z (..., samples, C)."""
        z = z - z.max(axis=-1, keepdims=True)
        np.exp(z, out=z)
        p_true = z[..., self.rows, self.labels] / z.sum(axis=-1)
        return -np.mean(np.log(p_true + nn.EPS), axis=-1)

    def current_loss(self) -> float:
        return float(self._data_loss(self.pre[-1].copy()) + self.l2_lambda * self.sq_norm)

    def score(self, t: int, i: int, j: int, values) -> np.ndarray:
        W = self.model.layers
        values = np.asarray(values, dtype=float)
        n_cand = values.size
        n = self.X.shape[0]
        w0 = W[t][i, j]
        delta = values - w0
        col = self.pre[t][:, i] + delta[:, None] * self.inputs[t][:, j]
        if t == self.n_layers - 1:
            z = np.broadcast_to(self.pre[t], (n_cand,) + self.pre[t].shape).copy()
            z[:, :, i] = col
        else:
            h = self.phi(col)
            m = self._mask(t)
            if m is not None:
                h *= m[:, i]
            dh = h - self.inputs[t + 1][:, i]
            w_out = W[t + 1][:, i]
            z = self._buffer(n_cand, w_out.size)
            np.dot(dh.reshape(-1, 1), w_out[None, :], out=z.reshape(n_cand * n, -1))
            z += self.pre[t + 1]
            for u in range(t + 1, self.n_layers - 1):
                z = self.phi_inplace(z)
                m = self._mask(u)
                if m is not None:
                    z *= m
                z = np.matmul(z, W[u + 1].T)
        data = self._data_loss(z)
        return data + self.l2_lambda * (self.sq_norm - w0 * w0 + values * values)

    def set_weight(self, t: int, i: int, j: int, value: float):
        W = self.model.layers
        W[t][i, j] = value
        self.pre[t][:, i] = self.inputs[t] @ W[t][i]
        if t < self.n_layers - 1:
            h = self.phi(self.pre[t][:, i])
            m = self._mask(t)
            self.inputs[t + 1][:, i] = h if m is None else h * m[:, i]
            self.refresh(t + 1)
        else:
            self.sq_norm = self.model.squared_norm()


def select_promising(losses, tol_ratio: float):
    """Indices within ``tol_ratio * min`` of the grid minimum, and that minimum."""
    losses = np.asarray(losses, dtype=float)
    if losses.size == 0:
        raise ValueError("no candidate losses")
    if not np.all(np.isfinite(losses)):
        raise ValueError("candidate losses must be finite")
    grid_min = float(losses.min())
    tau = tol_ratio * grid_min
    marked = np.flatnonzero(losses <= grid_min + tau)
    return marked, grid_min


def quantum_select(losses, marked, cfg: GroverConfig | None = None,
                   noise: NoiseModel | None = None, rng: RngStream | None = None,
                   mode: str = SELECT_MINIMUM, stats: GroverStats | None = None) -> int:
    """Pick one index from ``marked`` with Grover.

    ``sample`` returns the index measured after amplifying the marked set.
    ``minimum`` starts from that sample and keeps amplifying the candidates
    strictly below it until none remain (Durr-Hoyer), so it lands on the grid
    minimum; every value visited is below a marked one and therefore marked.
    """
    cfg = cfg or GroverConfig()
    losses = np.asarray(losses, dtype=float)
    n = losses.size
    marked = np.asarray(marked, dtype=int)
    first = grover_search(n, marked, cfg, noise, rng)
    if stats is not None:
        stats.record(first)
    if mode == SELECT_SAMPLE:
        return first.index
    if mode != SELECT_MINIMUM:
        raise ValueError(f"unknown selection mode {mode!r}")
    trace = minimum_search(losses, cfg, noise, rng, start=first.index)
    if stats is not None:
        for outcome in trace.searches:
            stats.record(outcome)
    return trace.index


def update_alpha(alpha: float, loss_decreased: bool, cfg: QewoConfig) -> float:
    if loss_decreased:
        return max(cfg.gamma_down * alpha, cfg.alpha_min)
    return min(cfg.gamma_up * alpha, cfg.alpha_max)


def _optimize_batch(state: TrainerState, Xb, Yb, mask, cfg: QewoConfig, noise, rng: RngStream):
    model = state.model
    n_layers = len(model.layers)
    grover_cfg = cfg.grover_config()
    ev = BatchEvaluator(model, Xb, Yb, mask, cfg.l2_lambda)
    for t in range(n_layers):
        W = model.layers[t]
        sigma = layer_sigma(W)
        n_cand = cfg.n_candidates(t, n_layers)
        tol = cfg.tol_ratio(t, n_layers)
        search_rng = rng.child(_TAG_SEARCH, t)
        for i in range(W.shape[0]):
            for j in range(W.shape[1]):
                grid = build_grid(W[i, j], state.alpha_per_layer[t], sigma, n_cand)
                losses = ev.score(t, i, j, grid.values)
                marked, _ = select_promising(losses, tol)
                k = quantum_select(losses, marked, grover_cfg, noise, search_rng,
                                   cfg.selection, state.grover_stats)
                if not cfg.keep_if_worse and not losses[k] < ev.current_loss():
                    continue
                ev.set_weight(t, i, j, grid.values[k])


def train_epoch(state: TrainerState, X, Y, cfg: QewoConfig, noise: NoiseModel | None,
                rng: RngStream, epoch: int = 0) -> TrainerState:
    """One pass over the training set, updating every weight once per batch."""
    noise = noise or NoiseModel.off()
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    loss_cfg = cfg.loss_config()
    epoch_rng = rng.child(epoch)
    for b, idx in enumerate(iterate_batches(X.shape[0], cfg.batch_size, epoch_rng.child(_TAG_SHUFFLE))):
        batch_rng = epoch_rng.child(b + 1)
        Xb, Yb = X[idx], Y[idx]
        mask = None
        if cfg.dropout_p > 0:
            mask = nn.sample_dropout_mask(state.model, cfg.dropout_p,
                                          batch_rng.child(_TAG_MASK), Xb.shape[0])
        _optimize_batch(state, Xb, Yb, mask, cfg, noise, batch_rng)
        if cfg.alpha_update == ALPHA_PER_BATCH:
            _adapt_alpha(state, X, Y, cfg, loss_cfg)
    if cfg.alpha_update == ALPHA_PER_EPOCH:
        _adapt_alpha(state, X, Y, cfg, loss_cfg)
    return state


def _adapt_alpha(state: TrainerState, X, Y, cfg: QewoConfig, loss_cfg: nn.LossConfig):
    post = nn.loss(nn.forward(state.model, X), Y, state.model, loss_cfg)
    decreased = post < state.tracked_min_loss
    state.alpha_per_layer = np.array(
        [update_alpha(a, decreased, cfg) for a in state.alpha_per_layer])
    state.tracked_min_loss = min(state.tracked_min_loss, post)


def train(model: nn.MlpModel, train_set, test_set, cfg: QewoConfig,
          noise: NoiseModel | None = None, rng: RngStream | None = None,
          callback=None) -> TrainerState:
    """Run ``cfg.epochs`` epochs; ``train_set``/``test_set`` are (X, Y_onehot)."""
    rng = rng or RngStream(0)
    state = TrainerState.start(model, cfg)
    loss_cfg = cfg.loss_config()
    X, Y = train_set
    for epoch in range(cfg.epochs):
        start = time.perf_counter()
        fallbacks_before = state.grover_stats.fallbacks
        train_epoch(state, X, Y, cfg, noise, rng, epoch)
        elapsed = (time.perf_counter() - start) * 1000.0
        m = epoch_metrics(epoch + 1, state.model, train_set, test_set, loss_cfg, elapsed,
                          state.grover_stats.fallbacks - fallbacks_before)
        state.epoch_metrics.append(m)
        state.epochs_done += 1
        if callback is not None:
            callback(m)
    return state
