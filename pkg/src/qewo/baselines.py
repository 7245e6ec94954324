"""Comparison trainers: ADAM on backpropagated gradients, and a genetic algorithm."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import nn
from .metrics import epoch_metrics, iterate_batches


@dataclass
class AdamConfig:
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int | None = 32
    epochs: int = 10
    l2_lambda: float = 1e-4
    dropout_p: float = 0.2

    def __post_init__(self):
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")

    def loss_config(self) -> nn.LossConfig:
        return nn.LossConfig(self.l2_lambda, self.dropout_p)


@dataclass
class GaConfig:
    population_size: int = 50
    generations: int = 10
    tournament_size: int = 3
    crossover_rate: float = 0.9
    mutation_rate: float = 0.05
    mutation_sigma: float = 0.1
    l2_lambda: float = 1e-4
    init_scheme: str = "uniform"

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.tournament_size < 1:
            raise ValueError("tournament_size must be >= 1")


def loss_and_gradients(model: nn.MlpModel, X, Y, l2_lambda: float, mask=None):
    """Regularized loss and d loss / d W for every layer.

    The data term is mean -ln(p_true + eps), so the logit gradient carries the
    factor p_true / (p_true + eps) in front of the usual (P - Y).
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    phi = nn.activation(model.activation)
    W = model.layers
    n = X.shape[0]
    inputs, pres = [X], []
    h = X
    for t, w in enumerate(W[:-1]):
        z = h @ w.T
        pres.append(z)
        h = phi(z)
        if mask is not None:
            h = h * mask.masks[t]
        inputs.append(h)
    logits = h @ W[-1].T
    P = nn.softmax(logits)
    p_true = np.sum(P * Y, axis=1)
    data = -np.mean(np.log(p_true + nn.EPS))
    loss = data + l2_lambda * model.squared_norm()

    ratio = p_true / (p_true + nn.EPS)
    delta = ratio[:, None] * (P - Y) / n
    grads = [None] * len(W)
    for t in range(len(W) - 1, -1, -1):
        grads[t] = delta.T @ inputs[t] + 2.0 * l2_lambda * W[t]
        if t == 0:
            break
        dh = delta @ W[t]
        if mask is not None:
            dh = dh * mask.masks[t - 1]
        delta = dh * nn.activation_derivative(model.activation, pres[t - 1])
    return loss, grads


def gradient_check(model: nn.MlpModel, X, Y, l2_lambda: float = 1e-4, mask=None,
                   h: float = 1e-5) -> float:
    """Max entrywise relative error of analytic vs central-difference gradients.

    Entries are compared as |a - n| / max(|a| + |n|, 1e-8).
    """
    _, grads = loss_and_gradients(model, X, Y, l2_lambda, mask)
    worst = 0.0
    for t, W in enumerate(model.layers):
        for idx in np.ndindex(W.shape):
            orig = W[idx]
            W[idx] = orig + h
            up, _ = loss_and_gradients(model, X, Y, l2_lambda, mask)
            W[idx] = orig - h
            down, _ = loss_and_gradients(model, X, Y, l2_lambda, mask)
            W[idx] = orig
            numeric = (up - down) / (2.0 * h)
            a = grads[t][idx]
            worst = max(worst, abs(a - numeric) / max(abs(a) + abs(numeric), 1e-8))
    return worst


class Adam:
    def __init__(self, shapes, cfg: AdamConfig):
        self.cfg = cfg
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.step_count = 0

    def step(self, params, grads):
        c = self.cfg
        self.step_count += 1
        b1t = 1.0 - c.beta1**self.step_count
        b2t = 1.0 - c.beta2**self.step_count
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * g * g
            m_hat = m / b1t
            v_hat = v / b2t
            p -= c.learning_rate * m_hat / (np.sqrt(v_hat) + c.epsilon)


def adam_train(model: nn.MlpModel, train_set, test_set, cfg: AdamConfig, rng, callback=None):
    """Mini-batch ADAM; returns (model, per-epoch metrics). ``model`` is updated in place."""
    X, Y = (np.asarray(a, dtype=float) for a in train_set)
    if X.shape[1] != model.layers[0].shape[1]:
        raise ValueError("model input width does not match the data")
    opt = Adam(model.shapes, cfg)
    loss_cfg = cfg.loss_config()
    history = []
    for epoch in range(cfg.epochs):
        start = time.perf_counter()
        erng = rng.child(epoch)
        for b, idx in enumerate(iterate_batches(X.shape[0], cfg.batch_size, erng.child(0))):
            mask = None
            if cfg.dropout_p > 0:
                mask = nn.sample_dropout_mask(model, cfg.dropout_p, erng.child(1, b), idx.size)
            _, grads = loss_and_gradients(model, X[idx], Y[idx], cfg.l2_lambda, mask)
            for t, g in enumerate(grads):
                if not np.all(np.isfinite(g)):
                    raise FloatingPointError(
                        f"non-finite gradient in layer {t} at epoch {epoch + 1}, batch {b}")
            opt.step(model.layers, grads)
        elapsed = (time.perf_counter() - start) * 1000.0
        m = epoch_metrics(epoch + 1, model, (X, Y), test_set, loss_cfg, elapsed)
        history.append(m)
        if callback is not None:
            callback(m)
    return model, history


def _fitness(genome, shapes, activation, X, Y, l2_lambda):
    model = nn.MlpModel.from_flat(genome, shapes, activation)
    return -nn.loss(nn.forward(model, X), Y, model, nn.LossConfig(l2_lambda, 0.0))


def _tournament(fitness, size, rng):
    contenders = rng.integers(0, fitness.size, size=size)
    return int(contenders[np.argmax(fitness[contenders])])


def next_generation(population, fitness, cfg: GaConfig, rng):
    """Elitism of one, tournament parents, uniform crossover, Gaussian mutation."""
    pop_size, n_genes = population.shape
    new = np.empty_like(population)
    new[0] = population[int(np.argmax(fitness))]
    for k in range(1, pop_size):
        a = population[_tournament(fitness, cfg.tournament_size, rng)]
        b = population[_tournament(fitness, cfg.tournament_size, rng)]
        if rng.random() < cfg.crossover_rate:
            take = rng.random(n_genes) < 0.5
            child = np.where(take, a, b)
        else:
            child = a.copy()
        if cfg.mutation_rate > 0:
            hit = rng.random(n_genes) < cfg.mutation_rate
            child = child + hit * rng.normal(0.0, cfg.mutation_sigma, n_genes)
        new[k] = child
    return new


@dataclass
class GaRun:
    model: nn.MlpModel
    history: list
    population: np.ndarray
    fitness: np.ndarray
    best_fitness: list


def evolve(shapes, train_set, test_set, cfg: GaConfig, rng, activation="tanh",
           population=None, callback=None) -> GaRun:
    X, Y = (np.asarray(a, dtype=float) for a in train_set)
    shapes = [tuple(s) for s in shapes]
    if population is None:
        population = np.stack([
            nn.init_weights(shapes, cfg.init_scheme, rng.child(0, k), activation).flat()
            for k in range(cfg.population_size)
        ])
    population = np.array(population, dtype=float)
    loss_cfg = nn.LossConfig(cfg.l2_lambda, 0.0)

    def score(pop):
        return np.array([_fitness(g, shapes, activation, X, Y, cfg.l2_lambda) for g in pop])

    history, best_fitness = [], []
    fitness = score(population)
    for gen in range(cfg.generations):
        start = time.perf_counter()
        population = next_generation(population, fitness, cfg, rng.child(1, gen))
        fitness = score(population)
        best = int(np.argmax(fitness))
        best_fitness.append(float(fitness[best]))
        model = nn.MlpModel.from_flat(population[best], shapes, activation)
        elapsed = (time.perf_counter() - start) * 1000.0
        m = epoch_metrics(gen + 1, model, (X, Y), test_set, loss_cfg, elapsed)
        history.append(m)
        if callback is not None:
            callback(m)
    best = int(np.argmax(fitness))
    model = nn.MlpModel.from_flat(population[best], shapes, activation)
    return GaRun(model, history, population, fitness, best_fitness)


def ga_train(shapes, train_set, test_set, cfg: GaConfig, rng, activation="tanh", callback=None):
    """Evolve flattened weight vectors; one generation is reported as one epoch."""
    run = evolve(shapes, train_set, test_set, cfg, rng, activation, callback=callback)
    return run.model, run.history
