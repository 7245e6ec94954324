from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import nn


@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    test_loss: float
    train_acc: float
    test_acc: float
    wall_time_ms: float = 0.0
    grover_fallback_count: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


def evaluate(model: nn.MlpModel, X, Y, loss_cfg: nn.LossConfig) -> tuple[float, float]:
    """(loss, accuracy) with dropout off."""
    P = nn.forward(model, X)
    return nn.loss(P, Y, model, loss_cfg), nn.accuracy(P, Y)


def epoch_metrics(epoch, model, train, test, loss_cfg, wall_time_ms=0.0, fallbacks=0):
    train_loss, train_acc = evaluate(model, train[0], train[1], loss_cfg)
    if test is not None:
        test_loss, test_acc = evaluate(model, test[0], test[1], loss_cfg)
    else:
        test_loss, test_acc = float("nan"), float("nan")
    return EpochMetrics(epoch, train_loss, test_loss, train_acc, test_acc,
                        float(wall_time_ms), int(fallbacks))


def iterate_batches(n: int, batch_size: int | None, rng):
    """Shuffled index batches covering ``range(n)`` once."""
    order = rng.permutation(n) if rng is not None else np.arange(n)
    size = n if not batch_size else int(batch_size)
    for start in range(0, n, size):
        yield order[start:start + size]
