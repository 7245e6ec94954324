"""Student-t confidence intervals and the comparison percentages used in reports."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# two-sided 95% critical values t_{0.025, df}
T_TABLE_95 = {
    1: 12.706, 2: 4.303, 3: 3.182, 4: 2.776, 5: 2.571,
    6: 2.447, 7: 2.365, 8: 2.306, 9: 2.262, 10: 2.228,
    11: 2.201, 12: 2.179, 13: 2.160, 14: 2.145, 15: 2.131,
    16: 2.120, 17: 2.110, 18: 2.101, 19: 2.093, 20: 2.086,
    21: 2.080, 22: 2.074, 23: 2.069, 24: 2.064, 25: 2.060,
    26: 2.056, 27: 2.052, 28: 2.048, 29: 2.045, 30: 2.042,
}


@dataclass(frozen=True)
class ConfidenceInterval:
    mean: float
    margin: float
    n: int
    t_value: float
    sd: float = float("nan")

    def __post_init__(self):
        if self.margin < 0:
            raise ValueError("margin must be nonnegative")

    @property
    def low(self) -> float:
        return self.mean - self.margin

    @property
    def high(self) -> float:
        return self.mean + self.margin


def t_critical(df: int) -> float:
    if df < 1:
        raise ValueError("degrees of freedom must be >= 1")
    if df > 30:
        # normal approximation beyond the table
        return 1.960
    return T_TABLE_95[df]


def margin_of_error(sd: float, n: int, t_value: float) -> float:
    """ME = t * sd / sqrt(n)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return t_value * sd / math.sqrt(n)


def student_t_ci(samples, t_value: float | None = None) -> ConfidenceInterval:
    """95% interval for the mean with the n-1 standard deviation.

    ``t_value`` defaults to the table entry for ``n - 1`` degrees of freedom.
    """
    x = np.asarray(samples, dtype=float).reshape(-1)
    n = x.size
    if n < 2:
        raise ValueError("need at least 2 samples for a confidence interval")
    if t_value is None:
        t_value = t_critical(n - 1)
    sd = float(np.std(x, ddof=1))
    if np.all(x == x[0]):
        sd = 0.0
    return ConfidenceInterval(float(x.mean()), margin_of_error(sd, n, t_value), n, float(t_value), sd)


def ci_from_summary(mean: float, sd: float, n: int, t_value: float | None = None) -> ConfidenceInterval:
    """Interval from already-aggregated statistics."""
    if n < 2:
        raise ValueError("need n >= 2")
    t = t_critical(n - 1) if t_value is None else t_value
    return ConfidenceInterval(float(mean), margin_of_error(sd, n, t), int(n), float(t), float(sd))


def loss_reduction(classic: float, quantum: float) -> float:
    return classic - quantum


def loss_improvement_pct(classic: float, quantum: float) -> float:
    """Reduction relative to the classic loss, in percent."""
    return (classic - quantum) / classic * 100.0


def accuracy_improvement_pct(classic: float, quantum: float) -> float:
    return (quantum - classic) / classic * 100.0
