import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qewo import stats


def test_margin_for_fifteen_runs():
    ci = stats.ci_from_summary(97.70, 0.56, 15, t_value=2.14)
    assert ci.margin == pytest.approx(0.31, abs=0.005)
    assert round(ci.low, 2) == 97.39
    assert round(ci.high, 2) == 98.01


def test_table_value_df14():
    assert stats.t_critical(14) == 2.145
    assert stats.t_critical(1) == 12.706
    assert stats.t_critical(200) == 1.960
    with pytest.raises(ValueError):
        stats.t_critical(0)


def test_student_t_ci_uses_sample_sd():
    x = [1.0, 2.0, 3.0, 4.0]
    ci = stats.student_t_ci(x)
    sd = math.sqrt(sum((v - 2.5) ** 2 for v in x) / 3)
    assert ci.mean == 2.5
    assert ci.sd == pytest.approx(sd)
    assert ci.margin == pytest.approx(3.182 * sd / 2)


def test_equal_samples_have_zero_margin():
    assert stats.student_t_ci([97.2] * 10).margin == 0.0


def test_too_few_samples():
    with pytest.raises(ValueError):
        stats.student_t_ci([1.0])


def test_improvement_percentages():
    assert stats.loss_improvement_pct(1.2477, 0.4616) == pytest.approx(63.00, abs=0.005)
    assert stats.loss_reduction(1.2477, 0.4616) == pytest.approx(0.7861)
    assert stats.loss_improvement_pct(1.5384, 1.5770) == pytest.approx(-2.51, abs=0.005)
    assert stats.accuracy_improvement_pct(58.33, 100.0) == pytest.approx(71.44, abs=0.01)
    assert stats.accuracy_improvement_pct(50.0, 47.22) == pytest.approx(-5.56, abs=0.005)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 100), min_size=2, max_size=40))
def test_interval_contains_mean(xs):
    ci = stats.student_t_ci(xs)
    assert ci.margin >= 0
    assert ci.low <= ci.mean <= ci.high
    assert ci.mean == pytest.approx(np.mean(xs))
