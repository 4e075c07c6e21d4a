from fractions import Fraction

import numpy as np
import pytest

from convergence.errors import InvalidParameterError
from convergence.summation_utils import (
    NeumaierAccumulator,
    SummationStrategy,
    compensated_sum,
    exact_sum,
    naive_sum,
    pairwise_sum,
    parallel_sum,
)
from convergence.workspace import ScalarMode

CANCELLING = np.array([1e16, 1.0, -1e16])


def test_naive_loses_small_term():
    assert naive_sum(CANCELLING) == 0.0


def test_compensated_keeps_small_term():
    assert compensated_sum(CANCELLING) == 1.0


def test_neumaier_handles_larger_incoming_value():
    acc = NeumaierAccumulator()
    for x in (1.0, 1e100, 1.0, -1e100):
        acc.add(x)
    assert acc.total == 2.0


def test_neumaier_merge():
    left, right = NeumaierAccumulator(), NeumaierAccumulator()
    left.add(1e16)
    left.add(1.0)
    right.add(-1e16)
    left.merge(right)
    assert left.total == 1.0


def test_pairwise_and_empty_inputs():
    assert pairwise_sum(np.arange(1.0, 6.0)) == 15.0
    assert naive_sum(np.array([])) == 0.0
    assert compensated_sum(np.array([])) == 0.0
    np.testing.assert_array_equal(pairwise_sum(np.zeros((0, 3))), np.zeros(3))


def test_row_sums():
    rows = np.array([[1e16, 2.0], [1.0, 3.0], [-1e16, 4.0]])
    np.testing.assert_array_equal(compensated_sum(rows), [1.0, 9.0])
    np.testing.assert_array_equal(naive_sum(rows), [0.0, 9.0])


def test_exact_sum():
    assert exact_sum([0.1] * 10) == Fraction(0.1) * 10
    assert exact_sum([Fraction(1, 3)] * 3) == 1
    assert exact_sum([[Fraction(1, 2), 1], [Fraction(1, 2), 2]]) == [1, 3]


def test_exact_strategy_requires_exact_mode():
    with pytest.raises(InvalidParameterError):
        SummationStrategy.EXACT_RATIONAL.check_mode(ScalarMode.FLOAT64)
    SummationStrategy.EXACT_RATIONAL.check_mode(ScalarMode.EXACT_RATIONAL)
    SummationStrategy.NAIVE.check_mode(ScalarMode.EXACT_RATIONAL)


def test_parallel_pairwise_matches_single_threaded():
    values = np.random.default_rng(3).normal(size=10_000) * 1e6
    assert parallel_sum(values, SummationStrategy.PAIRWISE, chunk_size=256, workers=4) == pairwise_sum(values)


def test_parallel_compensated_close_to_exact():
    values = np.random.default_rng(4).normal(size=5_000) * 1e8
    expected = float(exact_sum(values.tolist()))
    assert parallel_sum(values, SummationStrategy.COMPENSATED, chunk_size=512, workers=3) == pytest.approx(
        expected, rel=1e-15, abs=1e-3
    )


def test_parallel_sum_rejects_odd_chunk():
    with pytest.raises(InvalidParameterError):
        parallel_sum(np.ones(4), SummationStrategy.NAIVE, chunk_size=3)
