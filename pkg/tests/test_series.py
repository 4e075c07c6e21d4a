import math
from fractions import Fraction

import numpy as np
import pytest

from convergence.errors import (
    ExhaustedStreamError,
    InvalidParameterError,
    InvalidPermutationError,
    UnknownSeriesError,
)
from convergence.series import (
    Permutation,
    SeriesFamily,
    SeriesShape,
    SeriesSpec,
    SignSource,
    coefficients,
    exact_coefficient,
    is_axis_aligned,
    partial_sum,
    series_from_name,
    sum_over_set,
    term,
    term_matrix,
)
from convergence.summation_utils import SummationStrategy, pairwise_sum
from convergence.workspace import ScalarMode, Vector, norm


def test_alternating_harmonic_limit(alternating_harmonic):
    s = partial_sum(alternating_harmonic, None, 10**6, SummationStrategy.COMPENSATED)
    assert abs(s[1] + math.log(2)) <= 5e-7
    assert s[1] == pytest.approx(-0.6931466805, abs=1e-9)


def test_harmonic_partial_sum():
    s = partial_sum(SeriesSpec(SeriesFamily.HARMONIC), None, 10**6)
    assert s[1] == pytest.approx(14.392726722865, abs=1e-9)


@pytest.mark.parametrize("strategy", [SummationStrategy.NAIVE, SummationStrategy.PAIRWISE])
def test_float_strategies_agree_on_short_sums(alternating_harmonic, strategy):
    expected = float(sum(Fraction((-1) ** n, n) for n in range(1, 1001)))
    assert partial_sum(alternating_harmonic, None, 1000, strategy)[1] == pytest.approx(expected, abs=1e-13)


@pytest.mark.parametrize("workers", [1, 4])
def test_threaded_pairwise_sum_matches_the_balanced_tree(alternating_harmonic, workers):
    N = 600_000
    s = partial_sum(alternating_harmonic, None, N, SummationStrategy.PAIRWISE, workers=workers)
    assert s[1] == pairwise_sum(coefficients(alternating_harmonic, 1, N + 1))


def test_threaded_compensated_sum_agrees_with_sequential(alternating_harmonic):
    N = 600_000
    threaded = partial_sum(alternating_harmonic, None, N, SummationStrategy.COMPENSATED, workers=3)
    sequential = partial_sum(alternating_harmonic, None, N, SummationStrategy.COMPENSATED)
    assert threaded[1] == pytest.approx(sequential[1], abs=1e-13)


def test_exact_partial_sum(exact_alternating_harmonic):
    s = partial_sum(exact_alternating_harmonic, None, 4, SummationStrategy.EXACT_RATIONAL)
    assert s.coords == (Fraction(-7, 12),)


def test_exact_sum_is_order_independent(exact_alternating_harmonic):
    identity = partial_sum(exact_alternating_harmonic, None, 200, SummationStrategy.EXACT_RATIONAL)
    for seed in range(5):
        shuffled = partial_sum(exact_alternating_harmonic, Permutation.random(200, seed), 200,
                               SummationStrategy.EXACT_RATIONAL)
        assert shuffled == identity


def test_exact_strategy_needs_exact_terms(alternating_harmonic):
    with pytest.raises(InvalidParameterError):
        partial_sum(alternating_harmonic, None, 10, SummationStrategy.EXACT_RATIONAL)


def test_exact_mode_rejects_fractional_alpha():
    with pytest.raises(InvalidParameterError):
        SeriesSpec(SeriesFamily.COORDINATE_DECAY, alpha=1.5, mode=ScalarMode.EXACT_RATIONAL)


def test_coordinate_decay_partial_sum_norm(coordinate_decay):
    s = partial_sum(coordinate_decay, None, 10)
    assert s.support() == list(range(1, 11))
    assert norm(s) == pytest.approx(math.sqrt(math.fsum(1 / n**2 for n in range(1, 11))), abs=1e-15)


def test_terms(coordinate_decay, alternating_harmonic):
    assert term(coordinate_decay, 4) == Vector.sparse({4: 0.25})
    assert term(alternating_harmonic, 3) == Vector.dense([-1 / 3])
    exact = SeriesSpec(SeriesFamily.ALTERNATING_POWER, alpha=2, mode=ScalarMode.EXACT_RATIONAL)
    assert term(exact, 3).coords == (Fraction(-1, 9),)
    with pytest.raises(InvalidParameterError):
        term(alternating_harmonic, 0)


def test_signed_coordinate_sign_sources():
    explicit = SeriesSpec(SeriesFamily.SIGNED_COORDINATE, alpha=1.0, signs=SignSource("explicit", signs=(1, -1, -1)))
    np.testing.assert_array_equal(np.sign(coefficients(explicit, 1, 7)), [1, -1, -1, 1, -1, -1])
    seeded = SeriesSpec(SeriesFamily.SIGNED_COORDINATE, alpha=1.0, signs=SignSource("seeded", seed=11))
    again = SeriesSpec(SeriesFamily.SIGNED_COORDINATE, alpha=1.0, signs=SignSource("seeded", seed=11))
    np.testing.assert_array_equal(coefficients(seeded, 5000, 5100), coefficients(again, 5000, 5100))
    assert exact_coefficient(seeded, 5001) == Fraction(int(np.sign(coefficients(seeded, 5001, 5002)[0])), 5001)
    with pytest.raises(InvalidParameterError):
        SignSource("seeded")
    with pytest.raises(InvalidParameterError):
        SignSource("explicit", signs=(1, 0))


def test_series_from_name():
    spec = series_from_name("coordinate-decay", alpha=2.0)
    assert spec.family is SeriesFamily.COORDINATE_DECAY
    assert spec.shape is SeriesShape.DISJOINT
    assert series_from_name("harmonic").shape is SeriesShape.SCALAR
    with pytest.raises(UnknownSeriesError):
        series_from_name("geometric")


def test_permutation_validation():
    assert Permutation.identity(3).prefix == (1, 2, 3)
    assert Permutation((2, 1, 3)).is_complete()
    assert not Permutation((2, 4)).is_complete()
    with pytest.raises(InvalidPermutationError):
        Permutation((1, 1))
    with pytest.raises(InvalidPermutationError):
        Permutation((0, 1))
    with pytest.raises(InvalidPermutationError):
        partial_sum(SeriesSpec(SeriesFamily.HARMONIC), Permutation((1, 2)), 3)


def test_permuted_partial_sum(alternating_harmonic):
    order = Permutation((2, 4, 1))
    assert partial_sum(alternating_harmonic, order, 3)[1] == pytest.approx(0.5 + 0.25 - 1.0)


def test_sum_over_set(coordinate_decay, alternating_harmonic):
    total = sum_over_set(coordinate_decay, {3, 1})
    assert total.support() == [1, 3]
    assert total[3] == pytest.approx(1 / 3, rel=1e-15)
    assert sum_over_set(alternating_harmonic, [])[1] == 0.0
    assert sum_over_set(alternating_harmonic, [2, 4])[1] == 0.75


def test_zero_series():
    zero = SeriesSpec(SeriesFamily.ZERO)
    assert partial_sum(zero, None, 1000)[1] == 0.0
    assert partial_sum(zero, None, 0)[1] == 0.0


def test_disjoint_file_series(write_file):
    path = write_file("# three axes\n1 1:1\n2 2:-0.5\n3 3:0.25\n")
    spec = SeriesSpec(SeriesFamily.FROM_FILE, path=path)
    assert spec.shape is SeriesShape.DISJOINT
    assert spec.length == 3
    assert is_axis_aligned(spec)
    assert partial_sum(spec, None, 3) == Vector.sparse({1: 1.0, 2: -0.5, 3: 0.25})
    with pytest.raises(ExhaustedStreamError):
        term(spec, 4)


def test_general_file_series(write_file):
    path = write_file("1 1:1 2:1\n2 1:1 2:-1\n")
    spec = SeriesSpec(SeriesFamily.FROM_FILE, path=path)
    assert spec.shape is SeriesShape.GENERAL
    assert not is_axis_aligned(spec)
    assert partial_sum(spec, None, 2) == Vector.sparse({1: 2.0})
    rows, columns = term_matrix(spec, [1, 2])
    assert columns == [1, 2]
    np.testing.assert_array_equal(rows, [[1.0, 1.0], [1.0, -1.0]])


def test_exact_file_series(write_file):
    path = write_file("1 1:0.1\n2 1:0.2\n")
    spec = SeriesSpec(SeriesFamily.FROM_FILE, path=path, mode=ScalarMode.EXACT_RATIONAL)
    assert spec.shape is SeriesShape.SCALAR
    assert partial_sum(spec, None, 2, SummationStrategy.EXACT_RATIONAL).coords == (Fraction(3, 10),)


def test_malformed_series_file(write_file):
    with pytest.raises(InvalidParameterError):
        SeriesSpec(SeriesFamily.FROM_FILE, path=write_file("1 1=2\n")).shape
    with pytest.raises(InvalidParameterError):
        SeriesSpec(SeriesFamily.FROM_FILE, path=write_file("1 1:1\n1 2:1\n")).shape
    with pytest.raises(InvalidParameterError):
        SeriesSpec(SeriesFamily.FROM_FILE, path=write_file("1 1:abc\n")).shape


def test_float_file_series_accepts_rationals(write_file):
    path = write_file("1 1:1/3\n2 1:-1/6\n3 1:0.25\n")
    spec = SeriesSpec(SeriesFamily.FROM_FILE, path=path)
    assert spec.shape is SeriesShape.SCALAR
    assert term(spec, 1) == Vector.sparse({1: 1 / 3})
    assert partial_sum(spec, None, 3).coords[0] == pytest.approx(1 / 3 - 1 / 6 + 0.25, abs=1e-15)
