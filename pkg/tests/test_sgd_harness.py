import math

import numpy as np
import pytest

from convergence.errors import InvalidParameterError, InvalidPermutationError
from convergence.io_utils import write_matrix_file
from convergence.series import Permutation
from convergence.sgd_harness import (
    GradientStream,
    LrSchedule,
    accumulate,
    clipping_multipliers,
    exact_reference,
    heavy_tailed_stream,
    ill_conditioned_stream,
    multiplier_variant,
    permutation_sensitivity,
    quadratic_stream,
    stream_from_file,
)
from convergence.summation_utils import SummationStrategy


@pytest.fixture(scope="module")
def quadratic():
    return quadratic_stream(10, 1000, seed=0)


def test_exact_accumulation_is_order_invariant(quadratic):
    sched = LrSchedule("constant", eta=0.01)
    reference = accumulate(quadratic, sched, None, SummationStrategy.EXACT_RATIONAL)
    for seed in range(50):
        order = Permutation.random(quadratic.N, seed)
        assert accumulate(quadratic, sched, order, SummationStrategy.EXACT_RATIONAL) == reference


def test_compensated_deviation_is_tiny(quadratic):
    report = permutation_sensitivity(quadratic, LrSchedule(eta=0.01), 50, seed=1,
                                     strategies=[SummationStrategy.COMPENSATED, SummationStrategy.EXACT_RATIONAL])
    compensated = report.strategies["compensated"]
    assert compensated.relative_deviation <= 1e-12
    assert report.strategies["exact-rational"].max_pairwise_deviation == 0.0


def test_naive_deviation_dominates_on_ill_conditioned_stream():
    stream = ill_conditioned_stream(8, 2000, seed=4)
    report = permutation_sensitivity(stream, LrSchedule(eta=1.0), 20, seed=2,
                                     strategies=[SummationStrategy.NAIVE, SummationStrategy.COMPENSATED,
                                                 SummationStrategy.PAIRWISE])
    naive = report.strategies["naive"]
    compensated = report.strategies["compensated"]
    assert naive.max_pairwise_deviation > 1e-3
    assert naive.max_pairwise_deviation >= 1e3 * compensated.max_pairwise_deviation
    assert compensated.reference_deviation <= 1e-9
    assert naive.relative_to_naive == 1.0
    assert "pairwise" in report.to_dict()["strategies"]


def test_ill_conditioned_spikes_cancel_exactly():
    stream = ill_conditioned_stream(3, 400, seed=1)
    assert stream.gradients.shape == (400, 3)
    assert np.max(np.abs(stream.gradients)) >= 1e15
    small = stream.gradients[np.abs(stream.gradients) <= 1.0]
    expected = [-math.fsum(col[np.abs(col) <= 1.0]) for col in stream.gradients.T]
    np.testing.assert_allclose(exact_reference(stream, LrSchedule(eta=1.0)), expected, rtol=0, atol=1e-12)
    assert small.size == 3 * 200


@pytest.mark.parametrize("pairing", ["position", "sample"])
def test_accumulation_is_additive_over_concatenation(pairing):
    a = quadratic_stream(4, 30, seed=11)
    b = quadratic_stream(4, 20, seed=12)
    sched = LrSchedule("constant", eta=0.05)
    exact = SummationStrategy.EXACT_RATIONAL
    joined = accumulate(a.concat(b), sched, None, exact, pairing)
    assert joined == accumulate(a, sched, None, exact, pairing) + accumulate(b, sched, None, exact, pairing)
    order = Permutation.random(a.N + b.N, 5)
    assert accumulate(a.concat(b), sched, order, exact, pairing) == joined


def test_explicit_orders(quadratic):
    orders = [Permutation.identity(quadratic.N), Permutation.random(quadratic.N, 3)]
    report = permutation_sensitivity(quadratic, LrSchedule(), 0, seed=0,
                                     strategies=[SummationStrategy.PAIRWISE], orders=orders)
    assert report.strategies["pairwise"].num_perms == 2
    with pytest.raises(InvalidParameterError):
        permutation_sensitivity(quadratic, LrSchedule(), 1, seed=0, strategies=[SummationStrategy.NAIVE])


def test_position_pairing_breaks_invariance_even_exactly():
    stream = quadratic_stream(3, 50, seed=7)
    sched = LrSchedule("inverse-sqrt", eta=0.1)
    order = Permutation.random(stream.N, 1)
    exact = SummationStrategy.EXACT_RATIONAL
    assert accumulate(stream, sched, order, exact, "sample") == accumulate(stream, sched, None, exact, "sample")
    assert accumulate(stream, sched, order, exact, "position") != accumulate(stream, sched, None, exact, "position")


def test_accumulate_matches_direct_formula():
    stream = GradientStream(np.array([[1.0, 2.0], [3.0, -4.0]]))
    delta = accumulate(stream, LrSchedule("from-list", values=(0.5, 0.25)))
    assert delta.coords == (-1.25, 0.0)
    np.testing.assert_array_equal(exact_reference(stream, LrSchedule("from-list", values=(0.5, 0.25))), [-1.25, 0.0])


def test_order_must_be_complete(quadratic):
    with pytest.raises(InvalidPermutationError):
        accumulate(quadratic, LrSchedule(), Permutation((1, 2, 3)))


def test_schedule_validation():
    with pytest.raises(InvalidParameterError):
        LrSchedule("cosine")
    with pytest.raises(InvalidParameterError):
        LrSchedule(eta=0.0)
    with pytest.raises(InvalidParameterError):
        LrSchedule("from-list", values=(0.1, -0.1))
    with pytest.raises(InvalidParameterError):
        LrSchedule("from-list", values=(0.1,)).rates(2)
    np.testing.assert_allclose(LrSchedule("inverse-sqrt", eta=1.0).rates(4), [1.0, 1 / 2**0.5, 1 / 3**0.5, 0.5])


def test_stream_validation_and_concat():
    with pytest.raises(InvalidParameterError):
        GradientStream(np.array([1.0, 2.0]))
    with pytest.raises(InvalidParameterError):
        GradientStream(np.array([[np.nan]]))
    a = quadratic_stream(2, 5, seed=0)
    b = heavy_tailed_stream(2, 3, seed=0)
    assert a.concat(b).N == 8
    with pytest.raises(InvalidParameterError):
        a.concat(quadratic_stream(3, 5, seed=0))
    with pytest.raises(ValueError):
        a.gradients[0, 0] = 1.0


def test_stream_from_file(tmp_path):
    path = tmp_path / "grads.txt"
    write_matrix_file(path, [[0.5, -1.0], [0.25, 2.0], [1.0, 1.0]])
    stream = stream_from_file(path)
    assert (stream.N, stream.d) == (3, 2)
    assert stream.to_dict()["source"] == "file"


def test_multiplier_variant_respects_crude_bound(quadratic):
    sched = LrSchedule(eta=0.01)
    lam = clipping_multipliers(quadratic, 1.0)
    assert np.all((lam > 0) & (lam <= 1.0))
    update = multiplier_variant(quadratic, sched, lam, bound=1.0)
    assert update.bound_holds
    assert update.to_dict()["boundHolds"] is True
    with pytest.raises(InvalidParameterError):
        multiplier_variant(quadratic, sched, lam * 3.0, bound=1.0)
    with pytest.raises(InvalidParameterError):
        multiplier_variant(quadratic, sched, lam[:-1], bound=1.0)


def test_clipped_steps_have_bounded_norm(quadratic):
    lam = clipping_multipliers(quadratic, 0.5)
    norms = np.linalg.norm(quadratic.gradients * lam[:, None], axis=1)
    assert np.all(norms <= 0.5 + 1e-12)
