import math

import numpy as np
import pytest

from convergence import growth_utils, subset_utils
from convergence.diagnostics import (
    Multiplier,
    NetSupMethod,
    SignMode,
    TailWindow,
    WeakTailMethod,
    check_absolute,
    check_orlicz,
    coordinatewise_absolute,
    multiplier_stress,
    net_cauchy_sup,
    net_cauchy_witness,
    sign_stress,
    subseries_sample,
    weak_uniform_tail,
    weighted_sum_record,
)
from convergence.errors import InvalidParameterError, UnsupportedMethodError
from convergence.series import SeriesFamily, SeriesSpec


def _basel(n):
    return math.fsum(1.0 / k**2 for k in range(1, n + 1))


# Growth records

def test_checkpoints_are_even_and_log_spaced():
    points = growth_utils.checkpoints(10**6)
    assert points[0] == 100
    assert points[-1] == 10**6
    assert all(p % 2 == 0 for p in points)
    assert points == sorted(set(points))
    assert growth_utils.checkpoints(1) == [1]


def test_fit_growth_templates():
    points = growth_utils.checkpoints(10**6)
    assert growth_utils.fit_growth(points, [math.log(p) for p in points])[0] == growth_utils.LOGARITHMIC
    assert growth_utils.fit_growth(points, [float(p) for p in points])[0] == growth_utils.POLYNOMIAL
    assert growth_utils.fit_growth(points, [2.0 - 1.0 / p for p in points])[0] == growth_utils.BOUNDED
    assert growth_utils.fit_growth(points, [3.0] * len(points))[0] == growth_utils.BOUNDED


def test_decays():
    assert growth_utils.decays([4.0, 2.0, 1.0])
    assert not growth_utils.decays([1.0, 1.0])
    assert not growth_utils.decays([1.0, 0.4, 0.45])
    assert not growth_utils.decays([1.0])


def test_check_absolute_harmonic_growth(coordinate_decay):
    record = check_absolute(coordinate_decay, 10**6)
    assert record.total == pytest.approx(14.392726722865, abs=1e-9)
    assert record.growth_class == growth_utils.LOGARITHMIC
    assert record.is_monotone_increasing()


def test_check_absolute_basel():
    record = check_absolute(SeriesSpec(SeriesFamily.COORDINATE_DECAY, alpha=2.0), 10**6)
    assert record.growth_class == growth_utils.BOUNDED
    assert record.total == pytest.approx(1.6449330668, abs=1e-9)
    assert record.limit_estimate == pytest.approx(math.pi**2 / 6, abs=1e-4)


def test_check_orlicz(coordinate_decay):
    record = check_orlicz(coordinate_decay, 10**6)
    assert record.growth_class == growth_utils.BOUNDED
    assert record.total < 1.6450


def test_identity_sums_of_disjoint_series(coordinate_decay):
    record = weighted_sum_record(coordinate_decay, 10**4)
    assert record.total == pytest.approx(math.sqrt(_basel(10**4)), rel=1e-14)


def test_from_file_records_stop_at_file_length(write_file):
    spec = SeriesSpec(SeriesFamily.FROM_FILE, path=write_file("1 1:3 2:4\n2 1:1\n"))
    record = check_absolute(spec, 1000)
    assert record.N == 2
    assert record.total == pytest.approx(6.0)


def test_coordinatewise_absolute_agrees_in_finite_dimension(write_file):
    lines = "".join(f"{n} 1:{(-1) ** n / n!r} 2:{1 / n**2!r}\n" for n in range(1, 2001))
    spec = SeriesSpec(SeriesFamily.FROM_FILE, path=write_file(lines))
    result = coordinatewise_absolute(spec, 2000)
    assert result.finite_dimensional
    assert sorted(result.coordinates) == [1, 2]
    assert result.coordinates[1].growth_class != growth_utils.BOUNDED
    assert result.norm_record.growth_class != growth_utils.BOUNDED
    assert result.agrees


def test_coordinatewise_absolute_infinite_family(coordinate_decay):
    result = coordinatewise_absolute(coordinate_decay, 1000)
    assert not result.finite_dimensional
    assert result.agrees is None


# Net-Cauchy sup

def test_exhaustive_net_sup_alternating_harmonic(alternating_harmonic):
    value, subset = net_cauchy_witness(alternating_harmonic, TailWindow(0, 4))
    assert value == pytest.approx(4 / 3, abs=1e-14)
    assert subset == [1, 3]


def test_net_sup_oracles_agree_on_orthogonal_window(coordinate_decay):
    window = TailWindow(10, 15)
    expected = math.sqrt(math.fsum(1.0 / n**2 for n in range(11, 26)))
    exhaustive = net_cauchy_sup(coordinate_decay, window, NetSupMethod.EXHAUSTIVE)
    closed = net_cauchy_sup(coordinate_decay, window, NetSupMethod.CLOSED_FORM_COORDINATE)
    weak = weak_uniform_tail(coordinate_decay, window, WeakTailMethod.CLOSED_FORM_COORDINATE)
    assert abs(exhaustive - expected) <= 1e-12
    assert abs(closed - expected) <= 1e-12
    assert abs(weak.statistic - expected) <= 1e-12
    assert not weak.lower_bound


def test_net_sup_shrinks_along_fixed_width_ladder(coordinate_decay):
    starts = [10 * 2**i for i in range(6)]
    values = [net_cauchy_sup(coordinate_decay, TailWindow(n, 8), NetSupMethod.EXHAUSTIVE) for n in starts]
    assert all(later <= earlier for earlier, later in zip(values, values[1:]))
    expected = math.sqrt(math.fsum(1.0 / m**2 for m in range(starts[-1] + 1, starts[-1] + 9)))
    assert values[-1] == pytest.approx(expected, abs=1e-12)
    assert growth_utils.decays(values)


def test_greedy_matches_exhaustive_on_scalar_windows(alternating_harmonic):
    for start in (0, 7, 40):
        window = TailWindow(start, 12)
        assert net_cauchy_sup(alternating_harmonic, window, NetSupMethod.GREEDY_SIGN_ALIGN) == pytest.approx(
            net_cauchy_sup(alternating_harmonic, window, NetSupMethod.EXHAUSTIVE), rel=1e-14
        )


def test_exhaustive_window_limit(alternating_harmonic):
    with pytest.raises(InvalidParameterError):
        net_cauchy_sup(alternating_harmonic, TailWindow(0, 25))


def test_closed_form_needs_disjoint_terms(alternating_harmonic):
    with pytest.raises(UnsupportedMethodError):
        net_cauchy_sup(alternating_harmonic, TailWindow(0, 5), NetSupMethod.CLOSED_FORM_COORDINATE)


def test_exhaustive_workers_do_not_change_result(coordinate_decay):
    window = TailWindow(3, 18)
    assert net_cauchy_witness(coordinate_decay, window, workers=1) == net_cauchy_witness(
        coordinate_decay, window, workers=4
    )


def test_tail_window_validation():
    with pytest.raises(InvalidParameterError):
        TailWindow(-1, 3)
    with pytest.raises(InvalidParameterError):
        TailWindow(0, 0)


# Sign stress

def test_sign_stress_alternating_harmonic(alternating_harmonic):
    result = sign_stress(alternating_harmonic, 4)
    assert result.max_value == pytest.approx(25 / 12, abs=1e-14)
    assert result.to_dict()["argmaxPattern"] == "-+-+"
    # 1 - 1/2 - 1/3 - 1/4
    assert result.min_value == pytest.approx(1 / 12, abs=1e-14)


def test_sign_invariance_under_orthogonality(coordinate_decay):
    result = sign_stress(coordinate_decay, 10)
    expected = math.sqrt(_basel(10))
    assert abs(result.max_value - expected) <= 1e-12
    assert abs(result.min_value - expected) <= 1e-12


def test_aligned_and_sampled_sign_stress(alternating_harmonic, coordinate_decay):
    aligned = sign_stress(alternating_harmonic, 1000, SignMode.ALIGNED)
    assert aligned.max_value == pytest.approx(math.fsum(1.0 / n for n in range(1, 1001)))
    sampled = sign_stress(coordinate_decay, 500, SignMode.SAMPLED, count=8, seed=3)
    assert sampled.max_value == pytest.approx(math.sqrt(_basel(500)))
    assert sampled.to_dict()["seed"] == 3
    with pytest.raises(InvalidParameterError):
        sign_stress(coordinate_decay, 500, SignMode.SAMPLED, count=8)


def test_sampled_sign_stress_is_seeded(alternating_harmonic):
    a = sign_stress(alternating_harmonic, 200, SignMode.SAMPLED, count=20, seed=9)
    b = sign_stress(alternating_harmonic, 200, SignMode.SAMPLED, count=20, seed=9)
    assert a.max_value == b.max_value
    assert a.argmax == b.argmax


def test_sign_stress_exhaustive_limit(alternating_harmonic):
    with pytest.raises(InvalidParameterError):
        sign_stress(alternating_harmonic, 25)
    assert sign_stress(alternating_harmonic, 0).max_value == 0.0


# Multipliers

def test_alternating_log_multiplier_diverges(alternating_harmonic):
    result = multiplier_stress(alternating_harmonic, Multiplier.alternating_log(), 10**7)
    record = result.record
    assert record.is_monotone_increasing()
    assert record.total > 2.0
    assert record.growth_class != growth_utils.BOUNDED
    assert result.declared_bound == pytest.approx(1 / math.log(2))


def test_multiplier_bound_is_enforced(alternating_harmonic):
    with pytest.raises(InvalidParameterError):
        multiplier_stress(alternating_harmonic, Multiplier.constant(2.0), 100, declared_bound=1.0)


def test_multipliers_on_unconditional_series(coordinate_decay):
    random = multiplier_stress(coordinate_decay, Multiplier.random_bounded(1.0, seed=5), 10**5)
    assert random.record.total <= math.sqrt(_basel(10**5)) + 1e-12
    halved = multiplier_stress(coordinate_decay, Multiplier.constant(0.5), 10**5)
    assert halved.record.total == pytest.approx(0.5 * math.sqrt(_basel(10**5)), rel=1e-14)
    assert halved.record.growth_class == growth_utils.BOUNDED


def test_threshold_mask_multiplier(alternating_harmonic):
    lam = Multiplier.threshold_mask([2, 4, 6])
    np.testing.assert_array_equal(lam.values(np.arange(1, 8)), [0, 1, 0, 1, 0, 1, 0])
    result = multiplier_stress(alternating_harmonic, lam, 10)
    assert result.record.total == pytest.approx(1 / 2 + 1 / 4 + 1 / 6)


def test_multiplier_validation():
    with pytest.raises(InvalidParameterError):
        Multiplier("geometric")
    with pytest.raises(InvalidParameterError):
        Multiplier.random_bounded(1.0, seed=None)


# Weak tail and subseries

def test_sphere_search_is_a_lower_bound(write_file):
    lines = "".join(f"{n} 1:{np.cos(n)!r} 2:{np.sin(n)!r}\n" for n in range(1, 31))
    spec = SeriesSpec(SeriesFamily.FROM_FILE, path=write_file(lines))
    window = TailWindow(0, 30)
    result = weak_uniform_tail(spec, window, WeakTailMethod.SPHERE_SEARCH, iterations=200, seed=1)
    assert result.lower_bound
    assert result.seed == 1
    assert result.statistic <= 30.0 + 1e-9
    # directions n mod 2π are spread out, so every unit functional collects about 30·2/π
    assert result.statistic > 15.0
    with pytest.raises(InvalidParameterError):
        weak_uniform_tail(spec, window, WeakTailMethod.SPHERE_SEARCH)
    with pytest.raises(UnsupportedMethodError):
        weak_uniform_tail(spec, window, WeakTailMethod.CLOSED_FORM_COORDINATE)


def test_weak_tail_groups_repeated_axes(alternating_harmonic):
    result = weak_uniform_tail(alternating_harmonic, TailWindow(0, 4))
    assert result.statistic == pytest.approx(1 + 1 / 2 + 1 / 3 + 1 / 4)


def test_subseries_oscillation(alternating_harmonic, coordinate_decay):
    conditional = subseries_sample(alternating_harmonic, 10**4, 4, seed=0)
    assert conditional.aligned["positive"] > 0.3
    unconditional = subseries_sample(coordinate_decay, 10**4, 4, seed=0)
    assert unconditional.worst < 0.02
    assert subseries_sample(coordinate_decay, 10**4, 4, seed=0).samples == unconditional.samples


def test_subseries_validation(alternating_harmonic):
    with pytest.raises(InvalidParameterError):
        subseries_sample(alternating_harmonic, 100, 0, seed=0)


def test_subset_utils_extremes():
    value, positions = subset_utils.max_subset_norm(np.array([[1.0], [-2.0], [3.0]]))
    assert value == 4.0
    assert positions == [0, 2]
    hi, argmax, lo, argmin = subset_utils.sign_pattern_extremes(np.array([[1.0], [1.0]]))
    assert (hi, lo) == (2.0, 0.0)
    assert argmax == [1, 1]
    assert subset_utils.mask_positions(0b101, 3) == [0, 2]
