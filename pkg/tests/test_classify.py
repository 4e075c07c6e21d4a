import json

import pytest

from convergence import diagnostics
from convergence.errors import InvalidParameterError
from convergence.series import SeriesFamily, SeriesSpec


def test_zero_series_is_absolute():
    report = diagnostics.classify(SeriesSpec(SeriesFamily.ZERO), 1000, seed=1)
    assert report.verdict == diagnostics.ABSOLUTE
    assert report.seed == 1
    assert report.budget == 1000
    payload = report.to_dict()
    assert payload["heuristic"] is True
    assert set(payload["perCondition"]) == {
        "absolute", "orlicz", "identity-order", "net-cauchy", "weak-tail", "sign-stress", "multiplier", "subseries"
    }
    json.dumps(payload)


def test_tiny_budget_is_rejected():
    with pytest.raises(InvalidParameterError):
        diagnostics.classify(SeriesSpec(SeriesFamily.ZERO), 1)


def test_checkpoint_rows_cover_every_record():
    report = diagnostics.classify(SeriesSpec(SeriesFamily.ZERO), 1000)
    names = {name for name, _, _ in report.checkpoint_rows()}
    assert {"absolute", "orlicz", "identity", "multiplier-alternating-log"} <= names


def test_workers_do_not_change_the_report(alternating_harmonic):
    single = diagnostics.classify(alternating_harmonic, 20_000, seed=2, workers=1)
    pooled = diagnostics.classify(alternating_harmonic, 20_000, seed=2, workers=4)
    assert single.verdict == pooled.verdict
    assert single.to_dict()["perCondition"] == pooled.to_dict()["perCondition"]


def test_unconditional_but_not_absolute(coordinate_decay):
    report = diagnostics.classify(coordinate_decay, 10**6)
    assert report.verdict == diagnostics.UNCONDITIONAL_EVIDENCE
    absolute = report.per_condition["absolute"]
    assert absolute.verdict == diagnostics.FAIL
    assert absolute.detail["class"] == "logarithmic"
    assert absolute.statistic == pytest.approx(14.39, abs=5e-3)
    assert report.growth_fits["orlicz"].total < 1.6450
    assert report.per_condition["net-cauchy"].verdict == diagnostics.PASS


def test_square_summable_decay_is_absolute():
    report = diagnostics.classify(SeriesSpec(SeriesFamily.COORDINATE_DECAY, alpha=2.0), 10**6)
    assert report.verdict == diagnostics.ABSOLUTE


def test_alternating_harmonic_is_conditional(alternating_harmonic):
    report = diagnostics.classify(alternating_harmonic, 10**6)
    assert report.verdict == diagnostics.CONDITIONAL_EVIDENCE
    assert report.per_condition["identity-order"].verdict == diagnostics.PASS


def test_harmonic_is_divergent():
    report = diagnostics.classify(SeriesSpec(SeriesFamily.HARMONIC), 10**6)
    assert report.verdict == diagnostics.DIVERGENT_EVIDENCE


def _forced(**overrides):
    names = ("absolute", "orlicz", "identity-order", "net-cauchy", "weak-tail", "sign-stress", "multiplier",
             "subseries")
    return {name: diagnostics.ConditionEvidence(0.0, "forced", 1, overrides.get(name, diagnostics.PASS))
            for name in names}


def test_absolute_verdict_needs_the_weaker_conditions():
    assert diagnostics._aggregate(_forced()) == diagnostics.ABSOLUTE
    assert diagnostics._aggregate(_forced(**{"net-cauchy": diagnostics.FAIL})) != diagnostics.ABSOLUTE
    assert diagnostics._aggregate(_forced(orlicz=diagnostics.FAIL)) != diagnostics.ABSOLUTE
    assert diagnostics._aggregate(_forced(**{"sign-stress": diagnostics.FAIL})) == diagnostics.CONDITIONAL_EVIDENCE


def test_failed_net_cauchy_ladder_blocks_absolute_verdict(monkeypatch):
    monkeypatch.setattr(diagnostics, "net_cauchy_sup", lambda spec, window, method=None, workers=1: float(window.N))
    report = diagnostics.classify(SeriesSpec(SeriesFamily.ZERO), 1000)
    assert report.per_condition["absolute"].verdict == diagnostics.PASS
    assert report.per_condition["net-cauchy"].verdict == diagnostics.FAIL
    assert report.verdict != diagnostics.ABSOLUTE
