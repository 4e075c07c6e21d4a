"""
Finite-truncation diagnostics for unconditional convergence.

Each function measures one equivalent condition on a finite window of the
series; classify() aggregates them into a heuristic verdict. None of these
prove anything about the infinite series, so verdicts carry "evidence".
"""
import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from convergence import growth_utils, subset_utils
from convergence.errors import InvalidParameterError, UnsupportedMethodError
from convergence.growth_utils import GrowthRecord
from convergence.series import (
    SeriesShape,
    SeriesSpec,
    axes_at,
    coefficients,
    coefficients_at,
    is_axis_aligned,
    norms_at,
    term_matrix,
)

logger = logging.getLogger(__name__)

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"

ABSOLUTE = "absolute"
UNCONDITIONAL_EVIDENCE = "unconditional-evidence"
CONDITIONAL_EVIDENCE = "conditional-evidence"
DIVERGENT_EVIDENCE = "divergent-evidence"
INCONCLUSIVE_VERDICT = "inconclusive"

LADDER = (100, 1000, 10000)
LADDER_WIDTH = 20
SUBSERIES_CAP = 100_000
SUBSERIES_SAMPLES = 16
SPHERE_RESTARTS = 8


@dataclass(frozen=True)
class TailWindow:
    """Index window (N, N+K]: subsets F with min(F) > N and max(F) <= N+K."""

    N: int
    K: int

    def __post_init__(self):
        if self.N < 0 or self.K < 1:
            raise InvalidParameterError(f"Window needs N >= 0 and K >= 1, got N={self.N}, K={self.K}")

    def indices(self) -> np.ndarray:
        return np.arange(self.N + 1, self.N + self.K + 1, dtype=np.int64)

    def to_dict(self) -> dict:
        return {"N": self.N, "K": self.K}


class NetSupMethod(str, enum.Enum):
    EXHAUSTIVE = "exhaustive"
    GREEDY_SIGN_ALIGN = "greedy-sign-align"
    CLOSED_FORM_COORDINATE = "closed-form-coordinate"


class SignMode(str, enum.Enum):
    EXHAUSTIVE = "exhaustive"
    SAMPLED = "sampled"
    ALIGNED = "aligned"


class WeakTailMethod(str, enum.Enum):
    CLOSED_FORM_COORDINATE = "closed-form-coordinate"
    SPHERE_SEARCH = "sphere-search"


def _fsum(values: np.ndarray) -> float:
    return math.fsum(np.asarray(values, dtype=float).tolist())


def _l2(values: np.ndarray) -> float:
    return math.sqrt(_fsum(np.square(values)))


def _pattern_string(signs: Optional[Sequence[int]]) -> Optional[str]:
    if signs is None:
        return None
    return "".join("+" if s > 0 else "-" for s in signs)


def _effective_n(spec: SeriesSpec, N: int) -> int:
    length = spec.length
    return N if length is None else min(N, length)


def _index_range(start: int, stop: int) -> np.ndarray:
    return np.arange(start, stop, dtype=np.int64)


# Absolute and Orlicz checks

def check_absolute(spec: SeriesSpec, N: int) -> GrowthRecord:
    """
    Growth record of Σ_{n≤N} ‖x_n‖ at logarithmic checkpoints.

    Args:
        spec: Series definition
        N: Number of terms (>= 1)

    Returns:
        GrowthRecord with class bounded, logarithmic, polynomial or other
    """
    N = _effective_n(spec, N)
    record = growth_utils.growth_record(lambda a, b: norms_at(spec, _index_range(a, b)), N)
    logger.info(f"check_absolute {spec.family.value}: Σ‖x_n‖ = {record.total:.9g} at N={N}, {record.growth_class}")
    return record


def check_orlicz(spec: SeriesSpec, N: int) -> GrowthRecord:
    """Growth record of Σ_{n≤N} ‖x_n‖²."""
    N = _effective_n(spec, N)
    record = growth_utils.growth_record(lambda a, b: np.square(norms_at(spec, _index_range(a, b))), N)
    logger.info(f"check_orlicz {spec.family.value}: Σ‖x_n‖² = {record.total:.9g} at N={N}, {record.growth_class}")
    return record


def weighted_sum_record(spec: SeriesSpec, N: int,
                        weights: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> GrowthRecord:
    """
    Growth record of ‖Σ_{n≤p} w_n x_n‖₂ over the checkpoint ladder.

    weights(indices) gives w_n; None means w_n = 1 (identity-order sums).
    """
    N = _effective_n(spec, N)
    weigh = weights or (lambda idx: np.ones(len(idx)))
    shape = spec.shape
    if shape is SeriesShape.SCALAR:
        return growth_utils.growth_record(
            lambda a, b: weigh(_index_range(a, b)) * coefficients(spec, a, b), N, finish=np.abs
        )
    if shape is SeriesShape.DISJOINT:
        return growth_utils.growth_record(
            lambda a, b: np.square(weigh(_index_range(a, b)) * coefficients(spec, a, b)), N, finish=np.sqrt
        )
    idx = _index_range(1, N + 1)
    rows, _ = term_matrix(spec, idx)
    running = np.cumsum(rows * weigh(idx)[:, None], axis=0)
    points = growth_utils.checkpoints(N)
    values = [float(np.linalg.norm(running[p - 1])) if p >= 1 else 0.0 for p in points]
    return growth_utils.record_from_values(points, values, float(np.linalg.norm(running[-1])), N)


def coordinatewise_absolute(spec: SeriesSpec, N: int) -> "CoordinatewiseResult":
    """
    Per-coordinate absolute sums Σ_n |c_n^{(j)}| next to Σ_n ‖x_n‖.

    In a finite-dimensional ambient space absolute convergence of every
    coordinate series is equivalent to absolute convergence in norm, so the
    two growth classes should agree. Infinite coordinate families report
    finite_dimensional = False and no agreement flag.
    """
    N = _effective_n(spec, N)
    norm_record = check_absolute(spec, N)
    shape = spec.shape
    if shape is SeriesShape.SCALAR:
        records = {1: norm_record}
    elif shape is SeriesShape.DISJOINT:
        return CoordinatewiseResult({}, norm_record, False, None)
    else:
        rows, columns = term_matrix(spec, _index_range(1, N + 1))
        points = growth_utils.checkpoints(N)
        running = np.cumsum(np.abs(rows), axis=0)
        records = {
            col: growth_utils.record_from_values(
                points, [float(running[p - 1, k]) for p in points], float(running[-1, k]), N
            )
            for k, col in enumerate(columns)
        }
    bounded_coords = all(r.growth_class == growth_utils.BOUNDED for r in records.values())
    agrees = bounded_coords == (norm_record.growth_class == growth_utils.BOUNDED)
    return CoordinatewiseResult(records, norm_record, True, agrees)


@dataclass
class CoordinatewiseResult:
    coordinates: Dict[int, GrowthRecord]
    norm_record: GrowthRecord
    finite_dimensional: bool
    agrees: Optional[bool]

    def to_dict(self) -> dict:
        return {
            "finiteDimensional": self.finite_dimensional,
            "agrees": self.agrees,
            "norm": self.norm_record.to_dict(),
            "coordinates": {str(j): r.to_dict() for j, r in self.coordinates.items()},
        }


# Net Cauchy condition over finite subsets

def net_cauchy_witness(spec: SeriesSpec, window: TailWindow,
                       method: NetSupMethod = NetSupMethod.EXHAUSTIVE,
                       workers: int = 1) -> Tuple[float, List[int]]:
    """
    sup over F ⊆ (N, N+K] of ‖Σ_{n∈F} x_n‖₂, with a maximizing F.

    Raises:
        InvalidParameterError: Exhaustive with K > 24
        UnsupportedMethodError: Method does not fit the series shape
    """
    idx = window.indices()
    shape = spec.shape
    if method is NetSupMethod.EXHAUSTIVE:
        if window.K > subset_utils.MAX_EXHAUSTIVE:
            raise InvalidParameterError(
                f"Exhaustive net-sup supports K <= {subset_utils.MAX_EXHAUSTIVE}, got {window.K}"
            )
        rows, _ = term_matrix(spec, idx)
        value, positions = subset_utils.max_subset_norm(rows, workers=workers)
        return value, [int(idx[p]) for p in positions]
    if method is NetSupMethod.GREEDY_SIGN_ALIGN and shape is SeriesShape.SCALAR:
        c = coefficients_at(spec, idx)
        positive, negative = _fsum(c[c > 0]), -_fsum(c[c < 0])
        if positive >= negative:
            return positive, [int(n) for n in idx[c > 0]]
        return negative, [int(n) for n in idx[c < 0]]
    if shape is SeriesShape.DISJOINT and method in (NetSupMethod.GREEDY_SIGN_ALIGN,
                                                     NetSupMethod.CLOSED_FORM_COORDINATE):
        # orthogonal terms: every extra term only adds to the norm
        c = coefficients_at(spec, idx)
        return _l2(c), [int(n) for n in idx[c != 0]]
    raise UnsupportedMethodError(f"{method.value} does not support {shape.value} series")


def net_cauchy_sup(spec: SeriesSpec, window: TailWindow,
                   method: NetSupMethod = NetSupMethod.EXHAUSTIVE, workers: int = 1) -> float:
    """Estimate sup_{F ⊆ (N, N+K]} ‖Σ_{n∈F} x_n‖."""
    value, _ = net_cauchy_witness(spec, window, method, workers)
    logger.debug(f"net_cauchy_sup {spec.family.value} window=({window.N}, {window.N + window.K}] "
                 f"{method.value}: {value:.12g}")
    return value


def scalable_net_method(spec: SeriesSpec) -> Optional[NetSupMethod]:
    """Method usable on arbitrarily wide windows, or None."""
    if spec.shape is SeriesShape.SCALAR:
        return NetSupMethod.GREEDY_SIGN_ALIGN
    if spec.shape is SeriesShape.DISJOINT:
        return NetSupMethod.CLOSED_FORM_COORDINATE
    return None


# Sign stress

@dataclass
class SignStressResult:
    max_value: float
    argmax: Optional[List[int]]
    min_value: Optional[float]
    argmin: Optional[List[int]]
    method: str
    samples: int
    N: int
    seed: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "method": self.method,
            "samples": self.samples,
            "seed": self.seed,
            "max": self.max_value,
            "min": self.min_value,
            "argmaxPattern": _pattern_string(self.argmax),
            "argminPattern": _pattern_string(self.argmin),
        }


def sign_stress(spec: SeriesSpec, N: int, mode: SignMode = SignMode.EXHAUSTIVE,
                count: Optional[int] = None, seed: Optional[int] = None,
                workers: int = 1) -> SignStressResult:
    """
    max over sign patterns ε of ‖Σ_{n≤N} ε_n x_n‖.

    Args:
        spec: Series definition
        N: Number of terms (Exhaustive requires N <= 24)
        mode: Exhaustive, Sampled (needs count and seed) or Aligned
        count: Number of sampled patterns
        seed: Seed for Sampled mode
        workers: Threads for exhaustive enumeration

    Returns:
        SignStressResult with the max, its pattern and (where defined) the min
    """
    if N < 0:
        raise InvalidParameterError(f"N must be >= 0, got {N}")
    if N == 0:
        return SignStressResult(0.0, [], 0.0, [], mode.value, 1, 0, seed)
    idx = _index_range(1, N + 1)
    shape = spec.shape
    if mode is SignMode.EXHAUSTIVE:
        if N > subset_utils.MAX_EXHAUSTIVE:
            raise InvalidParameterError(f"Exhaustive sign stress supports N <= {subset_utils.MAX_EXHAUSTIVE}, got {N}")
        rows, _ = term_matrix(spec, idx)
        hi, argmax, lo, argmin = subset_utils.sign_pattern_extremes(rows, workers=workers)
        return SignStressResult(hi, argmax, lo, argmin, mode.value, 1 << N, N)
    if mode is SignMode.ALIGNED:
        if shape is SeriesShape.SCALAR:
            c = coefficients_at(spec, idx)
            signs = np.where(c < 0, -1, 1)
            return SignStressResult(_fsum(np.abs(c)), signs.tolist(), None, None, mode.value, 1, N)
        if shape is SeriesShape.DISJOINT:
            # norm is sign invariant on disjoint supports
            value = _l2(coefficients_at(spec, idx))
            return SignStressResult(value, [1] * N, value, [1] * N, mode.value, 1, N)
        raise UnsupportedMethodError("Aligned sign stress needs a scalar or disjoint-support series")
    if count is None or count < 1 or seed is None:
        raise InvalidParameterError("Sampled sign stress needs count >= 1 and an explicit seed")
    rng = np.random.default_rng(seed)
    if shape is SeriesShape.DISJOINT:
        rows, fixed = None, _l2(coefficients_at(spec, idx))
    else:
        rows, fixed = term_matrix(spec, idx)[0], None
    best: Tuple[float, List[int]] = (-1.0, [])
    worst: Tuple[float, List[int]] = (math.inf, [])
    for _ in range(count):
        signs = rng.integers(0, 2, size=N) * 2 - 1
        value = fixed if rows is None else float(np.linalg.norm(signs @ rows))
        if value > best[0]:
            best = (value, signs.tolist())
        if value < worst[0]:
            worst = (value, signs.tolist())
    return SignStressResult(best[0], best[1], worst[0], worst[1], mode.value, count, N, seed)


# Bounded multipliers

@dataclass(frozen=True)
class Multiplier:
    """
    Bounded scalar sequence λ_n.

    kind: "constant" (c), "threshold-mask" (1 on keep, else 0),
    "alternating-log" ((-1)^n / ln(n+1)) or "random-bounded" (uniform in
    [-c, c], seeded).
    """

    kind: str
    c: float = 1.0
    keep: FrozenSet[int] = frozenset()
    seed: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("constant", "threshold-mask", "alternating-log", "random-bounded"):
            raise InvalidParameterError(f"Unknown multiplier {self.kind!r}")
        if self.kind == "random-bounded" and (self.seed is None or not self.c >= 0):
            raise InvalidParameterError("random-bounded needs C >= 0 and an explicit seed")

    @classmethod
    def constant(cls, c: float) -> "Multiplier":
        return cls("constant", c=c)

    @classmethod
    def threshold_mask(cls, keep) -> "Multiplier":
        return cls("threshold-mask", keep=frozenset(int(k) for k in keep))

    @classmethod
    def alternating_log(cls) -> "Multiplier":
        return cls("alternating-log")

    @classmethod
    def random_bounded(cls, c: float, seed: int) -> "Multiplier":
        return cls("random-bounded", c=c, seed=seed)

    @property
    def bound(self) -> float:
        """sup_n |λ_n|."""
        if self.kind == "constant":
            return abs(self.c)
        if self.kind == "threshold-mask":
            return 1.0 if self.keep else 0.0
        if self.kind == "alternating-log":
            return 1.0 / math.log(2.0)
        return self.c

    def values(self, indices: np.ndarray) -> np.ndarray:
        indices = np.asarray(indices, dtype=np.int64)
        if self.kind == "constant":
            return np.full(len(indices), float(self.c))
        if self.kind == "threshold-mask":
            return np.fromiter((1.0 if int(n) in self.keep else 0.0 for n in indices), dtype=float,
                               count=len(indices))
        if self.kind == "alternating-log":
            return np.where(indices % 2 == 0, 1.0, -1.0) / np.log(indices + 1.0)
        out = np.empty(len(indices))
        blocks = (indices - 1) // 4096
        for block in np.unique(blocks):
            table = np.random.default_rng([self.seed, int(block)]).uniform(-self.c, self.c, size=4096)
            mask = blocks == block
            out[mask] = table[(indices[mask] - 1) % 4096]
        return out

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "bound": self.bound}
        if self.kind in ("constant", "random-bounded"):
            out["c"] = self.c
        if self.kind == "threshold-mask":
            out["keep"] = sorted(self.keep)
        if self.seed is not None:
            out["seed"] = self.seed
        return out


@dataclass
class MultiplierStressResult:
    multiplier: Multiplier
    declared_bound: float
    record: GrowthRecord

    def to_dict(self) -> dict:
        return {
            "multiplier": self.multiplier.to_dict(),
            "declaredBound": self.declared_bound,
            "record": self.record.to_dict(),
        }


def multiplier_stress(spec: SeriesSpec, multiplier: Multiplier, N: int,
                      declared_bound: Optional[float] = None) -> MultiplierStressResult:
    """
    Growth record of ‖Σ_{n≤p} λ_n x_n‖ for a bounded multiplier sequence.

    Raises:
        InvalidParameterError: If sup|λ_n| exceeds the declared bound
    """
    bound = multiplier.bound if declared_bound is None else declared_bound
    if multiplier.bound > bound * (1 + 1e-12):
        raise InvalidParameterError(
            f"Multiplier {multiplier.kind} has sup|λ| = {multiplier.bound:.6g} > declared bound {bound:.6g}"
        )
    record = weighted_sum_record(spec, N, multiplier.values)
    logger.info(f"multiplier_stress {spec.family.value} × {multiplier.kind}: "
                f"{record.total:.9g} at N={record.N}, {record.growth_class}")
    return MultiplierStressResult(multiplier, bound, record)


# Weak uniform tail

@dataclass
class WeakTailResult:
    statistic: float
    method: str
    lower_bound: bool
    iterations: int = 0
    seed: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "method": self.method,
            "lowerBound": self.lower_bound,
            "iterations": self.iterations,
            "seed": self.seed,
        }


def weak_uniform_tail(spec: SeriesSpec, window: TailWindow,
                      method: WeakTailMethod = WeakTailMethod.CLOSED_FORM_COORDINATE,
                      iterations: int = 200, seed: Optional[int] = None) -> WeakTailResult:
    """
    sup over unit functionals x* of Σ_{n∈(N, N+K]} |⟨x_n, x*⟩|.

    ClosedFormCoordinate groups |c_n| by axis; by Cauchy–Schwarz the sup is
    the ℓ² norm of the per-axis sums. SphereSearch iterates
    x* ← g/‖g‖ with g = Σ sign(⟨x_n, x*⟩) x_n from seeded random starts on
    the coordinates the window touches; it reports a lower bound.

    Raises:
        UnsupportedMethodError: Closed form on terms with several coordinates
    """
    idx = window.indices()
    if method is WeakTailMethod.CLOSED_FORM_COORDINATE:
        if not is_axis_aligned(spec):
            raise UnsupportedMethodError("closed-form-coordinate needs axis-aligned terms")
        axes = axes_at(spec, idx)
        magnitudes = np.abs(coefficients_at(spec, idx))
        per_axis: Dict[int, List[float]] = {}
        for a, m in zip(axes.tolist(), magnitudes.tolist()):
            if a:
                per_axis.setdefault(a, []).append(m)
        value = math.sqrt(math.fsum(math.fsum(v) ** 2 for v in per_axis.values()))
        return WeakTailResult(value, method.value, False)
    if seed is None:
        raise InvalidParameterError("SphereSearch needs an explicit seed")
    if iterations < 1:
        raise InvalidParameterError(f"iterations must be >= 1, got {iterations}")
    rows, _ = term_matrix(spec, idx)
    if rows.size == 0 or not np.any(rows):
        return WeakTailResult(0.0, method.value, True, 0, seed)
    value, used = _sphere_search(rows, iterations, seed)
    return WeakTailResult(value, method.value, True, used, seed)


def _sphere_search(rows: np.ndarray, iterations: int, seed: int) -> Tuple[float, int]:
    rng = np.random.default_rng(seed)
    best, used = 0.0, 0
    per_restart = max(1, iterations // SPHERE_RESTARTS)
    while used < iterations:
        x = rng.normal(size=rows.shape[1])
        x /= np.linalg.norm(x)
        pattern = None
        for _ in range(per_restart):
            used += 1
            signs = np.where(rows @ x < 0, -1.0, 1.0)
            g = signs @ rows
            length = float(np.linalg.norm(g))
            if length == 0.0:
                break
            x = g / length
            best = max(best, _fsum(np.abs(rows @ x)))
            if pattern is not None and np.array_equal(pattern, signs):
                break
            pattern = signs
            if used >= iterations:
                break
    return best, used


# Subseries sampling

@dataclass
class SubseriesResult:
    worst: float
    samples: List[float]
    aligned: Dict[str, float]
    N: int
    count: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "count": self.count,
            "seed": self.seed,
            "worstOscillation": self.worst,
            "sampleOscillations": self.samples,
            "signAlignedOscillations": self.aligned,
        }


def _tail_oscillation(spec: SeriesSpec, selected: np.ndarray, c: Optional[np.ndarray],
                      rows: Optional[np.ndarray], half: int) -> float:
    """max_j ‖S_j − S_m‖ over subseries positions j past m, the last index <= half."""
    tail_mask = selected > half
    if not tail_mask.any():
        return 0.0
    if spec.shape is SeriesShape.SCALAR:
        running = np.cumsum(c[selected[tail_mask] - 1])
        return float(np.max(np.abs(running)))
    if spec.shape is SeriesShape.DISJOINT:
        return _l2(c[selected[tail_mask] - 1])
    running = np.cumsum(rows[selected[tail_mask] - 1], axis=0)
    return float(np.max(np.linalg.norm(running, axis=1)))


def subseries_sample(spec: SeriesSpec, N: int, count: int, seed: int) -> SubseriesResult:
    """
    Worst tail oscillation of subseries Σ x_{n_j} beyond checkpoint N/2.

    Samples count random subsets (each index kept with probability 1/2) and
    adds the two sign-aligned subseries (terms pointing along / against the
    first coordinate), which expose divergent subseries of conditional series.
    """
    if count < 1:
        raise InvalidParameterError(f"count must be >= 1, got {count}")
    N = _effective_n(spec, N)
    if N < 1:
        raise InvalidParameterError(f"N must be >= 1, got {N}")
    idx = _index_range(1, N + 1)
    half = N // 2
    if spec.shape is SeriesShape.GENERAL:
        rows, c = term_matrix(spec, idx)[0], None
        direction = np.array([row[np.flatnonzero(row)[0]] if row.any() else 0.0 for row in rows])
    else:
        rows, c = None, coefficients_at(spec, idx)
        direction = c
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(count):
        keep = rng.random(N) < 0.5
        samples.append(_tail_oscillation(spec, idx[keep], c, rows, half))
    aligned = {
        "positive": _tail_oscillation(spec, idx[direction > 0], c, rows, half),
        "negative": _tail_oscillation(spec, idx[direction < 0], c, rows, half),
    }
    worst = max(samples + list(aligned.values()))
    return SubseriesResult(worst, samples, aligned, N, count, seed)


# Heuristic classifier

@dataclass
class ConditionEvidence:
    statistic: float
    method: str
    samples: int
    verdict: str
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "method": self.method,
            "samples": self.samples,
            "verdict": self.verdict,
            "detail": self.detail,
        }


@dataclass
class DiagnosticReport:
    series: dict
    budget: int
    seed: int
    verdict: str
    per_condition: Dict[str, ConditionEvidence]
    growth_fits: Dict[str, GrowthRecord]

    def to_dict(self) -> dict:
        return {
            "series": self.series,
            "budget": self.budget,
            "seed": self.seed,
            "verdict": self.verdict,
            "heuristic": True,
            "perCondition": {k: v.to_dict() for k, v in self.per_condition.items()},
            "growthFits": {k: v.to_dict() for k, v in self.growth_fits.items()},
            "truncationNote": "tail conditions are evaluated on finite windows (N, N+K]; "
                              "the gap to the infinite tail is not bounded",
        }

    def checkpoint_rows(self) -> List[Tuple[str, int, float]]:
        """Flat (record, n, value) rows for CSV export."""
        return [(name, n, v) for name, rec in self.growth_fits.items() for n, v in rec.rows()]


def _growth_verdict(record: GrowthRecord) -> str:
    if record.growth_class == growth_utils.BOUNDED:
        return PASS
    if record.growth_class in (growth_utils.LOGARITHMIC, growth_utils.POLYNOMIAL):
        return FAIL
    return INCONCLUSIVE


def _growth_evidence(record: GrowthRecord, method: str) -> ConditionEvidence:
    return ConditionEvidence(record.total, method, len(record.checkpoints), _growth_verdict(record),
                             {"class": record.growth_class, "N": record.N})


def _ladder_evidence(fixed: List[Tuple[TailWindow, float]], dyadic: List[Tuple[TailWindow, float]],
                     method: str) -> ConditionEvidence:
    fixed_values = [v for _, v in fixed]
    dyadic_values = [v for _, v in dyadic]
    detail = {
        "fixedWidth": [{"window": w.to_dict(), "value": v} for w, v in fixed],
        "dyadic": [{"window": w.to_dict(), "value": v} for w, v in dyadic],
    }
    samples = len(fixed) + len(dyadic)
    statistic = (dyadic_values or fixed_values or [0.0])[-1]
    if all(v == 0.0 for v in fixed_values + dyadic_values) and samples:
        return ConditionEvidence(0.0, method, samples, PASS, detail)
    if len(dyadic_values) >= 2:
        verdict = PASS if growth_utils.decays(dyadic_values) and (
            len(fixed_values) < 2 or growth_utils.decays(fixed_values)) else FAIL
    elif len(fixed_values) >= 2:
        verdict = PASS if growth_utils.decays(fixed_values) else FAIL
    else:
        verdict = INCONCLUSIVE
    return ConditionEvidence(statistic, method, samples, verdict, detail)


def _subseries_evidence(spec: SeriesSpec, N: int, seed: int) -> ConditionEvidence:
    top = min(N, SUBSERIES_CAP)
    coarse = max(2, top // 10)
    late = subseries_sample(spec, top, SUBSERIES_SAMPLES, seed)
    early = subseries_sample(spec, coarse, SUBSERIES_SAMPLES, seed)
    if late.worst <= 1e-12 or late.worst <= 0.5 * early.worst:
        verdict = PASS
    else:
        verdict = FAIL
    detail = {"early": early.to_dict(), "late": late.to_dict()}
    return ConditionEvidence(late.worst, "random + sign-aligned subseries", 2 * (SUBSERIES_SAMPLES + 2),
                             verdict, detail)


def classify(spec: SeriesSpec, budget: int, seed: int = 0, workers: int = 1,
             ladder: Sequence[int] = LADDER, width: int = LADDER_WIDTH) -> DiagnosticReport:
    """
    Run every diagnostic within a term budget and aggregate a verdict.

    Verdicts, checked in order:
        absolute                Σ‖x_n‖ bounded, the net-Cauchy and Orlicz checks pass and
                                sign stress does not diverge
        divergent-evidence      identity-order partial sums are not bounded
        conditional-evidence    sign, subseries or multiplier stress diverges
        unconditional-evidence  net-Cauchy ladders decay and Σ‖x_n‖² is bounded
        inconclusive            anything else

    Args:
        spec: Series definition
        budget: Largest term index any sub-diagnostic touches
        seed: Seed for sampled sub-diagnostics, echoed in the report
        workers: Threads for independent sub-diagnostics
        ladder: Window starts for the fixed-width net-Cauchy ladder
        width: Fixed window width K

    Returns:
        DiagnosticReport
    """
    N = _effective_n(spec, int(budget))
    if N < 2:
        raise InvalidParameterError(f"classify needs a budget of at least 2 terms, got {N}")
    logger.info(f"classify {spec.family.value}: budget={N}, seed={seed}")
    fixed_windows = [TailWindow(n, width) for n in ladder if n + width <= N]
    dyadic_windows = []
    n = 10
    while 2 * n <= N:
        dyadic_windows.append(TailWindow(n, n))
        n *= 10
    scalable = scalable_net_method(spec)
    aligned = is_axis_aligned(spec)

    def net_ladder():
        fixed = [(w, net_cauchy_sup(spec, w, NetSupMethod.EXHAUSTIVE)) for w in fixed_windows]
        dyadic = [(w, net_cauchy_sup(spec, w, scalable)) for w in dyadic_windows] if scalable else []
        return _ladder_evidence(fixed, dyadic, "exhaustive K=%d + %s dyadic" % (
            width, scalable.value if scalable else "no"))

    def weak_ladder():
        if aligned:
            method = WeakTailMethod.CLOSED_FORM_COORDINATE
            fixed = [(w, weak_uniform_tail(spec, w, method).statistic) for w in fixed_windows]
            dyadic = [(w, weak_uniform_tail(spec, w, method).statistic) for w in dyadic_windows]
        else:
            method = WeakTailMethod.SPHERE_SEARCH
            fixed = [(w, weak_uniform_tail(spec, w, method, seed=seed).statistic) for w in fixed_windows]
            dyadic = []
        return _ladder_evidence(fixed, dyadic, method.value)

    def sign_evidence():
        exhaustive = sign_stress(spec, min(N, LADDER_WIDTH), SignMode.EXHAUSTIVE)
        shape = spec.shape
        if shape is SeriesShape.SCALAR:
            record = check_absolute(spec, N)
        elif shape is SeriesShape.DISJOINT:
            record = weighted_sum_record(spec, N)
        else:
            sampled = sign_stress(spec, N, SignMode.SAMPLED, count=SUBSERIES_SAMPLES, seed=seed)
            return ConditionEvidence(sampled.max_value, "sampled", sampled.samples, INCONCLUSIVE,
                                     {"exhaustive": exhaustive.to_dict(), "sampled": sampled.to_dict()}), None
        evidence = _growth_evidence(record, "aligned signs")
        evidence.detail["exhaustive"] = exhaustive.to_dict()
        return evidence, record

    tasks = {
        "absolute": lambda: check_absolute(spec, N),
        "orlicz": lambda: check_orlicz(spec, N),
        "identity": lambda: weighted_sum_record(spec, N),
        "multiplier": lambda: multiplier_stress(spec, Multiplier.alternating_log(), N).record,
        "net-cauchy": net_ladder,
        "weak-tail": weak_ladder,
        "sign-stress": sign_evidence,
        "subseries": lambda: _subseries_evidence(spec, N, seed),
    }
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = {name: pool.submit(fn) for name, fn in tasks.items()}
        results = {name: f.result() for name, f in futures.items()}

    sign, sign_record = results["sign-stress"]
    growth = {
        "absolute": results["absolute"],
        "orlicz": results["orlicz"],
        "identity": results["identity"],
        "multiplier-alternating-log": results["multiplier"],
    }
    if sign_record is not None:
        growth["sign-aligned"] = sign_record
    per_condition = {
        "absolute": _growth_evidence(results["absolute"], "checkpoint fit of Σ‖x_n‖"),
        "orlicz": _growth_evidence(results["orlicz"], "checkpoint fit of Σ‖x_n‖²"),
        "identity-order": _growth_evidence(results["identity"], "checkpoint fit of ‖S_N‖"),
        "net-cauchy": results["net-cauchy"],
        "weak-tail": results["weak-tail"],
        "sign-stress": sign,
        "multiplier": _growth_evidence(results["multiplier"], "alternating-log multiplier"),
        "subseries": results["subseries"],
    }
    verdict = _aggregate(per_condition)
    if verdict == INCONCLUSIVE_VERDICT:
        logger.warning(f"classify {spec.family.value}: evidence inconclusive at budget {N}")
    logger.info(f"classify {spec.family.value}: verdict {verdict}")
    return DiagnosticReport(spec.to_dict(), N, seed, verdict, per_condition, growth)


def _aggregate(per_condition: Dict[str, ConditionEvidence]) -> str:
    v = {name: ev.verdict for name, ev in per_condition.items()}
    unconditional = v["net-cauchy"] == PASS and v["orlicz"] == PASS
    if v["absolute"] == PASS and unconditional and v["sign-stress"] != FAIL:
        return ABSOLUTE
    if v["identity-order"] == FAIL:
        return DIVERGENT_EVIDENCE
    if FAIL in (v["sign-stress"], v["subseries"], v["multiplier"]):
        return CONDITIONAL_EVIDENCE
    if unconditional:
        return UNCONDITIONAL_EVIDENCE
    return INCONCLUSIVE_VERDICT
