"""
Checkpoint ladders and growth-class fitting for slowly evolving partial sums.

A growth record samples a running sum at ~20 log-spaced even checkpoints and
fits three templates by least squares:

    bounded      a + b·N^β   β ∈ [-2, -0.25]
    logarithmic  a + b·ln N
    polynomial   a + b·N^β   β ∈ [0.25, 2]

The best template must beat the runner-up by DOMINANCE, otherwise the class
is "other". These are heuristics: a finite window cannot prove divergence.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from convergence.errors import InvalidParameterError
from convergence.summation_utils import NeumaierAccumulator

logger = logging.getLogger(__name__)

CHECKPOINTS = 20
DOMINANCE = 10.0
GENERATION_CHUNK = 1 << 20

BOUNDED = "bounded"
LOGARITHMIC = "logarithmic"
POLYNOMIAL = "polynomial"
OTHER = "other"

_BOUNDED_EXPONENTS = np.linspace(-2.0, -0.25, 36)
_POLYNOMIAL_EXPONENTS = np.linspace(0.25, 2.0, 36)

ValuesFn = Callable[[int, int], np.ndarray]


@dataclass
class GrowthRecord:
    """Running sum sampled at checkpoints, plus the fitted growth class."""

    checkpoints: List[int]
    values: List[float]
    total: float
    N: int
    growth_class: str
    fits: Dict[str, dict] = field(default_factory=dict)

    @property
    def limit_estimate(self) -> Optional[float]:
        """Fitted asymptote a for bounded records."""
        if self.growth_class != BOUNDED:
            return None
        fit = self.fits.get(BOUNDED)
        return fit["a"] if fit else self.total

    def is_monotone_increasing(self) -> bool:
        return all(b > a for a, b in zip(self.values, self.values[1:]))

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "total": self.total,
            "class": self.growth_class,
            "limitEstimate": self.limit_estimate,
            "checkpoints": [{"n": n, "value": v} for n, v in zip(self.checkpoints, self.values)],
            "fits": self.fits,
        }

    def rows(self) -> List[Tuple[int, float]]:
        return list(zip(self.checkpoints, self.values))


def checkpoints(N: int, count: int = CHECKPOINTS) -> List[int]:
    """
    Log-spaced even checkpoints from max(2, N/10^4) up to N.

    Even indices keep alternating series on one parity. N < 2 yields [N].
    """
    if N < 0:
        raise InvalidParameterError(f"N must be >= 0, got {N}")
    if N < 2:
        return [N]
    top = N - (N % 2)
    low = max(2, N // 10_000)
    raw = np.geomspace(low, top, num=count)
    points = sorted({min(top, max(2, int(round(x / 2.0)) * 2)) for x in raw})
    if points[-1] != top:
        points.append(top)
    return points


def checkpoint_sums(values_fn: ValuesFn, N: int, points: Sequence[int]) -> Tuple[List[float], float]:
    """
    Running sums Σ_{n ≤ p} v_n at every checkpoint p, and the sum through N.

    values_fn(start, stop) returns v_n for n in [start, stop). Each segment is
    summed with math.fsum; segment totals are carried in a Neumaier accumulator.
    """
    acc = NeumaierAccumulator()
    out = []
    targets = sorted(set(p for p in points if p >= 1))
    pending = list(targets)
    start = 1
    while start <= N:
        stop = min(start + GENERATION_CHUNK, N + 1)
        chunk = np.asarray(values_fn(start, stop), dtype=float)
        offset = start
        while pending and pending[0] < stop:
            cut = pending.pop(0) + 1
            acc.add(math.fsum(chunk[offset - start:cut - start].tolist()))
            offset = cut
            out.append(acc.total)
        acc.add(math.fsum(chunk[offset - start:].tolist()))
        start = stop
    lookup = dict(zip(targets, out))
    return [lookup.get(p, 0.0) for p in points], acc.total


def _fit_affine(basis: np.ndarray, y: np.ndarray) -> Tuple[float, float, float]:
    design = np.column_stack([np.ones_like(basis), basis])
    coef, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    residual = float(np.sum((design @ coef - y) ** 2))
    return float(coef[0]), float(coef[1]), residual


def _best_power_fit(n: np.ndarray, y: np.ndarray, exponents: np.ndarray) -> dict:
    best = None
    for beta in exponents:
        a, b, residual = _fit_affine(n ** beta, y)
        if best is None or residual < best["residual"]:
            best = {"a": a, "b": b, "beta": float(beta), "residual": residual}
    return best


def fit_growth(points: Sequence[int], values: Sequence[float]) -> Tuple[str, Dict[str, dict]]:
    """
    Classify checkpoint values by least-squares template fits.

    Returns:
        (growth class, {template: {a, b, [beta], residual}})
    """
    n = np.asarray(points, dtype=float)
    y = np.asarray(values, dtype=float)
    if len(y) == 0:
        return BOUNDED, {}
    scale = max(1.0, float(np.max(np.abs(y))))
    if float(np.ptp(y)) <= 1e-12 * scale or len(y) < 4:
        return BOUNDED, {BOUNDED: {"a": float(y[-1]), "b": 0.0, "beta": 0.0, "residual": 0.0}}
    a, b, residual = _fit_affine(np.log(n), y)
    fits = {
        BOUNDED: _best_power_fit(n, y, _BOUNDED_EXPONENTS),
        LOGARITHMIC: {"a": a, "b": b, "residual": residual},
        POLYNOMIAL: _best_power_fit(n, y, _POLYNOMIAL_EXPONENTS),
    }
    ranked = sorted(fits, key=lambda name: fits[name]["residual"])
    best, runner_up = fits[ranked[0]]["residual"], fits[ranked[1]]["residual"]
    # relative floor so two exact fits do not compare rounding noise
    floor = 1e-24 * float(np.sum((y - y.mean()) ** 2))
    if best * DOMINANCE <= runner_up or runner_up <= floor:
        return ranked[0], fits
    logger.debug(f"No dominant growth template: {ranked[0]}={best:.3e}, {ranked[1]}={runner_up:.3e}")
    return OTHER, fits


def growth_record(values_fn: ValuesFn, N: int,
                  finish: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> GrowthRecord:
    """
    Sample Σ_{n ≤ p} v_n at the checkpoint ladder of N and fit its growth.

    Args:
        values_fn: values_fn(start, stop) -> v_n for n in [start, stop)
        N: Number of terms
        finish: Optional map applied to the running sums before fitting
            (e.g. np.sqrt for squared norms)
    """
    if N < 1:
        raise InvalidParameterError(f"N must be >= 1, got {N}")
    points = checkpoints(N)
    sums, total = checkpoint_sums(values_fn, N, points)
    if finish is not None:
        sums = [float(x) for x in finish(np.asarray(sums))]
        total = float(finish(np.asarray([total]))[0])
    growth_class, fits = fit_growth(points, sums)
    return GrowthRecord(points, sums, total, N, growth_class, fits)


def record_from_values(points: Sequence[int], values: Sequence[float], total: float, N: int) -> GrowthRecord:
    """Build a record from checkpoint values computed elsewhere."""
    growth_class, fits = fit_growth(points, values)
    return GrowthRecord(list(points), [float(v) for v in values], float(total), N, growth_class, fits)


def decays(values: Sequence[float], factor: float = 0.5, slack: float = 1e-12) -> bool:
    """Non-increasing (up to slack) and the last value at most factor × the first."""
    if len(values) < 2:
        return False
    steady = all(b <= a * (1 + slack) + slack for a, b in zip(values, values[1:]))
    return steady and values[-1] <= factor * values[0]
