"""
Gradient-accumulation order sensitivity.

Gradients are precomputed at a fixed point w0, so the accumulated update
Δw = −Σ_i η_i g_σ(i) is a finite sum whose value in exact arithmetic does not
depend on σ. Floating-point strategies are measured against that exact value.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from convergence import io_utils
from convergence.errors import InvalidParameterError, InvalidPermutationError
from convergence.series import Permutation
from convergence.summation_utils import SummationStrategy
from convergence.workspace import Vector

logger = logging.getLogger(__name__)

PAIRINGS = ("position", "sample")


@dataclass(frozen=True)
class GradientStream:
    """N per-sample gradients in R^d, rows of an (N, d) float array."""

    gradients: np.ndarray
    source: str = "custom"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        g = np.array(self.gradients, dtype=float)
        if g.ndim != 2 or g.shape[0] < 1 or g.shape[1] < 1:
            raise InvalidParameterError(f"Gradient stream needs shape (N, d) with N, d >= 1, got {g.shape}")
        if not np.all(np.isfinite(g)):
            raise InvalidParameterError("Gradient stream contains non-finite values")
        g.setflags(write=False)
        object.__setattr__(self, "gradients", g)

    @property
    def N(self) -> int:
        return self.gradients.shape[0]

    @property
    def d(self) -> int:
        return self.gradients.shape[1]

    def concat(self, other: "GradientStream") -> "GradientStream":
        if other.d != self.d:
            raise InvalidParameterError(f"Cannot concatenate streams of dimension {self.d} and {other.d}")
        return GradientStream(np.vstack([self.gradients, other.gradients]), f"{self.source}+{other.source}")

    def to_dict(self) -> dict:
        return {"source": self.source, "N": self.N, "d": self.d, **self.meta}


def quadratic_stream(d: int, N: int, seed: int) -> GradientStream:
    """
    Least-squares per-sample gradients g_i = A_i w0 − b_i with A_i = a_i a_iᵀ, b_i = y_i a_i.

    Σ g_i is the full-batch gradient (Σ A_i) w0 − Σ b_i.
    """
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(N, d))
    y = rng.normal(size=N)
    w0 = rng.normal(size=d)
    g = a * (a @ w0 - y)[:, None]
    return GradientStream(g, "quadratic", {"seed": seed})


def ill_conditioned_stream(d: int, N: int, seed: int, decades: float = 16.0) -> GradientStream:
    """
    Gradients whose sum cancels catastrophically.

    Half of each coordinate's samples are spikes ±s with |s| around
    10^decades, paired so that they cancel exactly; the other half are small
    increments in [-1, 1]. Every column is shuffled independently. Left-to-right
    float addition loses most of the small increments under the spikes, so
    the naive result depends on the order.
    """
    rng = np.random.default_rng(seed)
    pairs = N // 4
    spikes = 10.0 ** rng.uniform(decades - 1.0, decades, size=(pairs, d))
    small = rng.uniform(-1.0, 1.0, size=(N - 2 * pairs, d))
    gradients = rng.permuted(np.concatenate([spikes, -spikes, small]), axis=0)
    return GradientStream(gradients, "ill-conditioned", {"seed": seed, "decades": decades})


def heavy_tailed_stream(d: int, N: int, seed: int, df: float = 1.5) -> GradientStream:
    """Student-t gradients; df <= 2 gives infinite variance."""
    rng = np.random.default_rng(seed)
    return GradientStream(rng.standard_t(df, size=(N, d)), "heavy-tailed", {"seed": seed, "df": df})


def stream_from_file(path) -> GradientStream:
    return GradientStream(np.asarray(io_utils.read_gradient_file(path)), "file", {"path": str(path)})


@dataclass(frozen=True)
class LrSchedule:
    """Learning rates η_1..η_N: constant, η0/√i, or an explicit list."""

    kind: str = "constant"
    eta: float = 0.01
    values: tuple = ()

    def __post_init__(self):
        if self.kind not in ("constant", "inverse-sqrt", "from-list"):
            raise InvalidParameterError(f"Unknown schedule {self.kind!r}")
        if self.kind == "from-list":
            if not self.values or any(not v > 0 for v in self.values):
                raise InvalidParameterError("Learning-rate list must be non-empty and strictly positive")
        elif not self.eta > 0:
            raise InvalidParameterError(f"Learning rate must be > 0, got {self.eta}")

    def rates(self, N: int) -> np.ndarray:
        if self.kind == "constant":
            return np.full(N, float(self.eta))
        if self.kind == "inverse-sqrt":
            return self.eta / np.sqrt(np.arange(1, N + 1, dtype=float))
        if len(self.values) < N:
            raise InvalidParameterError(f"Schedule lists {len(self.values)} rates for a stream of {N}")
        return np.asarray(self.values[:N], dtype=float)

    def to_dict(self) -> dict:
        if self.kind == "from-list":
            return {"kind": self.kind, "length": len(self.values)}
        return {"kind": self.kind, "eta": self.eta}


def _resolve_order(stream: GradientStream, order: Optional[Permutation]) -> np.ndarray:
    if order is None:
        return np.arange(stream.N)
    if len(order) != stream.N or not order.is_complete(stream.N):
        raise InvalidPermutationError(
            f"Order must be a complete permutation of {stream.N} samples, got length {len(order)}"
        )
    return np.asarray(order.prefix, dtype=np.int64) - 1


def _weights(stream: GradientStream, sched: LrSchedule, positions: np.ndarray, pairing: str,
             lambdas: Optional[np.ndarray]) -> List[np.ndarray]:
    """Per-position scalar factors whose product multiplies g_σ(k)."""
    if pairing not in PAIRINGS:
        raise InvalidParameterError(f"pairing must be one of {PAIRINGS}, got {pairing!r}")
    rates = sched.rates(stream.N)
    factors = [rates if pairing == "position" else rates[positions]]
    if lambdas is not None:
        factors.append(np.asarray(lambdas, dtype=float))
    return factors


def _exact_weighted_sum(factors: List[np.ndarray], rows: np.ndarray) -> List[Fraction]:
    """
    Exact Σ_k (Π factors_k) · rows_k per coordinate.

    Every float is a dyadic rational p/2^e, so products and sums are carried
    as integers over a common power of two.
    """
    scale = [[f.as_integer_ratio() for f in factor.tolist()] for factor in factors]
    weights = []
    for k in range(len(rows)):
        num, den = 1, 1
        for factor in scale:
            p, q = factor[k]
            num, den = num * p, den * q
        weights.append((num, den))
    totals = []
    for column in rows.T.tolist():
        terms = []
        for (num, den), x in zip(weights, column):
            p, q = x.as_integer_ratio()
            terms.append((num * p, den * q))
        common = max((q for _, q in terms), default=1)
        totals.append(Fraction(sum(p * (common // q) for p, q in terms), common))
    return totals


def _weighted_sum(factors: List[np.ndarray], rows: np.ndarray, strategy: SummationStrategy) -> Vector:
    if strategy is SummationStrategy.EXACT_RATIONAL:
        return Vector.dense(-x for x in _exact_weighted_sum(factors, rows))
    weight = np.ones(len(rows))
    for factor in factors:
        weight = weight * factor
    total = strategy.reduce(weight[:, None] * rows)
    return Vector.dense(-float(x) for x in np.atleast_1d(total))


def accumulate(stream: GradientStream, sched: LrSchedule, order: Optional[Permutation] = None,
               strategy: SummationStrategy = SummationStrategy.COMPENSATED,
               pairing: str = "position") -> Vector:
    """
    Δw = −Σ_{i=1}^{N} η_i g_σ(i).

    Args:
        stream: Gradient stream of length N
        sched: Learning-rate schedule
        order: Complete permutation of the N samples, or None for identity
        strategy: Summation strategy; ExactRational sums the exact values of
            the float inputs
        pairing: "position" attaches η_i to the i-th processed sample;
            "sample" attaches η_σ(i) to sample σ(i)

    Returns:
        Δw as a dense d-vector (Fractions for ExactRational)

    Raises:
        InvalidPermutationError: Order is not a complete permutation of N
    """
    positions = _resolve_order(stream, order)
    factors = _weights(stream, sched, positions, pairing, None)
    return _weighted_sum(factors, stream.gradients[positions], strategy)


def exact_reference(stream: GradientStream, sched: LrSchedule, pairing: str = "position") -> np.ndarray:
    """Float image of the exact identity-order Δw."""
    exact = accumulate(stream, sched, None, SummationStrategy.EXACT_RATIONAL, pairing)
    return np.asarray([float(x) for x in exact.coords])


@dataclass
class StrategyDeviation:
    strategy: str
    num_perms: int
    seed: int
    max_pairwise_deviation: float
    reference_deviation: Optional[float]
    relative_deviation: Optional[float]
    relative_to_naive: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "numPerms": self.num_perms,
            "seed": self.seed,
            "maxPairwiseDeviation": self.max_pairwise_deviation,
            "referenceDeviation": self.reference_deviation,
            "relativeDeviation": self.relative_deviation,
            "relativeToNaive": self.relative_to_naive,
        }


@dataclass
class SensitivityReport:
    stream: dict
    schedule: dict
    pairing: str
    strategies: Dict[str, StrategyDeviation]
    flagged: List[str]

    def to_dict(self) -> dict:
        return {
            "stream": self.stream,
            "schedule": self.schedule,
            "pairing": self.pairing,
            "strategies": {k: v.to_dict() for k, v in self.strategies.items()},
            "flagged": self.flagged,
        }


def _as_float(v: Vector) -> np.ndarray:
    return np.asarray([float(x) for x in v.coords])


def permutation_sensitivity(stream: GradientStream, sched: LrSchedule, num_perms: int, seed: int,
                            strategies: Iterable[SummationStrategy],
                            orders: Optional[Sequence[Permutation]] = None,
                            pairing: str = "position", workers: int = 1) -> SensitivityReport:
    """
    Spread of Δw across random sample orders, per summation strategy.

    maxPairwiseDeviation is max over order pairs of ‖Δw − Δw'‖∞;
    referenceDeviation is max over orders of ‖Δw − Δw_exact‖∞. When the
    expected ordering Naive >= Pairwise, Naive >= Compensated fails the
    stream is flagged, not rejected.

    Args:
        stream: Gradient stream
        sched: Learning-rate schedule
        num_perms: Number of random orders (>= 2)
        seed: Seed of the order generator
        strategies: Strategies to compare
        orders: Explicit orders to use instead of random ones
        pairing: Schedule pairing, see accumulate
        workers: Threads across orders
    """
    strategies = list(dict.fromkeys(strategies))
    if orders is None:
        if num_perms < 2:
            raise InvalidParameterError(f"num_perms must be >= 2, got {num_perms}")
        rng = np.random.default_rng(seed)
        orders = [Permutation(tuple((rng.permutation(stream.N) + 1).tolist())) for _ in range(num_perms)]
    elif len(orders) < 2:
        raise InvalidParameterError("permutation_sensitivity needs at least two orders")
    reference = exact_reference(stream, sched, pairing)
    ref_scale = float(np.max(np.abs(reference))) if reference.size else 0.0
    results: Dict[str, StrategyDeviation] = {}
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for strategy in strategies:
            runs = list(pool.map(lambda o: accumulate(stream, sched, o, strategy, pairing), orders))
            if strategy is SummationStrategy.EXACT_RATIONAL:
                first = runs[0]
                spread = 0.0 if all(r == first for r in runs) else float(
                    max(abs(float(a) - float(b)) for r in runs for a, b in zip(r.coords, first.coords))
                )
                values = np.asarray([_as_float(r) for r in runs])
            else:
                values = np.asarray([_as_float(r) for r in runs])
                spread = float(np.max(np.ptp(values, axis=0)))
            ref_dev = float(np.max(np.abs(values - reference)))
            results[strategy.value] = StrategyDeviation(
                strategy.value, len(orders), seed, spread, ref_dev,
                spread / ref_scale if ref_scale else None,
            )
    flagged = _check_ordering(results)
    naive = results.get(SummationStrategy.NAIVE.value)
    if naive is not None:
        for dev in results.values():
            dev.relative_to_naive = (dev.max_pairwise_deviation / naive.max_pairwise_deviation
                                     if naive.max_pairwise_deviation else None)
    for name, dev in results.items():
        logger.info(f"permutation_sensitivity {name}: max pairwise {dev.max_pairwise_deviation:.3e}, "
                    f"vs exact {dev.reference_deviation:.3e}")
    return SensitivityReport(stream.to_dict(), sched.to_dict(), pairing, results, flagged)


def _check_ordering(results: Dict[str, StrategyDeviation]) -> List[str]:
    flagged = []
    naive = results.get(SummationStrategy.NAIVE.value)
    if naive is None:
        return flagged
    for other in (SummationStrategy.PAIRWISE.value, SummationStrategy.COMPENSATED.value):
        dev = results.get(other)
        if dev is not None and dev.max_pairwise_deviation > naive.max_pairwise_deviation:
            message = (f"{other} deviation {dev.max_pairwise_deviation:.3e} exceeds naive "
                       f"{naive.max_pairwise_deviation:.3e}")
            logger.warning(f"Stream flagged for inspection: {message}")
            flagged.append(message)
    return flagged


@dataclass
class MultiplierUpdate:
    delta: Vector
    norm: float
    bound: float

    @property
    def bound_holds(self) -> bool:
        return self.norm <= self.bound * (1 + 1e-12) + 1e-300

    def to_dict(self) -> dict:
        return {
            "delta": [float(x) for x in self.delta.coords],
            "norm": self.norm,
            "bound": self.bound,
            "boundHolds": self.bound_holds,
        }


def multiplier_variant(stream: GradientStream, sched: LrSchedule, lambdas: Sequence[float], bound: float,
                       order: Optional[Permutation] = None,
                       strategy: SummationStrategy = SummationStrategy.COMPENSATED,
                       pairing: str = "position") -> MultiplierUpdate:
    """
    Δw = −Σ λ_i η_i g_σ(i) for multipliers bounded by C.

    λ_i is attached by position. The crude bound ‖Δw‖₂ <= C·Σ η_i ‖g_i‖₂
    is checked on every call.

    Raises:
        InvalidParameterError: If sup|λ_i| > bound or the lengths differ
    """
    lam = np.asarray(lambdas, dtype=float)
    if lam.shape != (stream.N,):
        raise InvalidParameterError(f"Need {stream.N} multipliers, got {lam.shape}")
    if not bound >= 0 or float(np.max(np.abs(lam))) > bound:
        raise InvalidParameterError(f"Multipliers exceed the declared bound {bound}")
    positions = _resolve_order(stream, order)
    factors = _weights(stream, sched, positions, pairing, lam)
    delta = _weighted_sum(factors, stream.gradients[positions], strategy)
    norm = math.hypot(*(float(x) for x in delta.coords))
    rates = sched.rates(stream.N)
    row_norms = np.linalg.norm(stream.gradients[positions], axis=1)
    paired_rates = rates if pairing == "position" else rates[positions]
    crude = bound * math.fsum((paired_rates * row_norms).tolist())
    update = MultiplierUpdate(delta, norm, crude)
    if not update.bound_holds:
        raise AssertionError(f"‖Δw‖ = {norm:.6g} exceeds C·Σ η_i‖g_i‖ = {crude:.6g}")
    return update


def clipping_multipliers(stream: GradientStream, c: float, order: Optional[Permutation] = None) -> np.ndarray:
    """λ_k = min(1, c/‖g_σ(k)‖₂), so every clipped step λ_k g_σ(k) has norm <= c."""
    if not c > 0:
        raise InvalidParameterError(f"Clip threshold must be > 0, got {c}")
    positions = _resolve_order(stream, order)
    norms = np.linalg.norm(stream.gradients[positions], axis=1)
    with np.errstate(divide="ignore"):
        return np.where(norms > c, c / norms, 1.0)
