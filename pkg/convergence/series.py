"""
Series term generators, permutations and partial sums.

A SeriesSpec defines x_n for n = 1, 2, ... Scalar families are returned as
1-dim dense vectors, coordinate families as sparse vectors on e_n.
"""
import enum
import functools
import logging
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from convergence import io_utils
from convergence.errors import (
    ExhaustedStreamError,
    InvalidParameterError,
    InvalidPermutationError,
    UnknownSeriesError,
)
from convergence.summation_utils import NeumaierAccumulator, SummationStrategy, exact_sum, reduce_chunks
from convergence.workspace import Scalar, ScalarMode, Vector

logger = logging.getLogger(__name__)

MAX_EXACT_TERMS = int(float(os.environ.get("UNCOND_MAX_EXACT_TERMS", "1e5")))

# Identity-order float sums are generated in chunks of this many terms
CHUNK = 1 << 18
SIGN_BLOCK = 4096


class SeriesFamily(str, enum.Enum):
    ALTERNATING_HARMONIC = "alternating-harmonic"
    HARMONIC = "harmonic"
    ALTERNATING_POWER = "alternating-power"
    COORDINATE_DECAY = "coordinate-decay"
    SIGNED_COORDINATE = "signed-coordinate"
    FROM_FILE = "from-file"
    ZERO = "zero"


class SeriesShape(str, enum.Enum):
    """How terms sit in the ambient space; decides which fast paths apply."""

    SCALAR = "scalar"        # every x_n on coordinate 1
    DISJOINT = "disjoint"    # x_n = c_n e_{axis(n)}, axes pairwise distinct
    GENERAL = "general"


SCALAR_FAMILIES = {
    SeriesFamily.ALTERNATING_HARMONIC,
    SeriesFamily.HARMONIC,
    SeriesFamily.ALTERNATING_POWER,
    SeriesFamily.ZERO,
}


@dataclass(frozen=True)
class SignSource:
    """
    Signs ε_n for SignedCoordinate series.

    kind is "explicit" (cycled list), "seeded" (pseudorandom, random access
    by index) or "alternating" ((-1)^n).
    """

    kind: str = "alternating"
    signs: Tuple[int, ...] = ()
    seed: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("explicit", "seeded", "alternating"):
            raise InvalidParameterError(f"Unknown sign source {self.kind!r}")
        if self.kind == "explicit" and (not self.signs or any(s not in (-1, 1) for s in self.signs)):
            raise InvalidParameterError("Explicit sign list must be a non-empty list of ±1")
        if self.kind == "seeded" and self.seed is None:
            raise InvalidParameterError("Seeded sign source needs an explicit seed")

    def signs_at(self, indices: np.ndarray) -> np.ndarray:
        indices = np.asarray(indices, dtype=np.int64)
        if self.kind == "alternating":
            return np.where(indices % 2 == 0, 1.0, -1.0)
        if self.kind == "explicit":
            table = np.asarray(self.signs, dtype=float)
            return table[(indices - 1) % len(table)]
        out = np.empty(len(indices))
        blocks = (indices - 1) // SIGN_BLOCK
        for block in np.unique(blocks):
            rng = np.random.default_rng([self.seed, int(block)])
            table = rng.integers(0, 2, size=SIGN_BLOCK) * 2 - 1
            mask = blocks == block
            out[mask] = table[(indices[mask] - 1) % SIGN_BLOCK]
        return out

    def to_dict(self) -> dict:
        return {"kind": self.kind, "signs": list(self.signs), "seed": self.seed}


@dataclass(frozen=True)
class SeriesSpec:
    family: SeriesFamily
    alpha: float = 1.0
    signs: Optional[SignSource] = None
    path: Optional[str] = None
    mode: ScalarMode = ScalarMode.FLOAT64

    def __post_init__(self):
        if self.family in (SeriesFamily.COORDINATE_DECAY, SeriesFamily.SIGNED_COORDINATE,
                           SeriesFamily.ALTERNATING_POWER) and not self.alpha > 0:
            raise InvalidParameterError(f"alpha must be > 0, got {self.alpha}")
        if self.mode.is_exact and not float(self.alpha).is_integer():
            raise InvalidParameterError(f"ExactRational terms need an integer alpha, got {self.alpha}")
        if self.family is SeriesFamily.SIGNED_COORDINATE and self.signs is None:
            object.__setattr__(self, "signs", SignSource())
        if self.family is SeriesFamily.FROM_FILE and not self.path:
            raise InvalidParameterError("FromFile series needs a path")

    @property
    def shape(self) -> SeriesShape:
        if self.family in SCALAR_FAMILIES:
            return SeriesShape.SCALAR
        if self.family is SeriesFamily.FROM_FILE:
            return _file_terms(self.path, self.mode).shape
        return SeriesShape.DISJOINT

    @property
    def length(self) -> Optional[int]:
        """Number of defined terms, None for infinite families."""
        if self.family is SeriesFamily.FROM_FILE:
            return len(_file_terms(self.path, self.mode).vectors)
        return None

    def with_mode(self, mode: ScalarMode) -> "SeriesSpec":
        return SeriesSpec(self.family, self.alpha, self.signs, self.path, mode)

    def to_dict(self) -> dict:
        out = {"family": self.family.value, "mode": self.mode.value}
        if self.family in (SeriesFamily.COORDINATE_DECAY, SeriesFamily.SIGNED_COORDINATE,
                           SeriesFamily.ALTERNATING_POWER):
            out["alpha"] = self.alpha
        if self.signs is not None:
            out["signs"] = self.signs.to_dict()
        if self.path:
            out["path"] = self.path
        return out


def series_from_name(name: str, alpha: float = 1.0, signs: Optional[SignSource] = None,
                     path: Optional[str] = None, mode: ScalarMode = ScalarMode.FLOAT64) -> SeriesSpec:
    """
    Build a SeriesSpec from its CLI name.

    Raises:
        UnknownSeriesError: If the family name is not recognised
    """
    try:
        family = SeriesFamily(name)
    except ValueError:
        known = ", ".join(f.value for f in SeriesFamily)
        raise UnknownSeriesError(f"Unknown series family {name!r} (known: {known})")
    return SeriesSpec(family=family, alpha=alpha, signs=signs, path=path, mode=mode)


# File-backed series

@dataclass(frozen=True)
class _FileTerms:
    vectors: Tuple[Vector, ...]
    shape: SeriesShape
    axes: Tuple[int, ...]
    coefficients: Tuple[Scalar, ...]


@functools.lru_cache(maxsize=32)
def _file_terms(path: str, mode: ScalarMode) -> _FileTerms:
    raw = io_utils.read_series_file(path)
    length = max(raw, default=0)
    vectors = []
    for n in range(1, length + 1):
        try:
            entries = {j: mode.convert(v) for j, v in raw.get(n, {}).items()}
        except (ValueError, ZeroDivisionError):
            raise InvalidParameterError(f"{path}: term {n} has a value that is not a number: {raw[n]}")
        vectors.append(Vector.sparse(entries))
    axes, coefficients = [], []
    single_axis = True
    for v in vectors:
        support = v.support()
        if len(support) > 1:
            single_axis = False
            break
        axes.append(support[0] if support else 0)
        coefficients.append(v[support[0]] if support else mode.convert(0))
    if not single_axis:
        shape = SeriesShape.GENERAL
        axes, coefficients = [], []
    elif all(a in (0, 1) for a in axes):
        shape = SeriesShape.SCALAR
    elif len({a for a in axes if a}) == sum(1 for a in axes if a):
        shape = SeriesShape.DISJOINT
    else:
        shape = SeriesShape.GENERAL
    return _FileTerms(tuple(vectors), shape, tuple(axes), tuple(coefficients))


# Term values

def _check_index(spec: SeriesSpec, n: int) -> None:
    if n < 1:
        raise InvalidParameterError(f"Term index must be >= 1, got {n}")
    if spec.length is not None and n > spec.length:
        raise ExhaustedStreamError(f"Term {n} requested but {spec.path} defines only {spec.length} terms")


def exact_coefficient(spec: SeriesSpec, n: int) -> Fraction:
    """Exact c_n for scalar and axis-aligned families (integer alpha)."""
    _check_index(spec, n)
    family = spec.family
    if family is SeriesFamily.FROM_FILE:
        return Fraction(_file_terms(spec.path, ScalarMode.EXACT_RATIONAL).coefficients[n - 1])
    if family is SeriesFamily.ZERO:
        return Fraction(0)
    if not float(spec.alpha).is_integer():
        raise InvalidParameterError(f"No exact value for non-integer alpha {spec.alpha}")
    power = n ** int(spec.alpha)
    if family is SeriesFamily.ALTERNATING_HARMONIC:
        return Fraction((-1) ** n, n)
    if family is SeriesFamily.HARMONIC:
        return Fraction(1, n)
    if family is SeriesFamily.ALTERNATING_POWER:
        return Fraction((-1) ** n, power)
    if family is SeriesFamily.COORDINATE_DECAY:
        return Fraction(1, power)
    sign = int(spec.signs.signs_at(np.array([n]))[0])
    return Fraction(sign, power)


def coefficients_at(spec: SeriesSpec, indices: Sequence[int]) -> np.ndarray:
    """
    Float coefficients c_n for scalar or axis-aligned series.

    For scalar families x_n = c_n; for coordinate families x_n = c_n e_n.
    """
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and idx.min() < 1:
        raise InvalidParameterError("Term indices must be >= 1")
    family = spec.family
    if family is SeriesFamily.FROM_FILE:
        terms = _file_terms(spec.path, spec.mode)
        if not is_axis_aligned(spec):
            raise InvalidParameterError(f"{spec.path} is not axis-aligned; no coefficient view")
        if idx.size and idx.max() > len(terms.vectors):
            raise ExhaustedStreamError(f"Term {int(idx.max())} beyond the {len(terms.vectors)} terms in {spec.path}")
        table = np.asarray([float(c) for c in terms.coefficients], dtype=float)
        return table[idx - 1] if idx.size else np.zeros(0)
    n = idx.astype(float)
    if family is SeriesFamily.ZERO:
        return np.zeros(len(n))
    if family is SeriesFamily.HARMONIC:
        return 1.0 / n
    alternating = np.where(idx % 2 == 0, 1.0, -1.0)
    if family is SeriesFamily.ALTERNATING_HARMONIC:
        return alternating / n
    decay = n ** (-float(spec.alpha))
    if family is SeriesFamily.ALTERNATING_POWER:
        return alternating * decay
    if family is SeriesFamily.COORDINATE_DECAY:
        return decay
    return spec.signs.signs_at(idx) * decay


def coefficients(spec: SeriesSpec, start: int, stop: int) -> np.ndarray:
    """Float coefficients for n in [start, stop)."""
    return coefficients_at(spec, np.arange(start, stop, dtype=np.int64))


def is_axis_aligned(spec: SeriesSpec) -> bool:
    """Every term has at most one nonzero coordinate (axes may repeat)."""
    if spec.family is not SeriesFamily.FROM_FILE:
        return True
    terms = _file_terms(spec.path, spec.mode)
    return len(terms.axes) == len(terms.vectors)


def axes_at(spec: SeriesSpec, indices: Sequence[int]) -> np.ndarray:
    """Coordinate each term lives on (0 for zero file terms)."""
    idx = np.asarray(indices, dtype=np.int64)
    if spec.family is SeriesFamily.FROM_FILE:
        terms = _file_terms(spec.path, spec.mode)
        return np.asarray(terms.axes, dtype=np.int64)[idx - 1] if idx.size else idx
    if spec.shape is SeriesShape.SCALAR:
        return np.ones(len(idx), dtype=np.int64)
    return idx


def norms_at(spec: SeriesSpec, indices: Sequence[int]) -> np.ndarray:
    """‖x_n‖₂ for the given indices."""
    if spec.shape is SeriesShape.GENERAL:
        return np.asarray([float(_vector_norm(term(spec, int(n)))) for n in indices])
    return np.abs(coefficients_at(spec, indices))


def term_matrix(spec: SeriesSpec, indices: Sequence[int]) -> Tuple[np.ndarray, List[int]]:
    """
    Float rows x_n (one per index) restricted to the union of their supports.

    Returns:
        (matrix of shape (len(indices), m), the m coordinates as a list)
    """
    idx = np.asarray(indices, dtype=np.int64)
    shape = spec.shape
    if shape is SeriesShape.SCALAR:
        return coefficients_at(spec, idx).reshape(-1, 1), [1]
    if shape is SeriesShape.DISJOINT:
        axes = axes_at(spec, idx)
        columns = sorted({int(a) for a in axes if a})
        position = {a: k for k, a in enumerate(columns)}
        matrix = np.zeros((len(idx), len(columns)))
        for r, (a, c) in enumerate(zip(axes, coefficients_at(spec, idx))):
            if a:
                matrix[r, position[int(a)]] = c
        return matrix, columns
    vectors = [term(spec, int(n)) for n in idx]
    columns = sorted({j for v in vectors for j in v.support()})
    position = {a: k for k, a in enumerate(columns)}
    matrix = np.zeros((len(idx), len(columns)))
    for r, v in enumerate(vectors):
        for j, x in v.items():
            matrix[r, position[j]] = float(x)
    return matrix, columns


def _vector_norm(v: Vector) -> float:
    return math.hypot(*(float(x) for x in v.values())) if not v.is_zero() else 0.0


def term(spec: SeriesSpec, n: int) -> Vector:
    """
    x_n as a Vector.

    Raises:
        ExhaustedStreamError: FromFile index beyond the file length
    """
    _check_index(spec, n)
    if spec.family is SeriesFamily.FROM_FILE:
        return _file_terms(spec.path, spec.mode).vectors[n - 1]
    if spec.mode.is_exact:
        value = exact_coefficient(spec, n)
    else:
        value = float(coefficients_at(spec, [n])[0])
    if spec.shape is SeriesShape.SCALAR:
        return Vector.dense((value,))
    return Vector.sparse({n: value})


# Permutations

@dataclass(frozen=True)
class Permutation:
    """
    Finite bijection prefix: position k (1-based) holds term index prefix[k-1].
    """

    prefix: Tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        prefix = tuple(int(i) for i in self.prefix)
        if any(i < 1 for i in prefix):
            raise InvalidPermutationError("Permutation entries must be positive")
        if len(set(prefix)) != len(prefix):
            raise InvalidPermutationError("Permutation entries must be pairwise distinct")
        object.__setattr__(self, "prefix", prefix)

    def __len__(self) -> int:
        return len(self.prefix)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(1, n + 1)))

    @classmethod
    def random(cls, n: int, seed: int) -> "Permutation":
        rng = np.random.default_rng(seed)
        return cls(tuple((rng.permutation(n) + 1).tolist()))

    def is_complete(self, n: Optional[int] = None) -> bool:
        """True iff the first n entries are a bijection of {1..n}."""
        n = len(self.prefix) if n is None else n
        return len(self.prefix) >= n and set(self.prefix[:n]) == set(range(1, n + 1))

    def indices(self, n: int) -> np.ndarray:
        if len(self.prefix) < n:
            raise InvalidPermutationError(f"Permutation covers {len(self.prefix)} positions, need {n}")
        return np.asarray(self.prefix[:n], dtype=np.int64)


def order_indices(order: Optional[Permutation], n: int) -> np.ndarray:
    if order is None:
        return np.arange(1, n + 1, dtype=np.int64)
    return order.indices(n)


# Partial sums

def partial_sum(spec: SeriesSpec, order: Optional[Permutation], N: int,
                strategy: SummationStrategy = SummationStrategy.COMPENSATED, workers: int = 1) -> Vector:
    """
    Σ_{k=1}^{N} x_{order(k)} under a summation strategy.

    Args:
        spec: Series definition
        order: Permutation covering positions 1..N, or None for identity
        N: Number of terms
        strategy: Naive, Compensated, Pairwise or ExactRational
        workers: Threads for identity-order scalar sums; Pairwise results do
            not depend on it

    Returns:
        The partial sum as a Vector

    Raises:
        InvalidPermutationError: If order is shorter than N
    """
    if N < 0:
        raise InvalidParameterError(f"N must be >= 0, got {N}")
    strategy.check_mode(spec.mode)
    if order is not None and len(order) < N:
        raise InvalidPermutationError(f"Permutation covers {len(order)} positions, need {N}")
    if order is None and spec.shape is SeriesShape.SCALAR and strategy is not SummationStrategy.EXACT_RATIONAL:
        return Vector.dense((_identity_scalar_sum(spec, N, strategy, workers),))
    return _sum_indices(spec, order_indices(order, N), strategy)


def sum_over_set(spec: SeriesSpec, indices: Iterable[int],
                 strategy: SummationStrategy = SummationStrategy.COMPENSATED) -> Vector:
    """
    Σ_{n ∈ F} x_n for a finite index set F.

    Float strategies add in increasing index order; ExactRational is order
    independent by construction.
    """
    strategy.check_mode(spec.mode)
    ordered = np.asarray(sorted(set(int(i) for i in indices)), dtype=np.int64)
    if ordered.size and ordered[0] < 1:
        raise InvalidParameterError("Index sets must contain indices >= 1")
    return _sum_indices(spec, ordered, strategy)


def _zero_result(spec: SeriesSpec) -> Vector:
    if spec.shape is SeriesShape.SCALAR:
        return Vector.zero(1, spec.mode)
    return Vector.zero()


def _sum_indices(spec: SeriesSpec, indices: np.ndarray, strategy: SummationStrategy) -> Vector:
    if indices.size == 0:
        return _zero_result(spec)
    exact = strategy is SummationStrategy.EXACT_RATIONAL
    if exact and indices.size > MAX_EXACT_TERMS:
        raise InvalidParameterError(
            f"ExactRational sums are capped at {MAX_EXACT_TERMS} terms, got {indices.size}"
        )
    shape = spec.shape
    if shape is SeriesShape.SCALAR:
        if exact:
            return Vector.dense((exact_sum([exact_coefficient(spec, int(n)) for n in indices]),))
        return Vector.dense((float(strategy.reduce(coefficients_at(spec, indices))),))
    if shape is SeriesShape.DISJOINT:
        # one term per coordinate: no additions happen, every strategy agrees
        axes = axes_at(spec, indices)
        if exact or spec.mode.is_exact:
            values = [exact_coefficient(spec, int(n)) for n in indices]
        else:
            values = coefficients_at(spec, indices).tolist()
        return Vector.sparse({int(a): v for a, v in zip(axes, values) if a})
    return _sum_general(spec, indices, strategy)


def _sum_general(spec: SeriesSpec, indices: np.ndarray, strategy: SummationStrategy) -> Vector:
    vectors = [term(spec, int(n)) for n in indices]
    support = sorted({j for v in vectors for j in v.support()})
    if not support:
        return Vector.zero()
    column = {j: k for k, j in enumerate(support)}
    if strategy is SummationStrategy.EXACT_RATIONAL:
        rows = [[Fraction(0)] * len(support) for _ in vectors]
        for row, v in zip(rows, vectors):
            for j, x in v.items():
                row[column[j]] = Fraction(x)
        totals = exact_sum(rows)
    else:
        matrix = np.zeros((len(vectors), len(support)))
        for r, v in enumerate(vectors):
            for j, x in v.items():
                matrix[r, column[j]] = float(x)
        totals = strategy.reduce(matrix)
    return Vector.sparse({j: totals[k] for j, k in column.items()})


def _identity_scalar_sum(spec: SeriesSpec, N: int, strategy: SummationStrategy, workers: int = 1) -> float:
    """Identity-order scalar sum generated chunk by chunk (no index array for all N)."""
    if N == 0:
        return 0.0
    if strategy is SummationStrategy.NAIVE:
        running = 0.0
        for start in range(1, N + 1, CHUNK):
            chunk = coefficients(spec, start, min(start + CHUNK, N + 1))
            running = float(np.cumsum(np.concatenate(([running], chunk)))[-1])
        return running
    if strategy is SummationStrategy.COMPENSATED and workers <= 1:
        acc = NeumaierAccumulator()
        for start in range(1, N + 1, CHUNK):
            for x in coefficients(spec, start, min(start + CHUNK, N + 1)).tolist():
                acc.add(x)
        return acc.total
    # CHUNK is a power of two, so pairwise chunk partials are exact subtrees of the balanced tree
    return float(reduce_chunks(lambda start, stop: coefficients(spec, start + 1, stop + 1), N, strategy,
                               CHUNK, workers))
