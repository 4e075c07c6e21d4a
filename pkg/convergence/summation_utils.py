"""
Summation strategies for finite sums of scalars or coordinate rows.

Naive        left-to-right accumulation
Compensated  Neumaier running-error compensation
Pairwise     balanced-tree association
Exact        rational arithmetic, independent of association order
"""
import enum
import logging
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Callable, List, Sequence, Union

import numpy as np

from convergence.errors import InvalidParameterError
from convergence.workspace import Scalar, ScalarMode

logger = logging.getLogger(__name__)


class SummationStrategy(str, enum.Enum):
    NAIVE = "naive"
    COMPENSATED = "compensated"
    PAIRWISE = "pairwise"
    EXACT_RATIONAL = "exact-rational"

    def check_mode(self, mode: ScalarMode) -> None:
        """ExactRational summation needs exact term values."""
        if self is SummationStrategy.EXACT_RATIONAL and not mode.is_exact:
            raise InvalidParameterError("ExactRational summation requires ScalarMode exact-rational")

    def reduce(self, values: Union[np.ndarray, Sequence[Scalar]]):
        """
        Sum values along the first axis.

        Args:
            values: 1-d sequence of scalars, or an (N, d) float array

        Returns:
            Scalar (1-d input) or length-d array; list of Fractions for exact rows
        """
        if self is SummationStrategy.EXACT_RATIONAL:
            return exact_sum(values)
        arr = np.asarray(values, dtype=float)
        if self is SummationStrategy.NAIVE:
            return naive_sum(arr)
        if self is SummationStrategy.PAIRWISE:
            return pairwise_sum(arr)
        return compensated_sum(arr)


class NeumaierAccumulator:
    """
    Running sum with a separate error term.

    Unlike plain Kahan summation the carry is also correct when the incoming
    value is larger in magnitude than the running sum.
    """

    __slots__ = ("sum", "carry")

    def __init__(self, value: float = 0.0):
        self.sum = float(value)
        self.carry = 0.0

    def add(self, value: float) -> None:
        t = self.sum + value
        if abs(self.sum) >= abs(value):
            self.carry += (self.sum - t) + value
        else:
            self.carry += (value - t) + self.sum
        self.sum = t

    def merge(self, other: "NeumaierAccumulator") -> None:
        self.add(other.sum)
        self.add(other.carry)

    @property
    def total(self) -> float:
        return self.sum + self.carry


def naive_sum(values: np.ndarray):
    if len(values) == 0:
        return _zero_like(values)
    # cumsum accumulates strictly left to right (np.sum would associate pairwise)
    return np.cumsum(values, axis=0)[-1]


def pairwise_sum(values: np.ndarray):
    if len(values) == 0:
        return _zero_like(values)
    level = values
    while len(level) > 1:
        if len(level) % 2:
            level = np.concatenate([level, np.zeros((1,) + level.shape[1:])])
        level = level[0::2] + level[1::2]
    return level[0]


def compensated_sum(values: np.ndarray):
    if len(values) == 0:
        return _zero_like(values)
    if values.ndim == 1:
        acc = NeumaierAccumulator()
        for x in values.tolist():
            acc.add(x)
        return acc.total
    s = np.zeros(values.shape[1:])
    carry = np.zeros(values.shape[1:])
    for row in values:
        t = s + row
        carry += np.where(np.abs(s) >= np.abs(row), (s - t) + row, (row - t) + s)
        s = t
    return s + carry


def exact_sum(values: Sequence) -> Union[Fraction, List[Fraction]]:
    """Exact sum of scalars, or per-coordinate exact sum of rows."""
    if len(values) == 0:
        return Fraction(0)
    first = values[0]
    if isinstance(first, (int, float, Fraction, np.floating)):
        return sum((_to_fraction(x) for x in values), Fraction(0))
    width = len(first)
    totals = [Fraction(0)] * width
    for row in values:
        for j in range(width):
            totals[j] += _to_fraction(row[j])
    return totals


def reduce_chunks(produce: Callable[[int, int], np.ndarray], length: int, strategy: SummationStrategy,
                  chunk_size: int = 1 << 16, workers: int = 1):
    """
    Sum [0, length) chunk by chunk, producing and reducing chunks concurrently.

    Args:
        produce: Returns the values for the half-open range [start, stop)
        length: Total number of values
        strategy: Naive, Compensated or Pairwise
        chunk_size: Power-of-two chunk length
        workers: Threads producing and reducing chunks

    Returns:
        The combined sum. Pairwise chunks are aligned to a power of two, so the
        result is bit-identical to the single-threaded balanced tree for every
        worker count. Naive chunks are added left to right and only match the
        unchunked naive sum when there is one chunk.
    """
    if chunk_size < 1 or chunk_size & (chunk_size - 1):
        raise InvalidParameterError(f"chunk_size must be a power of two, got {chunk_size}")
    if strategy is SummationStrategy.EXACT_RATIONAL:
        raise InvalidParameterError("reduce_chunks is float-only; use exact_sum")
    starts = list(range(0, length, chunk_size))
    if not starts:
        return 0.0

    def partial(start: int):
        return strategy.reduce(produce(start, min(start + chunk_size, length)))

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        partials = list(pool.map(partial, starts))
    logger.debug(f"reduce_chunks: {len(starts)} chunks, strategy={strategy.value}, workers={workers}")
    stacked = np.asarray(partials, dtype=float)
    if strategy is SummationStrategy.NAIVE:
        return naive_sum(stacked)
    if strategy is SummationStrategy.COMPENSATED:
        return compensated_sum(stacked)
    return pairwise_sum(stacked)


def parallel_sum(values: np.ndarray, strategy: SummationStrategy, chunk_size: int = 1 << 16,
                 workers: int = 1):
    """
    Sum disjoint index ranges concurrently, then combine the partials.

    Pairwise chunks are aligned to a power of two, so the combined result is
    bit-identical to the single-threaded balanced tree. Naive chunking changes
    the association order and therefore the rounding; Compensated partials are
    merged through one accumulator.
    """
    if strategy is SummationStrategy.EXACT_RATIONAL:
        return exact_sum(values)
    arr = np.asarray(values, dtype=float)
    if not len(arr):
        return _zero_like(arr)
    return reduce_chunks(lambda start, stop: arr[start:stop], len(arr), strategy, chunk_size, workers)


def _to_fraction(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(float(x)) if isinstance(x, (float, np.floating)) else Fraction(x)


def _zero_like(values: np.ndarray):
    if values.ndim <= 1:
        return 0.0
    return np.zeros(values.shape[1:])
