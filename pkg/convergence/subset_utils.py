"""
Exhaustive enumeration of subset sums and sign patterns of a few vectors.

For K rows the 2^K subset sums are split into a table over the low bits and
an outer loop over the high bits; the outer loop is partitioned across
workers and reduced with max, which does not depend on the partition.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from convergence.errors import InvalidParameterError

logger = logging.getLogger(__name__)

MAX_EXHAUSTIVE = 24
LOW_BITS = 16


@dataclass(frozen=True)
class SubsetExtremes:
    """Max and min of ‖α·s_F + shift‖₂ over all masks F, with their masks."""

    max_value: float
    max_mask: int
    min_value: float
    min_mask: int


def _subset_table(rows: np.ndarray) -> np.ndarray:
    """All subset sums of rows, indexed by bitmask (bit i selects row i)."""
    table = np.zeros((1, rows.shape[1]))
    for row in rows:
        table = np.vstack([table, table + row])
    return table


def _scan(low_table: np.ndarray, high_rows: np.ndarray, low_bits: int, masks: range,
          alpha: float, shift: np.ndarray) -> SubsetExtremes:
    best = SubsetExtremes(-np.inf, 0, np.inf, 0)
    for high in masks:
        bits = np.array([(high >> i) & 1 for i in range(len(high_rows))], dtype=float)
        offset = bits @ high_rows if len(high_rows) else np.zeros(low_table.shape[1])
        values = np.linalg.norm(alpha * (low_table + offset) + shift, axis=1)
        hi, lo = int(np.argmax(values)), int(np.argmin(values))
        base = high << low_bits
        best = _merge(best, SubsetExtremes(float(values[hi]), base | hi, float(values[lo]), base | lo))
    return best


def _merge(a: SubsetExtremes, b: SubsetExtremes) -> SubsetExtremes:
    # ties resolve to the smaller mask so the result is partition independent
    if b.max_value > a.max_value or (b.max_value == a.max_value and b.max_mask < a.max_mask):
        max_value, max_mask = b.max_value, b.max_mask
    else:
        max_value, max_mask = a.max_value, a.max_mask
    if b.min_value < a.min_value or (b.min_value == a.min_value and b.min_mask < a.min_mask):
        min_value, min_mask = b.min_value, b.min_mask
    else:
        min_value, min_mask = a.min_value, a.min_mask
    return SubsetExtremes(max_value, max_mask, min_value, min_mask)


def enumerate_extremes(rows: np.ndarray, alpha: float = 1.0, shift: Optional[np.ndarray] = None,
                       workers: int = 1, partitions: Optional[int] = None) -> SubsetExtremes:
    """
    Extremes of ‖α·Σ_{i∈F} rows_i + shift‖₂ over every subset F (empty included).

    Args:
        rows: (K, m) float array, K <= MAX_EXHAUSTIVE
        alpha: Scale applied to the subset sum
        shift: Constant vector added after scaling
        workers: Thread count for the outer loop
        partitions: Number of outer-loop slices (defaults to workers)

    Raises:
        InvalidParameterError: If K exceeds MAX_EXHAUSTIVE
    """
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2:
        raise InvalidParameterError("Subset enumeration needs a 2-d array of rows")
    K = rows.shape[0]
    if K > MAX_EXHAUSTIVE:
        raise InvalidParameterError(f"Exhaustive enumeration supports at most {MAX_EXHAUSTIVE} terms, got {K}")
    shift = np.zeros(rows.shape[1]) if shift is None else np.asarray(shift, dtype=float)
    low_bits = min(K, LOW_BITS)
    low_table = _subset_table(rows[:low_bits])
    high_rows = rows[low_bits:]
    outer = 1 << (K - low_bits)
    slices = max(1, min(outer, partitions or workers))
    bounds = np.linspace(0, outer, slices + 1).astype(int)
    ranges = [range(bounds[i], bounds[i + 1]) for i in range(slices) if bounds[i] < bounds[i + 1]]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        parts = list(pool.map(lambda r: _scan(low_table, high_rows, low_bits, r, alpha, shift), ranges))
    result = parts[0]
    for part in parts[1:]:
        result = _merge(result, part)
    logger.debug(f"Enumerated 2^{K} subsets in {len(ranges)} slices")
    return result


def max_subset_norm(rows: np.ndarray, workers: int = 1,
                    partitions: Optional[int] = None) -> Tuple[float, List[int]]:
    """
    sup over subsets F of ‖Σ_{i∈F} rows_i‖₂.

    Returns:
        (max norm, 0-based row positions of a maximizing subset)
    """
    if len(rows) == 0:
        return 0.0, []
    extremes = enumerate_extremes(rows, workers=workers, partitions=partitions)
    return extremes.max_value, mask_positions(extremes.max_mask, len(rows))


def sign_pattern_extremes(rows: np.ndarray, workers: int = 1,
                          partitions: Optional[int] = None) -> Tuple[float, List[int], float, List[int]]:
    """
    Max and min over ε ∈ {±1}^K of ‖Σ ε_i rows_i‖₂.

    Uses Σ ε_i x_i = 2·Σ_{ε_i=+1} x_i − Σ x_i. The pair ε, −ε gives the same
    norm; the reported pattern makes the first nonzero coordinate of the
    signed sum positive.

    Returns:
        (max, argmax signs, min, argmin signs)
    """
    rows = np.asarray(rows, dtype=float)
    K = len(rows)
    if K == 0:
        return 0.0, [], 0.0, []
    total = rows.sum(axis=0)
    extremes = enumerate_extremes(rows, alpha=2.0, shift=-total, workers=workers, partitions=partitions)
    return (
        extremes.max_value,
        _canonical_signs(rows, extremes.max_mask),
        extremes.min_value,
        _canonical_signs(rows, extremes.min_mask),
    )


def mask_positions(mask: int, K: int) -> List[int]:
    return [i for i in range(K) if (mask >> i) & 1]


def _canonical_signs(rows: np.ndarray, mask: int) -> List[int]:
    signs = np.array([1 if (mask >> i) & 1 else -1 for i in range(len(rows))])
    signed = signs @ rows
    nonzero = np.flatnonzero(np.abs(signed) > 0)
    if nonzero.size and signed[nonzero[0]] < 0:
        signs = -signs
    return signs.tolist()
