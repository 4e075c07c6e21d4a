"""
Constructive permutations.

riemann_rearrange steers a conditionally convergent real series to a target
by the greedy sign-block construction. The block helpers build permutations
and subseries out of explicit disjoint index blocks.
"""
import logging
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Deque, Iterator, List, Optional, Sequence, Set, Tuple

import numpy as np

from convergence import io_utils
from convergence.diagnostics import NetSupMethod, TailWindow, net_cauchy_witness, scalable_net_method
from convergence.errors import (
    BudgetExceededError,
    ExhaustedStreamError,
    InvalidBlocksError,
    InvalidParameterError,
    NotConditionallyConvergentError,
)
from convergence.series import (
    SeriesShape,
    SeriesSpec,
    Permutation,
    coefficients,
    exact_coefficient,
    partial_sum,
)
from convergence.summation_utils import NeumaierAccumulator, SummationStrategy

logger = logging.getLogger(__name__)

DEFAULT_BUDGET = 2_000_000
CURSOR_CHUNK = 1 << 16
# Cursors may scan past the budget while skipping terms of the other sign
SCAN_FACTOR = 64


@dataclass
class RearrangementTrace:
    """
    Greedy rearrangement run.

    prefix[k] is the term index placed at position k+1 and partial_sums[k]
    the running sum through that position. block_ends holds (step, sign) for
    every completed sign block; targets_hit the (step, running sum) at each
    completed block that landed within tolerance.
    """

    target: float
    tol: float
    prefix: List[int] = field(default_factory=list)
    term_values: List[float] = field(default_factory=list)
    partial_sums: List[float] = field(default_factory=list)
    block_ends: List[Tuple[int, int]] = field(default_factory=list)
    targets_hit: List[Tuple[int, float]] = field(default_factory=list)
    converged: bool = False

    @property
    def budget_used(self) -> int:
        return len(self.prefix)

    @property
    def final_sum(self) -> float:
        return self.partial_sums[-1] if self.partial_sums else 0.0

    @property
    def permutation(self) -> Permutation:
        return Permutation(tuple(self.prefix))

    def records(self) -> Iterator[dict]:
        """JSON-lines rows {step, termIndex, termValue, runningSum}."""
        for step, (index, value, running) in enumerate(zip(self.prefix, self.term_values, self.partial_sums), 1):
            yield {"step": step, "termIndex": index, "termValue": value, "runningSum": running}

    def export(self, path) -> int:
        return io_utils.write_json_lines(path, self.records())

    def summary(self) -> dict:
        return {
            "target": self.target,
            "tol": self.tol,
            "converged": self.converged,
            "finalSum": self.final_sum,
            "gap": abs(self.final_sum - self.target),
            "budgetUsed": self.budget_used,
            "blocks": len(self.block_ends),
            "targetsHit": [{"step": s, "value": v} for s, v in self.targets_hit],
        }


class _ZeroFrontier:
    """Zero terms found by either cursor, each released exactly once in index order."""

    def __init__(self):
        self.scanned = 0
        self.pending: Deque[int] = deque()

    def offer(self, start: int, c: np.ndarray) -> None:
        found = np.flatnonzero(c == 0) + start
        self.pending.extend(int(i) for i in found if i > self.scanned)
        self.scanned = max(self.scanned, start + len(c) - 1)

    def release(self, before: int) -> List[int]:
        out = []
        while self.pending and self.pending[0] < before:
            out.append(self.pending.popleft())
        return out


class _SignCursor:
    """Walks term indices in increasing order, yielding those of one strict sign."""

    def __init__(self, spec: SeriesSpec, positive: bool, limit: int, zeros: _ZeroFrontier):
        self.spec = spec
        self.positive = positive
        self.limit = limit
        self.zeros = zeros
        self.next_start = 1
        self.buffer: List[int] = []
        self.values: List[float] = []

    def _refill(self) -> None:
        while not self.buffer:
            if self.next_start > self.limit:
                raise BudgetExceededError(
                    f"No further {'positive' if self.positive else 'negative'} terms within index {self.limit}"
                )
            stop = min(self.next_start + CURSOR_CHUNK, self.limit + 1)
            try:
                c = coefficients(self.spec, self.next_start, stop)
            except ExhaustedStreamError as e:
                raise BudgetExceededError(str(e))
            self.zeros.offer(self.next_start, c)
            mask = c > 0 if self.positive else c < 0
            picked = np.flatnonzero(mask)
            self.buffer = (picked + self.next_start).tolist()[::-1]
            self.values = c[picked].tolist()[::-1]
            self.next_start = stop

    def pop(self) -> Tuple[List[int], int, float]:
        """Next term of this sign, preceded by the zero terms the walk has passed."""
        self._refill()
        index = self.buffer.pop()
        return self.zeros.release(index), index, self.values.pop()


def conditional_precheck(spec: SeriesSpec, target: float, budget: int) -> dict:
    """
    Heuristic evidence that a real series is conditionally convergent.

    Within the budget the non-negative part must exceed max(target, 0) + 1,
    the negative part must fall below min(target, 0) − 1, and term
    magnitudes in the later half of the scanned range must stay below the
    earlier half.

    Raises:
        NotConditionallyConvergentError: If any requirement fails
    """
    if spec.shape is not SeriesShape.SCALAR:
        raise NotConditionallyConvergentError(
            f"Rearrangement to a target needs a real scalar series, {spec.family.value} is vector valued"
        )
    need_positive = max(target, 0.0) + 1.0
    need_negative = max(-target, 0.0) + 1.0
    positive = NeumaierAccumulator()
    negative = NeumaierAccumulator()
    limit = budget if spec.length is None else min(budget, spec.length)
    head_max, scanned = 0.0, 0
    start = 1
    while start <= limit:
        stop = min(start + CURSOR_CHUNK, limit + 1)
        c = coefficients(spec, start, stop)
        positive.add(float(np.sum(c[c > 0])))
        negative.add(float(-np.sum(c[c < 0])))
        if start == 1:
            head_max = float(np.max(np.abs(c[: max(1, len(c) // 2)])))
        scanned = stop - 1
        start = stop
        if positive.total > need_positive and negative.total > need_negative:
            break
    tail = np.abs(coefficients(spec, max(1, scanned // 2 + 1), scanned + 1)) if scanned else np.zeros(0)
    decaying = scanned >= 2 and float(np.max(tail)) < head_max
    evidence = {
        "positivePart": positive.total,
        "negativePart": -negative.total,
        "scanned": scanned,
        "decaying": decaying,
    }
    if not (positive.total > need_positive and negative.total > need_negative and decaying):
        raise NotConditionallyConvergentError(
            f"No evidence of conditional convergence within {limit} terms: positive part "
            f"{positive.total:.6g} (need > {need_positive:.6g}), negative part {-negative.total:.6g} "
            f"(need < {-need_negative:.6g}), decaying={decaying}"
        )
    return evidence


def riemann_rearrange(spec: SeriesSpec, target: float, tol: float, budget: int = DEFAULT_BUDGET) -> RearrangementTrace:
    """
    Greedy rearrangement of a real series towards target.

    Positive terms are appended while the running sum is <= target,
    then negative terms while it is > target, alternating. The run stops at
    the first completed, non-empty block whose end lies within tol of the
    target. Zero terms are placed as soon as either cursor walks past
    them; they do not count towards a block.

    Args:
        spec: Scalar series
        target: Value to steer to
        tol: Tolerance > 0
        budget: Maximum number of terms placed

    Returns:
        RearrangementTrace with converged = True

    Raises:
        NotConditionallyConvergentError: Precheck failed
        BudgetExceededError: Budget exhausted; .partial holds the trace so far
    """
    if not tol > 0:
        raise InvalidParameterError(f"tol must be > 0, got {tol}")
    if budget < 1:
        raise InvalidParameterError(f"budget must be >= 1, got {budget}")
    conditional_precheck(spec, target, budget)
    exact = spec.mode.is_exact
    trace = RearrangementTrace(float(target), float(tol))
    limit = SCAN_FACTOR * budget if spec.length is None else spec.length
    zeros = _ZeroFrontier()
    cursors = {True: _SignCursor(spec, True, limit, zeros), False: _SignCursor(spec, False, limit, zeros)}
    running = Fraction(0) if exact else NeumaierAccumulator()
    goal = Fraction(target) if exact else target

    def current():
        return running if exact else running.total

    def place(index: int, value: float) -> None:
        nonlocal running
        if trace.budget_used >= budget:
            raise BudgetExceededError(f"Budget of {budget} terms exhausted before reaching {target} ± {tol}")
        if exact:
            term = exact_coefficient(spec, index)
            running += term
            value = float(term)
        else:
            running.add(value)
        trace.prefix.append(index)
        trace.term_values.append(value)
        trace.partial_sums.append(float(current()))

    positive_phase = True
    block_size = 0
    try:
        while True:
            needs_more = current() <= goal if positive_phase else current() > goal
            if not needs_more:
                if block_size:
                    value = float(current())
                    step = trace.budget_used
                    trace.block_ends.append((step, 1 if positive_phase else -1))
                    if abs(value - target) <= tol:
                        trace.targets_hit.append((step, value))
                        trace.converged = True
                        break
                positive_phase = not positive_phase
                block_size = 0
                continue
            if trace.budget_used >= budget:
                raise BudgetExceededError(f"Budget of {budget} terms exhausted before reaching {target} ± {tol}")
            passed, index, value = cursors[positive_phase].pop()
            for zero_index in passed:
                place(zero_index, 0.0)
            place(index, value)
            block_size += 1
    except BudgetExceededError as e:
        logger.warning(f"riemann_rearrange stopped after {trace.budget_used} terms: {e.message}")
        raise BudgetExceededError(e.message, partial=trace)
    logger.info(f"riemann_rearrange {spec.family.value} -> {target}: sum {trace.final_sum:.12g} "
                f"after {trace.budget_used} terms, {len(trace.block_ends)} blocks")
    return trace


# Block constructions

def _validate_blocks(blocks: Sequence[Set[int]], universe: Optional[int] = None) -> List[List[int]]:
    seen: Set[int] = set()
    out = []
    for k, block in enumerate(blocks):
        items = sorted(int(i) for i in block)
        if any(i < 1 for i in items):
            raise InvalidBlocksError(f"Block {k} contains an index < 1")
        if universe is not None and items and items[-1] > universe:
            raise InvalidBlocksError(f"Block {k} contains index {items[-1]} > fill universe {universe}")
        overlap = seen.intersection(items)
        if overlap:
            raise InvalidBlocksError(f"Block {k} overlaps earlier blocks at {sorted(overlap)[:5]}")
        seen.update(items)
        out.append(items)
    return out


def non_cauchy_block_permutation(blocks: Sequence[Set[int]], fill_universe: int) -> Permutation:
    """
    Bijection of {1..fill_universe} that places each block on consecutive positions.

    Before block k come the unused non-block indices smaller than min(block k);
    indices left over after the last block follow in increasing order.

    Raises:
        InvalidBlocksError: Overlapping blocks or indices outside the universe
    """
    ordered = _validate_blocks(blocks, fill_universe)
    in_blocks = {i for block in ordered for i in block}
    fillers = (i for i in range(1, fill_universe + 1) if i not in in_blocks)
    prefix: List[int] = []
    pending = next(fillers, None)
    for block in ordered:
        if not block:
            continue
        while pending is not None and pending < block[0]:
            prefix.append(pending)
            pending = next(fillers, None)
        prefix.extend(block)
    while pending is not None:
        prefix.append(pending)
        pending = next(fillers, None)
    return Permutation(tuple(prefix))


def subseries_from_blocks(blocks: Sequence[Set[int]]) -> List[int]:
    """Sorted union of disjoint blocks."""
    ordered = _validate_blocks(blocks)
    return sorted(i for block in ordered for i in block)


def dyadic_blocks(k_max: int, k_min: int = 0) -> List[Set[int]]:
    """G_k = {2^k + 1, ..., 2^(k+1)} for k_min <= k <= k_max."""
    return [set(range((1 << k) + 1, (1 << (k + 1)) + 1)) for k in range(k_min, k_max + 1)]


def block_jumps(spec: SeriesSpec, permutation: Permutation, blocks: Sequence[Set[int]],
                strategy: SummationStrategy = SummationStrategy.COMPENSATED) -> List[float]:
    """
    ‖S_end − S_start‖ across each block's consecutive run of positions.

    Raises:
        InvalidBlocksError: If a block does not occupy consecutive positions
    """
    position = {index: k for k, index in enumerate(permutation.prefix)}
    jumps = []
    for block in _validate_blocks(blocks):
        if not block:
            jumps.append(0.0)
            continue
        try:
            where = sorted(position[i] for i in block)
        except KeyError as e:
            raise InvalidBlocksError(f"Index {e.args[0]} is not placed by the permutation")
        if where[-1] - where[0] + 1 != len(where):
            raise InvalidBlocksError(f"Block starting at {block[0]} is not on consecutive positions")
        run = Permutation(permutation.prefix[where[0]:where[-1] + 1])
        total = partial_sum(spec, run, len(run), strategy)
        jumps.append(float(np.linalg.norm([float(x) for x in total.values()])))
    return jumps


def find_heavy_blocks(spec: SeriesSpec, epsilon: float, count: int, start: int = 0,
                      max_index: int = 1 << 22) -> List[Set[int]]:
    """
    Successive finite sets G_k with min(G_k) > max(G_{k-1}) and ‖Σ_{G_k} x_n‖ >= epsilon.

    Each candidate window (m, 2m] (or (m, m+20] when only exhaustive search
    fits the series) is searched for its net-sup maximizer.

    Raises:
        BudgetExceededError: Fewer than count blocks below max_index;
            .partial holds the blocks found
    """
    if not epsilon > 0 or count < 1:
        raise InvalidParameterError("find_heavy_blocks needs epsilon > 0 and count >= 1")
    method = scalable_net_method(spec) or NetSupMethod.EXHAUSTIVE
    found: List[Set[int]] = []
    m = max(1, start)
    while len(found) < count:
        width = m if method is not NetSupMethod.EXHAUSTIVE else 20
        if m + width > max_index or (spec.length is not None and m + width > spec.length):
            raise BudgetExceededError(
                f"Found {len(found)} of {count} blocks with norm >= {epsilon} below index {m + width}",
                partial=found,
            )
        value, subset = net_cauchy_witness(spec, TailWindow(m, width), method)
        if value >= epsilon and subset:
            found.append(set(subset))
        m += width
    return found
