"""
Scalars, vectors, norms and inner products.
Vectors live either in R^d (dense) or in a truncated sequence space (sparse,
1-based coordinates). Arithmetic is float64 or exact rational.
"""
import enum
import math
from fractions import Fraction
from types import MappingProxyType
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from convergence.errors import InvalidParameterError, ShapeError


Scalar = Union[int, float, Fraction]


class ScalarMode(str, enum.Enum):
    """Arithmetic used for term values and sums."""

    FLOAT64 = "float64"
    EXACT_RATIONAL = "exact-rational"

    @property
    def is_exact(self) -> bool:
        return self is ScalarMode.EXACT_RATIONAL

    def convert(self, value: Union[Scalar, str]) -> Scalar:
        """
        Coerce a value into this mode's scalar type.

        Floats convert to their exact binary rational in exact mode; decimal
        strings convert to the exact decimal fraction. Strings such as "1/3"
        parse as rationals in both modes.
        """
        if self.is_exact:
            return value if isinstance(value, Fraction) else Fraction(value)
        if isinstance(value, str):
            return float(Fraction(value))
        return float(value)


def _is_exact(values: Iterable[Scalar]) -> bool:
    return all(isinstance(x, (int, Fraction)) for x in values)


def exact_or_fsum(values: Sequence[Scalar]) -> Scalar:
    """Exact sum for rationals, correctly-rounded float sum otherwise."""
    if _is_exact(values):
        return sum(values, Fraction(0))
    return math.fsum(float(x) for x in values)


class Vector:
    """
    Immutable vector, dense (R^d) or sparse (coordinate sequence).

    Sparse vectors never store explicit zeros, so equality is structural.
    Coordinates are 1-based in both representations.
    """

    __slots__ = ("_coords", "_entries")

    def __init__(self, coords: Optional[Tuple[Scalar, ...]] = None,
                 entries: Optional[Mapping[int, Scalar]] = None):
        if (coords is None) == (entries is None):
            raise ShapeError("Vector needs exactly one of coords or entries")
        if coords is not None:
            if len(coords) < 1:
                raise ShapeError("Dense vectors need dimension >= 1")
            self._coords = tuple(coords)
            self._entries = None
        else:
            clean = {}
            for index, value in entries.items():
                if index < 1:
                    raise ShapeError(f"Coordinate index must be >= 1, got {index}")
                if value != 0:
                    clean[int(index)] = value
            self._coords = None
            self._entries = MappingProxyType(dict(sorted(clean.items())))

    # Constructors

    @classmethod
    def dense(cls, coords: Iterable[Scalar]) -> "Vector":
        return cls(coords=tuple(coords))

    @classmethod
    def sparse(cls, entries: Mapping[int, Scalar]) -> "Vector":
        return cls(entries=entries)

    @classmethod
    def zero(cls, dim: Optional[int] = None, mode: ScalarMode = ScalarMode.FLOAT64) -> "Vector":
        if dim is None:
            return cls(entries={})
        return cls(coords=tuple(mode.convert(0) for _ in range(dim)))

    @classmethod
    def basis(cls, index: int, value: Scalar = 1) -> "Vector":
        """Sparse e_index scaled by value."""
        return cls(entries={index: value})

    # Introspection

    @property
    def is_dense(self) -> bool:
        return self._coords is not None

    @property
    def dim(self) -> Optional[int]:
        """Dense dimension, or None for the countable sparse ambient space."""
        return len(self._coords) if self._coords is not None else None

    @property
    def coords(self) -> Tuple[Scalar, ...]:
        if self._coords is None:
            raise ShapeError("Sparse vector has no dense coordinate tuple")
        return self._coords

    @property
    def entries(self) -> Mapping[int, Scalar]:
        """Nonzero entries keyed by 1-based index."""
        if self._entries is not None:
            return self._entries
        return MappingProxyType({j: x for j, x in enumerate(self._coords, start=1) if x != 0})

    def items(self) -> Iterator[Tuple[int, Scalar]]:
        return iter(self.entries.items())

    def support(self) -> List[int]:
        return list(self.entries.keys())

    def values(self) -> List[Scalar]:
        if self._coords is not None:
            return list(self._coords)
        return list(self._entries.values())

    def is_zero(self) -> bool:
        return not self.entries

    def max_index(self) -> int:
        if self._coords is not None:
            return len(self._coords)
        return max(self._entries.keys(), default=0)

    def __getitem__(self, index: int) -> Scalar:
        if self._coords is not None:
            if not 1 <= index <= len(self._coords):
                raise ShapeError(f"Index {index} outside dense dimension {len(self._coords)}")
            return self._coords[index - 1]
        return self._entries.get(index, 0)

    def to_numpy(self, dim: Optional[int] = None) -> np.ndarray:
        """Float copy of the coordinates, padded or checked against dim."""
        size = dim if dim is not None else self.max_index()
        if self._coords is not None and dim is not None and dim != len(self._coords):
            raise ShapeError(f"Dense dimension {len(self._coords)} != requested {dim}")
        out = np.zeros(size, dtype=float)
        for index, value in self.items():
            if index > size:
                raise ShapeError(f"Entry at index {index} exceeds requested dimension {size}")
            out[index - 1] = float(value)
        return out

    # Arithmetic

    def __add__(self, other: "Vector") -> "Vector":
        return combine([(1, self), (1, other)])

    def __sub__(self, other: "Vector") -> "Vector":
        return combine([(1, self), (-1, other)])

    def __neg__(self) -> "Vector":
        return combine([(-1, self)])

    def __mul__(self, c: Scalar) -> "Vector":
        return combine([(c, self)])

    __rmul__ = __mul__

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Vector):
            return NotImplemented
        if self.is_dense and other.is_dense and self.dim != other.dim:
            return False
        return dict(self.entries) == dict(other.entries)

    def __hash__(self) -> int:
        return hash(tuple(self.entries.items()))

    def __repr__(self) -> str:
        if self._coords is not None:
            return f"Vector.dense({list(self._coords)!r})"
        return f"Vector.sparse({dict(self._entries)!r})"


def norm(v: Vector, p: float = 2) -> Scalar:
    """
    ℓ^p norm of a vector.

    Args:
        v: Vector with finite support
        p: Exponent, p >= 1 or math.inf

    Returns:
        (Σ|v_i|^p)^(1/p), or max|v_i| for p = inf. Exact for rationals when
        p is 1 or inf.

    Raises:
        InvalidParameterError: If p < 1
    """
    if not (p >= 1):
        raise InvalidParameterError(f"Norm exponent must be >= 1, got {p}")
    values = [abs(x) for x in v.entries.values()]
    if not values:
        return 0
    if p == math.inf:
        return max(values)
    if p == 1:
        return exact_or_fsum(values)
    if p == 2:
        if _is_exact(values):
            return _exact_sqrt(sum((x * x for x in values), Fraction(0)))
        return math.hypot(*(float(x) for x in values))
    total = math.fsum(float(x) ** p for x in values)
    return total ** (1.0 / p)


def _exact_sqrt(q: Fraction) -> Scalar:
    """Exact square root when numerator and denominator are perfect squares."""
    num, den = math.isqrt(q.numerator), math.isqrt(q.denominator)
    if num * num == q.numerator and den * den == q.denominator:
        return Fraction(num, den)
    return math.sqrt(q)


def inner(u: Vector, v: Vector) -> Scalar:
    """
    Real inner product with index alignment between dense and sparse forms.

    Raises:
        ShapeError: On dense dimension mismatch, or a sparse entry outside
            the dense partner's dimension
    """
    _check_compatible([u, v])
    ue, ve = u.entries, v.entries
    if len(ue) > len(ve):
        ue, ve = ve, ue
    products = [x * ve[j] for j, x in ue.items() if j in ve]
    return exact_or_fsum(products) if products else 0


def combine(ops: Sequence[Tuple[Scalar, Vector]]) -> Vector:
    """
    Linear combination Σ c_i v_i.

    Rationals combine without rounding; floats combine per coordinate with a
    correctly-rounded sum of the products.
    """
    if not ops:
        return Vector.zero()
    vectors = [v for _, v in ops]
    _check_compatible(vectors)
    contributions: Dict[int, List[Scalar]] = {}
    for c, v in ops:
        if c == 0:
            continue
        for j, x in v.items():
            contributions.setdefault(j, []).append(c * x)
    merged = {j: exact_or_fsum(parts) for j, parts in contributions.items()}
    if all(v.is_dense for v in vectors):
        dim = vectors[0].dim
        exact = all(_is_exact(v.values()) for v in vectors) and _is_exact([c for c, _ in ops])
        zero = Fraction(0) if exact else 0.0
        return Vector.dense(merged.get(j, zero) for j in range(1, dim + 1))
    return Vector.sparse(merged)


def _check_compatible(vectors: Sequence[Vector]) -> None:
    dims = {v.dim for v in vectors if v.is_dense}
    if len(dims) > 1:
        raise ShapeError(f"Dense dimension mismatch: {sorted(dims)}")
    if dims:
        dim = dims.pop()
        for v in vectors:
            if not v.is_dense and v.max_index() > dim:
                raise ShapeError(f"Sparse entry at index {v.max_index()} outside dimension {dim}")
