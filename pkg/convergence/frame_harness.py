"""
Finite frames in R^d: bounds, analysis, thresholded synthesis.

Reconstruction always synthesizes with the canonical dual S^{-1}φ_n. The
Haar system at growing resolution stands in for an infinite expansion; a
real Fourier basis on the same grid is the conditional-basis contrast.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pywt

from convergence import io_utils
from convergence.errors import InvalidParameterError, InvalidRuleError, NotAFrameError, ShapeError
from convergence.workspace import Vector

logger = logging.getLogger(__name__)

TIGHT_TOL = 1e-10
RANK_TOL = 1e-12
BOUNDEDNESS_NOTE = (
    "For every multiplier sequence bounded by 1 the reconstruction satisfies "
    "‖f̃‖ <= (B/A)·‖f‖. This is the finite-M form of unconditional convergence: "
    "bounded multipliers cannot make a frame expansion diverge."
)


def frame_bounds(vectors) -> Tuple[float, float]:
    """
    Optimal frame bounds (A, B): extreme eigenvalues of S = Σ φ_n φ_nᵀ.

    Raises:
        NotAFrameError: If fewer than d vectors or the family does not span R^d
    """
    phi = np.asarray(vectors, dtype=float)
    if phi.ndim != 2 or phi.shape[1] < 1:
        raise ShapeError(f"Frame vectors must form an (M, d) array, got shape {phi.shape}")
    M, d = phi.shape
    if M < d:
        raise NotAFrameError(f"{M} vectors cannot span R^{d}")
    eigenvalues = np.linalg.eigvalsh(phi.T @ phi)
    A, B = float(eigenvalues[0]), float(eigenvalues[-1])
    if B <= 0 or A <= RANK_TOL * B:
        raise NotAFrameError(f"Family is rank deficient in R^{d} (smallest eigenvalue {A:.3e})")
    return A, B


@dataclass(frozen=True)
class Frame:
    vectors: np.ndarray
    lower: float
    upper: float
    dual: np.ndarray
    name: str = "custom"

    @classmethod
    def from_vectors(cls, vectors, name: str = "custom") -> "Frame":
        phi = np.array(vectors, dtype=float)
        A, B = frame_bounds(phi)
        dual = np.linalg.solve(phi.T @ phi, phi.T).T
        phi.setflags(write=False)
        dual.setflags(write=False)
        return cls(phi, A, B, dual, name)

    @property
    def M(self) -> int:
        return self.vectors.shape[0]

    @property
    def d(self) -> int:
        return self.vectors.shape[1]

    @property
    def is_tight(self) -> bool:
        return abs(self.upper - self.lower) <= TIGHT_TOL * max(1.0, self.upper)

    def to_dict(self) -> dict:
        return {"name": self.name, "M": self.M, "d": self.d, "A": self.lower, "B": self.upper,
                "tight": self.is_tight}


def _signal(frame: Frame, f) -> np.ndarray:
    x = np.asarray(f.to_numpy(frame.d) if isinstance(f, Vector) else f, dtype=float)
    if x.shape != (frame.d,):
        raise ShapeError(f"Signal has shape {x.shape}, frame lives in R^{frame.d}")
    return x


def analyze(frame: Frame, f) -> np.ndarray:
    """Coefficients c_n = ⟨f, φ_n⟩."""
    return frame.vectors @ _signal(frame, f)


def synthesize(vectors: np.ndarray, c: np.ndarray) -> np.ndarray:
    return np.asarray(c, dtype=float) @ np.asarray(vectors, dtype=float)


MASK_KINDS = ("mask", "signed-mask")


@dataclass(frozen=True)
class ThresholdRule:
    """
    Hard (keep |c| > τ), Soft (shrink by τ), an explicit mask λ ∈ [0,1]^M,
    or a signed mask λ ∈ [-1,1]^M.
    """

    kind: str
    tau: float = 0.0
    mask: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("hard", "soft") + MASK_KINDS:
            raise InvalidRuleError(f"Unknown threshold rule {self.kind!r}")
        if self.kind in ("hard", "soft") and not self.tau >= 0:
            raise InvalidRuleError(f"Threshold must be >= 0, got {self.tau}")
        low = self.lowest_multiplier
        if self.kind in MASK_KINDS and any(not low <= x <= 1.0 for x in self.mask):
            raise InvalidRuleError(f"Mask entries must lie in [{low:g}, 1]")

    @property
    def lowest_multiplier(self) -> float:
        return -1.0 if self.kind == "signed-mask" else 0.0

    @classmethod
    def hard(cls, tau: float) -> "ThresholdRule":
        return cls("hard", tau=tau)

    @classmethod
    def soft(cls, tau: float) -> "ThresholdRule":
        return cls("soft", tau=tau)

    @classmethod
    def from_mask(cls, mask: Sequence[float], signed: bool = False) -> "ThresholdRule":
        return cls("signed-mask" if signed else "mask", mask=tuple(float(x) for x in mask))

    def multipliers(self, c: np.ndarray) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        if self.kind == "hard":
            # pywt keeps |c| >= value; one ulp above τ keeps exactly |c| > τ
            kept = pywt.threshold(np.abs(c), float(np.nextafter(self.tau, np.inf)), mode="hard")
            return (kept > 0).astype(float)
        if self.kind == "soft":
            shrunk = pywt.threshold(c, self.tau, mode="soft")
            return np.divide(shrunk, c, out=np.zeros_like(c), where=c != 0)
        if len(self.mask) != len(c):
            raise InvalidRuleError(f"Mask has {len(self.mask)} entries for {len(c)} coefficients")
        return np.asarray(self.mask, dtype=float)

    def to_dict(self) -> dict:
        if self.kind in MASK_KINDS:
            return {"kind": self.kind, "mask": list(self.mask)}
        return {"kind": self.kind, "tau": self.tau}


@dataclass
class Reconstruction:
    signal: np.ndarray
    multipliers: np.ndarray
    error_norm: float
    dropped_norm: float
    bound: float

    def to_dict(self) -> dict:
        return {
            "signal": self.signal.tolist(),
            "errorNorm": self.error_norm,
            "droppedNorm": self.dropped_norm,
            "bound": self.bound,
            "kept": int(np.count_nonzero(self.multipliers)),
        }


def reconstruct(frame: Frame, c, rule: ThresholdRule, f=None) -> Reconstruction:
    """
    f̃ = Σ λ_n c_n φ̃_n with λ from the rule.

    errorNorm is ‖f − f̃‖₂ when f is given, else the norm of the dropped
    part Σ (1 − λ_n) c_n φ̃_n. The dropped part always satisfies
    ‖Σ (1 − λ_n) c_n φ̃_n‖ <= (1/A)·‖Σ (1 − λ_n) c_n φ_n‖; a violation raises.

    Raises:
        ShapeError: If len(c) != M
        InvalidRuleError: If a multiplier leaves [0, 1], or [-1, 1] for a signed mask
    """
    c = np.asarray(c, dtype=float)
    if c.shape != (frame.M,):
        raise ShapeError(f"Expected {frame.M} coefficients, got shape {c.shape}")
    lam = rule.multipliers(c)
    low = rule.lowest_multiplier
    if np.any(lam < low) or np.any(lam > 1):
        raise InvalidRuleError(f"Multipliers must lie in [{low:g}, 1]")
    kept = lam * c
    dropped = (1.0 - lam) * c
    signal = synthesize(frame.dual, kept)
    dropped_norm = float(np.linalg.norm(synthesize(frame.dual, dropped)))
    bound = float(np.linalg.norm(synthesize(frame.vectors, dropped))) / frame.lower
    if dropped_norm > bound * (1 + 1e-9) + 1e-12:
        raise AssertionError(f"Dropped-part norm {dropped_norm:.6g} exceeds (1/A)-bound {bound:.6g}")
    error = float(np.linalg.norm(_signal(frame, f) - signal)) if f is not None else dropped_norm
    return Reconstruction(signal, lam, error, dropped_norm, bound)


# Built-in frames

def orthonormal(d: int) -> Frame:
    return Frame.from_vectors(np.eye(d), f"orthonormal-{d}")


def mercedes_benz() -> Frame:
    """Three unit vectors in R² at 120° spacing; tight with A = B = 3/2."""
    angles = np.pi / 2 + 2 * np.pi * np.arange(3) / 3
    return Frame.from_vectors(np.column_stack([np.cos(angles), np.sin(angles)]), "mercedes-benz")


def rotated_bases_union(d: int, count: int, seed: int) -> Frame:
    """Union of `count` random orthonormal bases; tight with A = B = count."""
    if count < 1:
        raise InvalidParameterError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)
    bases = []
    for _ in range(count):
        q, r = np.linalg.qr(rng.normal(size=(d, d)))
        bases.append((q * np.sign(np.diag(r))).T)
    return Frame.from_vectors(np.vstack(bases), f"rotated-bases-{count}x{d}")


def random_unit_frame(d: int, M: int, seed: int) -> Frame:
    """M seeded random unit vectors in R^d (generally not tight)."""
    rng = np.random.default_rng(seed)
    phi = rng.normal(size=(M, d))
    phi /= np.linalg.norm(phi, axis=1, keepdims=True)
    return Frame.from_vectors(phi, f"random-unit-{M}x{d}")


def haar_system(k: int) -> Frame:
    """
    Orthonormal Haar basis on 2^k points: the constant vector, then wavelets
    ordered coarse to fine.
    """
    if k < 0:
        raise InvalidParameterError(f"Haar level must be >= 0, got {k}")
    n = 1 << k
    rows = [np.full(n, 1.0 / math.sqrt(n))]
    for level in range(k):
        width = n >> level
        half = width // 2
        for shift in range(1 << level):
            row = np.zeros(n)
            row[shift * width: shift * width + half] = 1.0
            row[shift * width + half: (shift + 1) * width] = -1.0
            rows.append(row / math.sqrt(width))
    return Frame.from_vectors(np.vstack(rows), f"haar-{k}")


def fourier_system(k: int) -> Frame:
    """
    Real orthonormal Fourier basis on 2^k points, ordered by frequency:
    the constant, then √2·cos and √2·sin for each frequency, then the
    alternating Nyquist vector.
    """
    if k < 0:
        raise InvalidParameterError(f"Fourier level must be >= 0, got {k}")
    n = 1 << k
    waves = np.fft.fft(np.eye(n), norm="ortho")
    rows = [waves[0].real]
    for m in range(1, (n + 1) // 2):
        rows.append(math.sqrt(2.0) * waves[m].real)
        rows.append(math.sqrt(2.0) * waves[m].imag)
    if n > 1:
        rows.append(waves[n // 2].real)
    return Frame.from_vectors(np.vstack(rows), f"fourier-{k}")


def frame_from_file(path) -> Frame:
    return Frame.from_vectors(np.asarray(io_utils.read_frame_file(path)), f"file:{path}")


# Sweeps

@dataclass
class SweepResult:
    taus: List[float]
    errors: np.ndarray
    monotone: bool
    frame: dict
    rule: str
    boundedness_ratio: float = 0.0
    shadow_bound: float = 1.0

    def to_dict(self) -> dict:
        return {
            "frame": self.frame,
            "rule": self.rule,
            "taus": self.taus,
            "monotone": self.monotone,
            "meanError": self.errors.mean(axis=0).tolist(),
            "maxError": self.errors.max(axis=0).tolist(),
            "boundednessRatio": self.boundedness_ratio,
            "shadowBound": self.shadow_bound,
            "boundednessNote": BOUNDEDNESS_NOTE,
        }

    def rows(self) -> List[Tuple[float, float, float]]:
        return [(t, float(m), float(x)) for t, m, x in zip(self.taus, self.errors.mean(axis=0),
                                                          self.errors.max(axis=0))]


def threshold_sweep(frame: Frame, signals: np.ndarray, taus: Sequence[float], kind: str = "hard") -> SweepResult:
    """
    errorNorm of thresholded reconstruction for every signal and τ.

    monotone reports whether every row is non-decreasing in τ (up to 1e-12
    relative slack); it is measured, not assumed. boundedness_ratio is the
    largest ‖f̃‖/‖f‖ seen, to be read against shadow_bound = B/A.
    """
    taus = sorted(float(t) for t in taus)
    signals = np.atleast_2d(np.asarray(signals, dtype=float))
    errors = np.zeros((len(signals), len(taus)))
    ratio = 0.0
    for i, f in enumerate(signals):
        c = analyze(frame, f)
        size = float(np.linalg.norm(f))
        for j, tau in enumerate(taus):
            result = reconstruct(frame, c, ThresholdRule(kind, tau=tau), f)
            errors[i, j] = result.error_norm
            if size > 0:
                ratio = max(ratio, float(np.linalg.norm(result.signal)) / size)
    scale = 1e-12 * max(1.0, float(np.max(np.linalg.norm(signals, axis=1))))
    monotone = bool(np.all(np.diff(errors, axis=1) >= -scale))
    if not monotone:
        logger.warning(f"threshold_sweep on {frame.name}: error not monotone in τ")
    shadow = frame.upper / frame.lower
    if ratio > shadow * (1 + 1e-12):
        logger.warning(f"threshold_sweep on {frame.name}: ‖f̃‖/‖f‖ = {ratio:.6g} exceeds B/A = {shadow:.6g}")
    return SweepResult(taus, errors, monotone, frame.to_dict(), kind, ratio, shadow)


SIGNALS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "step": lambda t: np.where(t < 1 / 3, 1.0, -0.5),
    "ramp": lambda t: t,
    "sine": lambda t: np.sin(2 * np.pi * t),
    "bump": lambda t: np.exp(-((t - 0.5) ** 2) / 0.01),
}


@dataclass
class HaarLevel:
    level: int
    points: int
    energy: float
    tail_energy: float
    error_norm: float
    kept: int

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "points": self.points,
            "energy": self.energy,
            "tailEnergy": self.tail_energy,
            "errorNorm": self.error_norm,
            "kept": self.kept,
        }


def haar_tail_report(fn: Callable[[np.ndarray], np.ndarray], levels: Sequence[int],
                     rule: ThresholdRule) -> List[HaarLevel]:
    """
    Haar expansion of fn sampled at 2^k midpoints of [0, 1), for each level k.

    Samples are scaled by 2^(-k/2) so the energy approximates ∫ f². tail_energy
    is the energy carried by the finest wavelet level, the part a truncated
    expansion would drop.
    """
    report = []
    for k in levels:
        frame = haar_system(k)
        n = 1 << k
        t = (np.arange(n) + 0.5) / n
        f = np.asarray(fn(t), dtype=float) / math.sqrt(n)
        c = analyze(frame, f)
        finest = c[n // 2:] if k > 0 else np.zeros(0)
        result = reconstruct(frame, c, rule, f)
        report.append(HaarLevel(k, n, float(np.dot(c, c)), float(np.dot(finest, finest)),
                                result.error_norm, int(np.count_nonzero(result.multipliers))))
    return report


@dataclass
class BasisContrast:
    level: int
    points: int
    keep: int
    haar_error: float
    fourier_error: float

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "points": self.points,
            "keep": self.keep,
            "haarError": self.haar_error,
            "fourierError": self.fourier_error,
        }


def best_terms_error(frame: Frame, f, keep: int) -> float:
    """‖f − f̃‖ when only the `keep` largest coefficients survive."""
    c = analyze(frame, f)
    mask = np.zeros(frame.M)
    mask[np.argsort(-np.abs(c), kind="stable")[:max(0, keep)]] = 1.0
    return reconstruct(frame, c, ThresholdRule.from_mask(mask), f).error_norm


def basis_contrast(fn: Callable[[np.ndarray], np.ndarray], levels: Sequence[int],
                   keep: Optional[int] = None) -> List[BasisContrast]:
    """
    Best-m-term error of the Haar and Fourier expansions of fn on 2^k points.

    keep defaults to k + 1, the number of Haar coefficients a single jump
    discontinuity touches. On a step signal the Haar error vanishes while
    the Fourier error stays bounded away from zero.
    """
    report = []
    for k in levels:
        n = 1 << k
        t = (np.arange(n) + 0.5) / n
        f = np.asarray(fn(t), dtype=float) / math.sqrt(n)
        m = k + 1 if keep is None else keep
        report.append(BasisContrast(k, n, m, best_terms_error(haar_system(k), f, m),
                                    best_terms_error(fourier_system(k), f, m)))
        logger.debug(f"basis_contrast level {k}: haar {report[-1].haar_error:.3e}, "
                     f"fourier {report[-1].fourier_error:.3e}")
    return report
