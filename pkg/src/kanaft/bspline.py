"""Uniform knot grids and B-spline evaluation.

Knot layout: ``G`` uniform intervals on ``[lo, hi]`` plus ``k`` knots on each
side that continue the same spacing, so there are ``G + 2k + 1`` knots and
``G + k`` basis functions. Points outside ``[lo, hi]`` are evaluated on the
extension knots without error; beyond the outermost knots every basis is 0.

The array functions (:func:`basis_matrix`, :func:`basis_deriv_matrix`) accept
knot arrays with leading batch axes so the network can evaluate one grid per
edge in a single call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, UnsupportedDegreeError

DEFAULT_GRID = 5
DEFAULT_DEGREE = 3


@dataclass(frozen=True)
class KnotVector:
    knots: np.ndarray
    degree: int
    intervals: int
    lo: float
    hi: float

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        knots.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        if len(knots) != self.intervals + 2 * self.degree + 1:
            raise DomainError("knot count must equal G + 2k + 1")
        if np.any(np.diff(knots) < 0):
            raise DomainError("knots must be non-decreasing")
        if not self.lo < self.hi:
            raise DomainError("need lo < hi")

    @property
    def n_basis(self) -> int:
        return self.intervals + self.degree

    def greville(self) -> np.ndarray:
        """Greville abscissae; as coefficients they reproduce ``f(x) = x``."""
        k = self.degree
        if k == 0:
            return 0.5 * (self.knots[:-1] + self.knots[1:])
        windows = np.lib.stride_tricks.sliding_window_view(self.knots[1:-1], k)
        return windows.mean(axis=1)


@dataclass(frozen=True)
class SplineFunction:
    knotvec: KnotVector
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float)
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)
        if c.shape != (self.knotvec.n_basis,):
            raise DomainError(
                f"expected {self.knotvec.n_basis} coefficients, got {c.shape}"
            )
        if not np.all(np.isfinite(c)):
            raise DomainError("spline coefficients must be finite")


def make_grid(lo: float, hi: float, G: int = DEFAULT_GRID, k: int = DEFAULT_DEGREE) -> KnotVector:
    """Uniform grid on ``[lo, hi]`` with ``k`` extension knots per side."""
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo >= hi:
        raise DomainError(f"invalid grid domain [{lo}, {hi}]")
    if int(G) < 1:
        raise DomainError("G must be a positive integer")
    if int(k) < 0:
        raise DomainError("degree must be non-negative")
    G, k = int(G), int(k)
    h = (hi - lo) / G
    knots = lo + h * np.arange(-k, G + k + 1, dtype=float)
    # pin the domain ends so lo/hi are represented exactly
    knots[k] = lo
    knots[k + G] = hi
    return KnotVector(knots, k, G, float(lo), float(hi))


def grid_domain(x: np.ndarray, margin: float = 0.01) -> tuple[float, float]:
    """``[min - margin*range, max + margin*range]`` of a data column."""
    x = np.asarray(x, dtype=float)
    lo, hi = float(np.min(x)), float(np.max(x))
    width = hi - lo
    if width <= 0:
        width = max(abs(lo), 1.0)
    return lo - margin * width, hi + margin * width


def _safe_div(num, den):
    out = np.zeros(np.broadcast_shapes(np.shape(num), np.shape(den)))
    np.divide(num, den, out=out, where=den != 0)
    return out


def basis_matrix(x, knots, k: int) -> np.ndarray:
    """Cox-de Boor recurrence, vectorized.

    ``x`` has shape ``S`` and ``knots`` shape ``S' + (m,)`` with ``S`` and
    ``S'`` broadcastable; the result has shape ``broadcast(S, S') + (m-k-1,)``.
    Degree-0 indicators are half-open ``[t_j, t_{j+1})`` except that the last
    knot is assigned to the last non-degenerate interval.
    """
    x = np.asarray(x, dtype=float)[..., None]
    t = np.asarray(knots, dtype=float)
    left, right = t[..., :-1], t[..., 1:]
    B = ((x >= left) & (x < right)).astype(float)
    at_end = x == t[..., -1:]
    if np.any(at_end):
        nonempty = right > left
        last = nonempty.shape[-1] - 1 - np.argmax(nonempty[..., ::-1], axis=-1)
        onehot = np.arange(nonempty.shape[-1]) == last[..., None]
        B = np.where(at_end & onehot, 1.0, B)
    for d in range(1, k + 1):
        t_lo = t[..., : -d - 1]
        t_hi = t[..., d + 1 :]
        w_left = _safe_div(x - t_lo, t[..., d:-1] - t_lo)
        w_right = _safe_div(t_hi - x, t_hi - t[..., 1:-d])
        B = w_left * B[..., :-1] + w_right * B[..., 1:]
    return B


def basis_deriv_matrix(x, knots, k: int) -> np.ndarray:
    """First derivative of every degree-``k`` basis function at ``x``."""
    if k < 1:
        raise UnsupportedDegreeError("derivative needs degree >= 1")
    t = np.asarray(knots, dtype=float)
    lower = basis_matrix(x, t, k - 1)
    a = _safe_div(k, t[..., k:-1] - t[..., :-k - 1])
    b = _safe_div(k, t[..., k + 1 :] - t[..., 1:-k])
    return a * lower[..., :-1] - b * lower[..., 1:]


def _check_point(x) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"non-finite evaluation point {x}")
    return x


def basis_all(kv: KnotVector, x: float) -> np.ndarray:
    """All ``G + k`` basis values at a single point."""
    return basis_matrix(_check_point(x), kv.knots, kv.degree)


def spline_eval(f: SplineFunction, x: float) -> float:
    return float(basis_all(f.knotvec, x) @ f.coefficients)


def spline_deriv_x(f: SplineFunction, x: float) -> float:
    """d/dx of the spline, via differences of degree ``k-1`` bases."""
    kv = f.knotvec
    if kv.degree < 1:
        raise UnsupportedDegreeError("derivative needs degree >= 1")
    x = _check_point(x)
    return float(basis_deriv_matrix(x, kv.knots, kv.degree) @ f.coefficients)
