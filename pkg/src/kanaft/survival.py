"""Kaplan-Meier curves and the step-function integrals built on them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, UnsupportedTailError


@dataclass(frozen=True)
class KaplanMeierCurve:
    """Right-continuous product-limit step function.

    ``survival_probs[j]`` is S(t) for ``jump_times[j] <= t < jump_times[j+1]``;
    S is 1 before the first jump. ``max_time`` is the largest observed time
    (event or not) and receives the leftover tail mass.
    """

    jump_times: np.ndarray
    survival_probs: np.ndarray
    n_at_risk: np.ndarray
    n_events: np.ndarray
    max_time: float

    @property
    def masses(self) -> np.ndarray:
        """Probability mass at each jump."""
        before = np.concatenate([[1.0], self.survival_probs[:-1]])
        return before - self.survival_probs

    @property
    def tail_mass(self) -> float:
        return float(self.survival_probs[-1]) if len(self.survival_probs) else 1.0


def _validate(times, events):
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=bool)
    if times.ndim != 1 or times.shape != events.shape:
        raise DomainError("times and events must be 1-d arrays of equal length")
    if times.size == 0:
        raise DomainError("empty input")
    if not np.all(np.isfinite(times)) or np.any(times <= 0):
        raise DomainError("times must be finite and strictly positive")
    return times, events


def kaplan_meier(times, events) -> KaplanMeierCurve:
    """Product-limit estimator. At tied times events are counted while the
    censored records are still at risk (events first)."""
    times, events = _validate(times, events)
    uniq, inverse = np.unique(times, return_inverse=True)
    d = np.bincount(inverse, weights=events, minlength=len(uniq))
    counts = np.bincount(inverse, minlength=len(uniq))
    at_risk = counts[::-1].cumsum()[::-1]
    has_event = d > 0
    d, at_risk = d[has_event], at_risk[has_event]
    surv = np.cumprod(1.0 - d / at_risk)
    return KaplanMeierCurve(
        jump_times=uniq[has_event],
        survival_probs=surv,
        n_at_risk=at_risk.astype(int),
        n_events=d.astype(int),
        max_time=float(times.max()),
    )


def censoring_km(times, events) -> KaplanMeierCurve:
    """KM of the censoring distribution, G(t) = P(C > t)."""
    times, events = _validate(times, events)
    return kaplan_meier(times, ~events)


def km_eval(curve: KaplanMeierCurve, t, side: str = "right"):
    """S(t) (``side='right'``) or S(t-) (``side='left'``); vectorized in ``t``."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or np.any(np.isnan(t_arr)):
        raise DomainError("evaluation time must be non-negative")
    if side not in ("right", "left"):
        raise DomainError(f"side must be 'right' or 'left', not {side!r}")
    idx = np.searchsorted(curve.jump_times, t_arr, side=side)
    vals = np.concatenate([[1.0], curve.survival_probs])[idx]
    return float(vals) if np.ndim(vals) == 0 else vals


def conditional_residual_expectations(curve: KaplanMeierCurve, t0) -> np.ndarray:
    """Vectorized E(X | X > t0) under the KM distribution.

    Tail mass left when the curve does not reach 0 is placed at
    ``curve.max_time``. Where no jump exceeds ``t0`` (or S(t0) = 0) the result
    is ``t0`` itself.
    """
    t0 = np.asarray(t0, dtype=float)
    if np.any(t0 < 0):
        raise DomainError("t0 must be non-negative")
    jt = curve.jump_times
    if len(jt) == 0:
        return t0.copy()
    weighted = jt * curve.masses
    # suffix[j] = sum_{i >= j} t_i * mass_i
    suffix = np.concatenate([np.cumsum(weighted[::-1])[::-1], [0.0]])
    first_above = np.searchsorted(jt, t0, side="right")
    surv = np.concatenate([[1.0], curve.survival_probs])[first_above]
    num = suffix[first_above] + curve.tail_mass * curve.max_time
    degenerate = (first_above >= len(jt)) | (surv <= 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(degenerate, t0, num / np.where(degenerate, 1.0, surv))
    return out


def conditional_residual_expectation(curve: KaplanMeierCurve, t0: float) -> float:
    return float(conditional_residual_expectations(curve, float(t0)))


def inverse_G_integrals(G_curve: KaplanMeierCurve, T) -> np.ndarray:
    """Exact integral of 1/G(u-) over [0, T] for each T (vectorized)."""
    T = np.asarray(T, dtype=float)
    if np.any(T < 0):
        raise DomainError("upper limit must be non-negative")
    # segment m spans [edges[m], edges[m+1]) with level levels[m]
    edges = np.concatenate([[0.0], G_curve.jump_times])
    levels = np.concatenate([[1.0], G_curve.survival_probs])
    first_zero = np.flatnonzero(levels <= 0)
    if first_zero.size:
        limit = edges[first_zero[0]]
        if np.any(T > limit):
            raise UnsupportedTailError(
                f"censoring survival reaches 0 at t={limit}, before the requested upper limit"
            )
    inv = np.divide(1.0, levels, out=np.zeros_like(levels), where=levels > 0)
    seg = np.diff(edges) * inv[:-1]
    cum = np.concatenate([[0.0], np.cumsum(seg)])  # integral up to edges[m]
    m = np.searchsorted(edges, T, side="right") - 1
    return cum[m] + (T - edges[m]) * inv[m]


def inverse_G_integral(G_curve: KaplanMeierCurve, T: float) -> float:
    return float(inverse_G_integrals(G_curve, float(T)))
