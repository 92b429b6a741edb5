"""Harrell's concordance index and log-scale MSE for censored data."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import DomainError, UndefinedMetricError


@dataclass(frozen=True)
class MetricReport:
    c_index: float
    mse_log: float
    n_comparable_pairs: int
    n_uncensored: int

    def to_dict(self) -> dict:
        return asdict(self)


def _inputs(times, events, predicted_times):
    t = np.asarray(times, dtype=float)
    e = np.asarray(events, dtype=bool)
    p = np.asarray(predicted_times, dtype=float)
    if not (t.ndim == 1 and t.shape == e.shape == p.shape):
        raise DomainError("times, events and predictions must be equal-length vectors")
    return t, e, p


def concordance_counts(times, events, predicted_times) -> tuple[float, int]:
    """(concordant score, comparable pairs).

    Pair (i, j) is comparable when ``T_i < T_j`` and ``delta_i = 1``; it scores
    1 if ``pred_i < pred_j`` and 0.5 on a prediction tie. Pairs with equal
    observed times are skipped.
    """
    t, e, p = _inputs(times, events, predicted_times)
    order = np.argsort(t, kind="stable")
    t, e, p = t[order], e[order], p[order]
    conc = 0
    ties = 0
    comparable = 0
    # row-blocked O(n^2) keeps memory bounded for a few thousand records
    for start in range(0, len(t), 512):
        sl = slice(start, start + 512)
        ti, ei, pi = t[sl, None], e[sl, None], p[sl, None]
        comp = (ti < t[None, :]) & ei
        comparable += int(comp.sum())
        conc += int((comp & (pi < p[None, :])).sum())
        ties += int((comp & (pi == p[None, :])).sum())
    return conc + 0.5 * ties, comparable


def c_index(times, events, predicted_times) -> float:
    score, comparable = concordance_counts(times, events, predicted_times)
    if comparable == 0:
        raise UndefinedMetricError("no comparable pairs")
    return score / comparable


def mse_log(times, events, predicted_times) -> float:
    """Mean of (log T - log T_hat)^2 over uncensored records."""
    t, e, p = _inputs(times, events, predicted_times)
    if not e.any():
        raise UndefinedMetricError("mse_log needs at least one uncensored record")
    if np.any(p[e] <= 0):
        raise DomainError("predicted times must be positive")
    return float(np.mean((np.log(t[e]) - np.log(p[e])) ** 2))


def metric_report(times, events, predicted_times) -> MetricReport:
    score, comparable = concordance_counts(times, events, predicted_times)
    if comparable == 0:
        raise UndefinedMetricError("no comparable pairs")
    return MetricReport(
        c_index=score / comparable,
        mse_log=mse_log(times, events, predicted_times),
        n_comparable_pairs=comparable,
        n_uncensored=int(np.asarray(events, dtype=bool).sum()),
    )
