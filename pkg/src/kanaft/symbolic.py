"""Closed-form fits of learned edge activations.

Each edge is probed on a uniform grid and matched against a fixed library of
univariate functions in the affine form ``c * f(a * x + b) + d``: ``(a, b)``
by grid search plus coordinate refinement, ``(c, d)`` by least squares, and
the winner chosen by R^2 with a small tie band resolved toward simpler
functions.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import DomainError, UnsupportedShapeError
from .network import EdgeActivation

N_PROBE = 200
TIE_BAND = 0.005
A_MAGNITUDES = np.geomspace(0.25, 4.0, 41)
A_GRID = np.concatenate([-A_MAGNITUDES[::-1], A_MAGNITUDES])
B_GRID = np.linspace(-5.0, 5.0, 41)
CONSTANT_TOL = 1e-12


@dataclass(frozen=True)
class CandidateFunction:
    name: str
    evaluate: Callable[[np.ndarray], np.ndarray]
    complexity_rank: int
    # printf-style template taking the inner expression
    template: str

    def __call__(self, u):
        """Values of ``f(u)``; NaN marks a domain violation."""
        with np.errstate(all="ignore"):
            out = self.evaluate(np.asarray(u, dtype=float))
        return np.where(np.isfinite(out), out, np.nan)


def _guard(fn, ok):
    def wrapped(u):
        good = ok(u)
        safe = np.where(good, u, 1.0)
        return np.where(good, fn(safe), np.nan)

    return wrapped


def _exp(u):
    return np.exp(np.minimum(u, 700.0)) * np.where(u > 700.0, np.nan, 1.0)


_LIBRARY = (
    CandidateFunction("x", lambda u: u, 0, "{}"),
    CandidateFunction("x^2", lambda u: u**2, 1, "({})**2"),
    CandidateFunction("x^3", lambda u: u**3, 2, "({})**3"),
    CandidateFunction("sqrt", _guard(np.sqrt, lambda u: u >= 0), 2, "sqrt({})"),
    CandidateFunction("exp", _exp, 3, "exp({})"),
    CandidateFunction("log", _guard(np.log, lambda u: u > 0), 3, "log({})"),
    CandidateFunction("sin", np.sin, 4, "sin({})"),
    CandidateFunction("cos", np.cos, 4, "cos({})"),
    CandidateFunction("tanh", np.tanh, 4, "tanh({})"),
    CandidateFunction("1/x", _guard(lambda u: 1.0 / u, lambda u: u != 0), 5, "1/({})"),
    CandidateFunction("abs", np.abs, 6, "abs({})"),
)


def candidate_library() -> tuple[CandidateFunction, ...]:
    return _LIBRARY


def _by_name(name: str) -> CandidateFunction:
    for cand in _LIBRARY:
        if cand.name == name:
            return cand
    raise KeyError(name)


@dataclass(frozen=True)
class SymbolicFit:
    function_name: str
    a: float
    b: float
    c: float
    d: float
    r_squared: float
    constant: bool = False

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.c * _by_name(self.function_name)(self.a * x + self.b) + self.d

    def unstandardize(self, mean: float, scale: float) -> SymbolicFit:
        """Same curve expressed in raw units, where ``x_std = (x - mean) / scale``."""
        a = self.a / scale
        return SymbolicFit(
            self.function_name, a, self.b - a * mean, self.c, self.d, self.r_squared, self.constant
        )

    @property
    def is_linear(self) -> bool:
        return self.function_name == "x"

    def slope(self) -> float:
        """Linear coefficient (identity fits only)."""
        return self.c * self.a

    def to_dict(self) -> dict:
        return asdict(self)


def _r2_for_grid(F: np.ndarray, y: np.ndarray) -> np.ndarray:
    """R^2 of the best affine map F -> y along the last axis (NaN rows -> -inf)."""
    fm = F.mean(axis=-1, keepdims=True)
    Fc = F - fm
    yc = y - y.mean()
    sff = np.einsum("...i,...i->...", Fc, Fc)
    sfy = Fc @ yc
    syy = yc @ yc
    with np.errstate(all="ignore"):
        r2 = sfy**2 / (sff * syy)
    bad = ~np.isfinite(r2) | (sff <= 1e-14 * np.maximum(1.0, np.abs(fm[..., 0]) ** 2) * F.shape[-1])
    return np.where(bad, -np.inf, r2)


def _affine_out(f_vals, y):
    fc = f_vals - f_vals.mean()
    c = float(fc @ (y - y.mean()) / (fc @ fc))
    d = float(y.mean() - c * f_vals.mean())
    return c, d


def _score(cand, a, b, x, y) -> float:
    return float(_r2_for_grid(cand(a * x + b)[None, :], y)[0])


def _refine(cand, a, b, x, y, best, rounds: int = 60):
    step_a, step_b = 0.05 * max(abs(a), 0.25), 0.125
    for _ in range(rounds):
        improved = False
        for da, db in ((step_a, 0), (-step_a, 0), (0, step_b), (0, -step_b)):
            s = _score(cand, a + da, b + db, x, y)
            if s > best + 1e-15:
                a, b, best, improved = a + da, b + db, s, True
        if not improved:
            step_a *= 0.5
            step_b *= 0.5
            if step_a < 1e-7 and step_b < 1e-7:
                break
    return a, b, best


def fit_candidate(cand: CandidateFunction, x, y) -> SymbolicFit:
    """Best ``c * f(a x + b) + d`` for one candidate on probe data."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if cand.name == "x":
        c, d = _affine_out(x, y)
        return SymbolicFit("x", 1.0, 0.0, c, d, _score(cand, 1.0, 0.0, x, y))
    U = A_GRID[:, None, None] * x[None, None, :] + B_GRID[None, :, None]
    F = cand(U)
    r2 = _r2_for_grid(F, y)
    if not np.isfinite(r2).any():
        return SymbolicFit(cand.name, 1.0, 0.0, 0.0, float(y.mean()), -math.inf)
    ia, ib = np.unravel_index(np.argmax(r2), r2.shape)
    a, b, best = _refine(cand, A_GRID[ia], B_GRID[ib], x, y, r2[ia, ib])
    c, d = _affine_out(cand(a * x + b), y)
    return SymbolicFit(cand.name, float(a), float(b), c, d, best)


def fit_symbolic_samples(x, y, library=None) -> SymbolicFit:
    library = candidate_library() if library is None else library
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.ptp(y) <= CONSTANT_TOL * max(1.0, float(np.max(np.abs(y)))):
        return SymbolicFit("x", 1.0, 0.0, 0.0, float(y.mean()), 1.0, constant=True)
    fits = [fit_candidate(cand, x, y) for cand in library]
    top = max(f.r_squared for f in fits)
    # earliest, lowest-rank candidate inside the tie band
    ranked = sorted(
        (i for i, f in enumerate(fits) if f.r_squared >= top - TIE_BAND),
        key=lambda i: (library[i].complexity_rank, i),
    )
    return fits[ranked[0]]


def fit_symbolic_edge(edge: EdgeActivation, domain, library=None) -> SymbolicFit:
    """Fit the edge's activation on ``N_PROBE`` uniform points of ``domain``."""
    lo, hi = float(domain[0]), float(domain[1])
    if not lo < hi:
        raise DomainError("probe domain needs lo < hi")
    x = np.linspace(lo, hi, N_PROBE)
    return fit_symbolic_samples(x, edge(x), library)


def _fmt(v: float) -> str:
    return f"{v:.4f}"


def _signed(v: float, first: bool) -> str:
    if first:
        return _fmt(v)
    return f"- {_fmt(-v)}" if v < 0 else f"+ {_fmt(v)}"


@dataclass
class SymbolicFormula:
    terms: list[tuple[str, SymbolicFit]]
    intercept: float
    rendered: str = field(default="")

    def __post_init__(self):
        if not self.rendered:
            self.rendered = render(self.terms, self.intercept)

    def evaluate(self, Z, names=None) -> np.ndarray:
        """Formula value for raw covariate rows ``Z`` ordered like ``names``."""
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        names = names or [name for name, _ in self.terms]
        out = np.full(Z.shape[0], self.intercept)
        for name, fit in self.terms:
            x = Z[:, names.index(name)]
            out += fit(x) - fit.d
        return out

    def to_dict(self) -> dict:
        return {
            "terms": [{"covariate": name, **fit.to_dict()} for name, fit in self.terms],
            "intercept": self.intercept,
            "rendered": self.rendered,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> SymbolicFormula:
        terms = []
        for t in doc["terms"]:
            t = dict(t)
            name = t.pop("covariate")
            terms.append((name, SymbolicFit(**t)))
        return cls(terms, float(doc["intercept"]), doc.get("rendered", ""))


def render(terms, intercept: float) -> str:
    parts = []
    for name, fit in terms:
        if fit.constant:
            continue
        first = not parts
        if fit.is_linear:
            parts.append(f"{_signed(fit.slope(), first)}*{name}")
        else:
            inner = f"{_fmt(fit.a)}*{name} {_signed(fit.b, False)}"
            tmpl = _by_name(fit.function_name).template
            parts.append(f"{_signed(fit.c, first)}*{tmpl.format(inner)}")
    parts.append(_signed(intercept, not parts))
    return "log T = " + " ".join(parts)


def extract_formula(model) -> SymbolicFormula:
    """Symbolic ``log T`` for a shallow ``[p, 1]`` model, in raw covariate units.

    Linear terms fold ``c * (a x + b)`` into a slope, and every constant
    (``d`` plus the folded offsets) is collected into the intercept.
    """
    net = model.network
    if not net.is_shallow:
        raise UnsupportedShapeError(f"formula extraction needs shape [p, 1], got {list(net.shape)}")
    layer = net.layers[0]
    stats = model.standardization
    terms = []
    intercept = 0.0
    for i, name in enumerate(model.covariate_names):
        if not layer.mask[0, i]:
            continue
        fit = fit_symbolic_edge(layer.edge(0, i), model.probe_domains[i])
        raw = fit.unstandardize(float(stats.mean[i]), float(stats.scale[i]))
        if raw.is_linear:
            intercept += raw.c * raw.b + raw.d
            raw = SymbolicFit("x", raw.a, 0.0, raw.c, 0.0, raw.r_squared, raw.constant)
        else:
            intercept += raw.d
            raw = SymbolicFit(raw.function_name, raw.a, raw.b, raw.c, 0.0, raw.r_squared, raw.constant)
        terms.append((name, raw))
    return SymbolicFormula(terms, intercept)


def save_formula(formula: SymbolicFormula, path, **extra) -> tuple[Path, Path]:
    """Write ``<path>`` (JSON) and a sibling ``.txt`` with the one-line equation."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = formula.to_dict()
    doc.update(extra)
    path.write_text(json.dumps(doc, indent=1))
    txt = path.with_suffix(".txt")
    txt.write_text(formula.rendered + "\n")
    return path, txt
