"""Censoring-aware fitting of the KAN predictor of log survival time.

Three strategies share one engine, :func:`train_weighted_mse`:

* ``buckley_james`` -- iterative imputation of censored residuals from a
  Kaplan-Meier fit of the residual distribution;
* ``ipcw`` -- events reweighted by the inverse censoring survival, censored
  records dropped;
* ``transform`` -- regression on Fan-Gijbels adjusted times.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bspline import DEFAULT_DEGREE, DEFAULT_GRID, grid_domain
from .data import Standardization, SurvivalDataset, fit_standardization
from .errors import (
    ConfigError,
    ContractViolation,
    DegenerateError,
    DivergenceError,
    NumericGuardError,
    ShapeError,
    UnsupportedTailError,
)
from .metrics import MetricReport, metric_report
from .network import (
    KanNetwork,
    RegConfig,
    backward_batch,
    forward_batch,
    init_network,
    layer_basis,
    network_from_dict,
    network_to_dict,
    regularization_terms,
)
from .optim import Adam
from .survival import (
    censoring_km,
    conditional_residual_expectations,
    inverse_G_integrals,
    kaplan_meier,
    km_eval,
)

log = logging.getLogger(__name__)

STRATEGIES = ("buckley_james", "ipcw", "transform")
ALIASES = {"bj": "buckley_james", "buckley-james": "buckley_james", "fan_gijbels": "transform"}
MODEL_FORMAT = "kanaft.model/1"
LOG_FLOOR = 1e-8
EXP_GUARD = 700.0


def canonical_strategy(name: str) -> str:
    name = ALIASES.get(name.lower(), name.lower())
    if name not in STRATEGIES:
        raise ConfigError(f"unknown strategy {name!r}; choose from {STRATEGIES}")
    return name


@dataclass
class FitConfig:
    strategy: str = "buckley_james"
    # one-shot budget (ipcw, transform)
    epochs: int = 1500
    # Buckley-James budget per round; None means ``epochs``
    epochs_per_round: int | None = 200
    # continue from the previous round's network instead of refitting
    warm_start: bool = False
    learning_rate: float = 0.02
    max_bj_rounds: int = 20
    bj_tolerance: float = 1e-3
    reg: RegConfig = field(default_factory=RegConfig)
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    grid: int = DEFAULT_GRID
    degree: int = DEFAULT_DEGREE
    hidden: tuple[int, ...] = ()
    standardize: bool = True

    def __post_init__(self):
        self.strategy = canonical_strategy(self.strategy)
        if isinstance(self.reg, dict):
            self.reg = RegConfig(**self.reg)
        self.hidden = tuple(int(h) for h in self.hidden)
        if not self.bj_tolerance > 0:
            raise ConfigError("bj_tolerance must be positive")
        if self.max_bj_rounds < 1:
            raise ConfigError("max_bj_rounds must be >= 1")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if self.epochs < 1 or (self.epochs_per_round is not None and self.epochs_per_round < 1):
            raise ConfigError("epoch counts must be positive")

    @property
    def round_epochs(self) -> int:
        return self.epochs if self.epochs_per_round is None else self.epochs_per_round

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> FitConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown fit config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class TrainedModel:
    network: KanNetwork
    strategy: str
    loss_trace: np.ndarray
    bj_convergence_trace: np.ndarray
    final_train_metrics: MetricReport | None
    covariate_names: list[str]
    standardization: Standardization
    # per-input probe window (standardized units) for symbolic fitting
    probe_domains: np.ndarray
    config: FitConfig
    extras: dict = field(default_factory=dict)

    def predict_log_time(self, Z) -> np.ndarray:
        Z = np.asarray(Z, dtype=float)
        if Z.ndim == 1:
            Z = Z[None, :]
        if Z.shape[1] != self.network.n_inputs:
            raise ShapeError(f"expected {self.network.n_inputs} covariates, got {Z.shape[1]}")
        pred, _ = forward_batch(self.network, self.standardization.apply(Z))
        return pred

    def predict_times(self, Z) -> np.ndarray:
        return np.exp(self.predict_log_time(Z))


def _check_training_arrays(inputs, targets, weights):
    inputs = np.asarray(inputs, dtype=float)
    targets = np.asarray(targets, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if inputs.ndim != 2 or targets.shape != (inputs.shape[0],) or weights.shape != targets.shape:
        raise ShapeError("inputs (n, p), targets (n,) and weights (n,) must align")
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise DegenerateError("weights must be finite and non-negative")
    if weights.sum() <= 0:
        raise DegenerateError("all training weights are zero")
    return inputs, targets, weights


def train_weighted_mse(net: KanNetwork, inputs, targets, weights, cfg: FitConfig, epochs: int | None = None):
    """Full-batch Adam on ``mean(w * (y - KAN(z))^2) + regularizer``.

    Weights are rescaled to mean 1 first, so multiplying all weights by a
    constant does not change the fit. Returns ``(trained copy, loss trace)``;
    the input network is not modified.
    """
    inputs, targets, weights = _check_training_arrays(inputs, targets, weights)
    if not np.all(np.isfinite(targets)):
        raise DegenerateError("non-finite regression target")
    net = net.copy()
    w = weights / weights.mean()
    n = len(targets)
    epochs = cfg.epochs if epochs is None else epochs
    opt = Adam(net.parameters(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
    B0 = layer_basis(net.layers[0], inputs)
    trace = np.empty(epochs)
    # overflow surfaces as a non-finite loss, reported below with its epoch
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for epoch in range(epochs):
            pred, cache = forward_batch(net, inputs, first_basis=B0)
            resid = targets - pred
            reg_value, edge_grads, coef_grads = regularization_terms(net, cache, cfg.reg)
            loss = float(np.mean(w * resid**2)) + reg_value
            if not np.isfinite(loss):
                raise DivergenceError(epoch, f"non-finite loss at epoch {epoch}")
            trace[epoch] = loss
            grads = backward_batch(net, cache, -2.0 * w * resid / n, edge_grads, check=False)
            for g, cg in zip(grads.layers, coef_grads):
                g.coef += cg
            opt.step(grads.arrays())
    return net, trace


@dataclass
class _Prepared:
    Z: np.ndarray
    stats: Standardization
    init: KanNetwork
    probe: np.ndarray


def _prepare(data: SurvivalDataset, cfg: FitConfig) -> _Prepared:
    data.require_events()
    stats = fit_standardization(data.covariates) if cfg.standardize else Standardization.identity(data.n_covariates)
    Z = stats.apply(data.covariates)
    ranges = [grid_domain(Z[:, i]) for i in range(Z.shape[1])]
    shape = (Z.shape[1], *cfg.hidden, 1)
    init = init_network(shape, cfg.grid, cfg.degree, cfg.seed, ranges)
    probe = np.quantile(Z, [0.01, 0.99], axis=0).T
    flat = probe[:, 1] <= probe[:, 0]
    probe[flat] = np.array(ranges)[flat]
    return _Prepared(Z, stats, init, probe)


def _finish(data, cfg, prep, net, trace, bj_trace=(), **extras) -> TrainedModel:
    model = TrainedModel(
        network=net,
        strategy=cfg.strategy,
        loss_trace=np.asarray(trace, dtype=float),
        bj_convergence_trace=np.asarray(bj_trace, dtype=float),
        final_train_metrics=None,
        covariate_names=list(data.covariate_names),
        standardization=prep.stats,
        probe_domains=prep.probe,
        config=cfg,
        extras=extras,
    )
    try:
        model.final_train_metrics = metric_report(data.times, data.events, model.predict_times(data.covariates))
    except ValueError:
        log.warning("training metrics undefined for this dataset")
    return model


def fit_buckley_james(data: SurvivalDataset, cfg: FitConfig) -> TrainedModel:
    """Iterative Buckley-James imputation around the KAN predictor.

    Each round: residual times ``T / exp(phi)``, Kaplan-Meier on those
    residuals, censored residuals replaced by ``E(gamma | gamma > gamma_i)``,
    targets ``phi + log(gamma*)``, then a fresh fit (or a warm-started one when
    ``cfg.warm_start``). Stops when the mean absolute change of the predictor
    falls below ``cfg.bj_tolerance`` or after ``cfg.max_bj_rounds`` rounds.
    """
    cfg = dataclasses.replace(cfg, strategy="buckley_james")
    prep = _prepare(data, cfg)
    T, events = data.times, data.events
    n = len(T)
    phi = np.zeros(n)
    ones = np.ones(n)
    net = prep.init
    traces, deltas = [], []
    for _ in range(cfg.max_bj_rounds):
        if np.any(np.abs(phi) > EXP_GUARD):
            raise NumericGuardError("predictor magnitude too large to form residual times")
        gamma = T / np.exp(phi)
        curve = kaplan_meier(gamma, events)
        imputed = gamma.copy()
        imputed[~events] = conditional_residual_expectations(curve, gamma[~events])
        targets = phi + np.log(imputed)
        start = net if cfg.warm_start else prep.init
        net, trace = train_weighted_mse(start, prep.Z, targets, ones, cfg, epochs=cfg.round_epochs)
        traces.append(trace)
        new_phi, _ = forward_batch(net, prep.Z)
        delta = float(np.mean(np.abs(new_phi - phi)))
        if not np.isfinite(delta):
            raise DivergenceError(len(deltas), "non-finite Buckley-James update")
        deltas.append(delta)
        phi = new_phi
        if delta < cfg.bj_tolerance:
            break
    return _finish(data, cfg, prep, net, np.concatenate(traces), deltas, bj_rounds=len(deltas))


def compute_ipcw_weights(data: SurvivalDataset, return_clamped: bool = False):
    """``w_i = delta_i / G(T_i-)`` with G the censoring Kaplan-Meier curve."""
    data.require_events()
    G = censoring_km(data.times, data.events)
    g_left = km_eval(G, data.times, side="left")
    positive = G.survival_probs[G.survival_probs > 0]
    floor = float(positive.min()) if positive.size else 1.0
    bad = data.events & (g_left <= 0)
    clamped = int(bad.sum())
    if clamped:
        log.warning("clamped G(T-) to %.3g for %d uncensored record(s)", floor, clamped)
        g_left = np.where(bad, floor, g_left)
    w = np.where(data.events, 1.0 / np.where(g_left > 0, g_left, 1.0), 0.0)
    return (w, clamped) if return_clamped else w


def fit_ipcw(data: SurvivalDataset, cfg: FitConfig) -> TrainedModel:
    cfg = dataclasses.replace(cfg, strategy="ipcw")
    weights, clamped = compute_ipcw_weights(data, return_clamped=True)
    prep = _prepare(data, cfg)
    net, trace = train_weighted_mse(prep.init, prep.Z, np.log(data.times), weights, cfg)
    return _finish(data, cfg, prep, net, trace, ipcw_clamped=clamped)


def transform_times(data: SurvivalDataset):
    """Fan-Gijbels adjusted times ``T*`` and the tuning constant ``alpha``.

    ``alpha`` is the smallest ratio over events of
    ``(I(T) - T) / (T / G(T-) - I(T))`` with ``I(T) = int_0^T du / G(u-)``;
    events whose ratio is 0/0 (no censoring before them) are skipped since
    their adjusted time equals ``T`` for any alpha.
    """
    data.require_events()
    T, events = data.times, data.events
    if events.all():
        return T.copy(), 0.0
    G = censoring_km(T, events)
    integral = inverse_G_integrals(G, T)
    g_left = km_eval(G, T, side="left")
    if np.any(events & (g_left <= 0)):
        raise UnsupportedTailError("censoring survival is zero before an event time")
    ratio_t = np.where(g_left > 0, T / np.where(g_left > 0, g_left, 1.0), np.inf)
    num = integral - T
    den = ratio_t - integral
    usable = events & (den > 1e-12 * T)
    alpha = float(np.min(num[usable] / den[usable])) if usable.any() else 0.0
    alpha = max(alpha, 0.0)
    T_star = np.where(events, (1 + alpha) * integral - alpha * np.where(events, ratio_t, 0.0), (1 + alpha) * integral)
    if np.any(T_star < -1e-9):
        raise ContractViolation("adjusted times must be non-negative")
    return T_star, alpha


def fit_transform(data: SurvivalDataset, cfg: FitConfig) -> TrainedModel:
    cfg = dataclasses.replace(cfg, strategy="transform")
    T_star, alpha = transform_times(data)
    prep = _prepare(data, cfg)
    targets = np.log(np.maximum(T_star, LOG_FLOOR))
    net, trace = train_weighted_mse(prep.init, prep.Z, targets, np.ones(len(T_star)), cfg)
    return _finish(data, cfg, prep, net, trace, transform_alpha=alpha)


FITTERS = {"buckley_james": fit_buckley_james, "ipcw": fit_ipcw, "transform": fit_transform}


def fit(data: SurvivalDataset, cfg: FitConfig) -> TrainedModel:
    return FITTERS[cfg.strategy](data, cfg)


def predict_time(model: TrainedModel, z) -> float:
    """exp(KAN(z)) for one raw covariate vector."""
    z = np.asarray(z, dtype=float)
    if z.ndim != 1:
        raise ShapeError("predict_time takes a single covariate vector")
    return float(model.predict_times(z)[0])


def model_to_dict(model: TrainedModel) -> dict:
    doc = {
        "format": MODEL_FORMAT,
        "version": __version__,
        "strategy": model.strategy,
        "config": model.config.to_dict(),
        "covariate_names": model.covariate_names,
        "standardization": model.standardization.to_dict(),
        "probe_domains": model.probe_domains.tolist(),
        "loss_trace": model.loss_trace.tolist(),
        "bj_convergence_trace": model.bj_convergence_trace.tolist(),
        "train_metrics": None if model.final_train_metrics is None else model.final_train_metrics.to_dict(),
        "extras": model.extras,
        "network": network_to_dict(model.network),
    }
    return doc


def model_from_dict(doc: dict) -> TrainedModel:
    if doc.get("format") != MODEL_FORMAT:
        raise ConfigError(f"unrecognized model format {doc.get('format')!r}")
    metrics = doc.get("train_metrics")
    return TrainedModel(
        network=network_from_dict(doc["network"]),
        strategy=doc["strategy"],
        loss_trace=np.array(doc["loss_trace"], dtype=float),
        bj_convergence_trace=np.array(doc["bj_convergence_trace"], dtype=float),
        final_train_metrics=None if metrics is None else MetricReport(**metrics),
        covariate_names=list(doc["covariate_names"]),
        standardization=Standardization.from_dict(doc["standardization"]),
        probe_domains=np.array(doc["probe_domains"], dtype=float),
        config=FitConfig.from_dict(doc["config"]),
        extras=dict(doc.get("extras", {})),
    )


def save_model(model: TrainedModel, path, **extra) -> None:
    doc = model_to_dict(model)
    doc.update(extra)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(doc, indent=1))


def load_model(path) -> TrainedModel:
    return model_from_dict(json.loads(Path(path).read_text()))
