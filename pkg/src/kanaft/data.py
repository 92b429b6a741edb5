"""Survival datasets: synthetic generators, CSV I/O, splitting, scaling."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DegenerateError, DomainError, SchemaError

log = logging.getLogger(__name__)

TRUTHS = ("linear", "nonlinear")


@dataclass
class SurvivalDataset:
    """Right-censored observations ``(T_i, delta_i, z_i)``."""

    times: np.ndarray
    events: np.ndarray
    covariates: np.ndarray
    covariate_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.events = np.asarray(self.events, dtype=bool)
        self.covariates = np.asarray(self.covariates, dtype=float)
        if self.covariates.ndim == 1:
            self.covariates = self.covariates[:, None]
        n = self.times.shape[0]
        if self.events.shape != (n,) or self.covariates.shape[0] != n:
            raise DomainError("times, events and covariates must have matching rows")
        if n and (np.any(~np.isfinite(self.times)) or np.any(self.times <= 0)):
            raise DomainError("all times must be finite and strictly positive")
        if not self.covariate_names:
            self.covariate_names = [f"z{i + 1}" for i in range(self.covariates.shape[1])]
        if len(self.covariate_names) != self.covariates.shape[1]:
            raise DomainError("one name per covariate column required")

    def __len__(self) -> int:
        return self.times.shape[0]

    @property
    def n_covariates(self) -> int:
        return self.covariates.shape[1]

    @property
    def censoring_fraction(self) -> float:
        return float(1.0 - self.events.mean())

    def subset(self, idx) -> SurvivalDataset:
        return SurvivalDataset(
            self.times[idx], self.events[idx], self.covariates[idx], list(self.covariate_names)
        )

    def with_covariates(self, Z) -> SurvivalDataset:
        return SurvivalDataset(self.times, self.events, Z, list(self.covariate_names))

    def require_events(self) -> None:
        if not self.events.any():
            raise DegenerateError("dataset has no uncensored records")


@dataclass(frozen=True)
class SyntheticSpec:
    """Simulation settings.

    ``censor_scale`` is the *mean* of the exponential censoring distribution.
    ``noise_sd`` is the standard deviation of the normal error on log time.
    """

    n: int = 1000
    truth: str = "linear"
    censor_scale: float = 10.0
    noise_sd: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError("n must be at least 2")
        if self.truth not in TRUTHS:
            raise ConfigError(f"truth must be one of {TRUTHS}, not {self.truth!r}")
        if not (self.censor_scale > 0 and self.noise_sd > 0):
            raise ConfigError("censor_scale and noise_sd must be positive")


def linear_log_time(Z) -> np.ndarray:
    Z = np.atleast_2d(Z)
    return 0.5 * Z[:, 0] - 0.3 * Z[:, 1] + Z[:, 2]


def nonlinear_log_time(Z) -> np.ndarray:
    Z = np.atleast_2d(Z)
    return 0.5 * Z[:, 0] ** 2 + 0.3 * np.exp(Z[:, 1]) + 0.8 * np.sin(Z[:, 2])


def _simulate(spec: SyntheticSpec, truth_fn) -> SurvivalDataset:
    rng = np.random.default_rng(spec.seed)
    Z = rng.standard_normal((spec.n, 3))
    log_t = truth_fn(Z) + spec.noise_sd * rng.standard_normal(spec.n)
    latent = np.exp(log_t)
    censor = rng.exponential(spec.censor_scale, spec.n)
    events = latent <= censor
    times = np.where(events, latent, censor)
    return SurvivalDataset(times, events, Z, ["z1", "z2", "z3"])


def generate_linear(spec: SyntheticSpec) -> SurvivalDataset:
    if spec.truth != "linear":
        raise ConfigError("generate_linear needs truth='linear'")
    return _simulate(spec, linear_log_time)


def generate_nonlinear(spec: SyntheticSpec) -> SurvivalDataset:
    if spec.truth != "nonlinear":
        raise ConfigError("generate_nonlinear needs truth='nonlinear'")
    return _simulate(spec, nonlinear_log_time)


def generate(spec: SyntheticSpec) -> SurvivalDataset:
    return generate_linear(spec) if spec.truth == "linear" else generate_nonlinear(spec)


@dataclass(frozen=True)
class CsvSchema:
    time_column: str = "time"
    event_column: str = "event"
    covariate_columns: tuple[str, ...] = ()
    event_true_values: frozenset[str] = frozenset({"1", "1.0", "true"})
    delimiter: str = ","

    def __post_init__(self):
        object.__setattr__(self, "covariate_columns", tuple(self.covariate_columns))
        object.__setattr__(
            self, "event_true_values", frozenset(v.strip().lower() for v in self.event_true_values)
        )
        cols = [self.time_column, self.event_column, *self.covariate_columns]
        if not all(cols):
            raise SchemaError("column names must be non-empty")
        if len(set(cols)) != len(cols):
            raise SchemaError("time, event and covariate columns must be disjoint")


@dataclass
class LoadReport:
    n_rows: int = 0
    n_dropped: int = 0
    dropped_lines: list[int] = field(default_factory=list)


def load_csv(path, schema: CsvSchema, report: LoadReport | None = None) -> SurvivalDataset:
    """Read a header-first CSV. Rows with a blank/NA cell in a selected column
    are dropped and counted in ``report``. If ``schema.covariate_columns`` is
    empty, every column other than time/event is used."""
    report = report if report is not None else LoadReport()
    missing_tokens = {"", "na", "nan", "null", "none", "."}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: file is empty") from None
        covs = schema.covariate_columns or tuple(
            h for h in header if h not in (schema.time_column, schema.event_column)
        )
        wanted = [schema.time_column, schema.event_column, *covs]
        for col in wanted:
            if col not in header:
                raise SchemaError(f"{path}: missing column {col!r}")
        pos = [header.index(c) for c in wanted]
        times, events, rows = [], [], []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            report.n_rows += 1
            cells = [row[p].strip() if p < len(row) else "" for p in pos]
            if any(c.lower() in missing_tokens for c in cells):
                report.n_dropped += 1
                report.dropped_lines.append(line_no)
                continue
            try:
                t = float(cells[0])
                z = [float(c) for c in cells[2:]]
            except ValueError as exc:
                raise SchemaError(f"{path}:{line_no}: {exc}") from None
            if not (t > 0 and math.isfinite(t)):
                raise SchemaError(f"{path}:{line_no}: time must be positive, got {cells[0]!r}")
            times.append(t)
            events.append(cells[1].lower() in schema.event_true_values)
            rows.append(z)
    if report.n_dropped:
        log.warning("dropped %d row(s) with missing values", report.n_dropped)
    if not times:
        raise SchemaError(f"{path}: no usable rows")
    return SurvivalDataset(
        np.array(times), np.array(events), np.array(rows, dtype=float).reshape(len(times), len(covs)),
        list(covs),
    )


def save_csv(data: SurvivalDataset, path, delimiter: str = ",") -> None:
    """Write ``time,event,<covariates>``; floats use repr so reloading is exact."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(["time", "event", *data.covariate_names])
        for t, e, z in zip(data.times, data.events, data.covariates):
            w.writerow([repr(float(t)), int(e), *(repr(float(v)) for v in z)])


def split(data: SurvivalDataset, test_fraction: float = 0.25, seed: int = 0, max_attempts: int = 10):
    """Random train/test split; reshuffles until both parts contain an event."""
    if not 0 < test_fraction < 1:
        raise DomainError("test_fraction must lie in (0, 1)")
    n = len(data)
    n_test = int(round(n * test_fraction))
    if n_test < 1 or n_test >= n:
        raise DomainError(f"test_fraction {test_fraction} leaves an empty split for n={n}")
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        perm = rng.permutation(n)
        test_idx, train_idx = np.sort(perm[:n_test]), np.sort(perm[n_test:])
        if data.events[train_idx].any() and data.events[test_idx].any():
            return data.subset(train_idx), data.subset(test_idx)
    raise DegenerateError(f"no split with events on both sides after {max_attempts} attempts")


@dataclass
class Standardization:
    mean: np.ndarray
    scale: np.ndarray
    passthrough: np.ndarray  # bool, zero-variance columns left unscaled

    def apply(self, Z) -> np.ndarray:
        return (np.asarray(Z, dtype=float) - self.mean) / self.scale

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "passthrough": self.passthrough.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> Standardization:
        return cls(np.array(d["mean"], float), np.array(d["scale"], float), np.array(d["passthrough"], bool))

    @classmethod
    def identity(cls, p: int) -> Standardization:
        return cls(np.zeros(p), np.ones(p), np.zeros(p, dtype=bool))


def fit_standardization(Z) -> Standardization:
    Z = np.asarray(Z, dtype=float)
    if Z.shape[0] < 2:
        raise DomainError("standardization needs at least 2 records")
    mean = Z.mean(axis=0)
    sd = Z.std(axis=0)
    flat = ~(sd > 1e-12 * np.maximum(1.0, np.abs(mean)))
    if flat.any():
        log.warning("zero-variance covariate(s) at columns %s passed through", np.flatnonzero(flat).tolist())
    return Standardization(np.where(flat, 0.0, mean), np.where(flat, 1.0, sd), flat)


def standardize(train: SurvivalDataset, test: SurvivalDataset | None = None):
    """Z-score covariates with training statistics; returns (train', test', stats)."""
    stats = fit_standardization(train.covariates)
    train_s = train.with_covariates(stats.apply(train.covariates))
    test_s = None if test is None else test.with_covariates(stats.apply(test.covariates))
    return train_s, test_s, stats
