"""Command-line entry point: simulate, train, evaluate, extract, diagram.

Every option can also come from a JSON file given with ``--config``; flags
typed on the command line win over file values, which win over defaults.
Exit codes: 0 success, 1 runtime/numeric/data error, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .data import CsvSchema, SyntheticSpec, generate, load_csv, save_csv, split
from .errors import ConfigError, KanAftError
from .metrics import metric_report
from .trainers import FitConfig, fit, load_model, save_model

log = logging.getLogger("kanaft")

DEFAULTS = {
    "simulate": {"truth": "linear", "n": 1000, "censor_scale": 10.0, "noise_sd": 0.5, "seed": 0,
                 "out": "data.csv"},
    "train": {"data": None, "time_col": "time", "event_col": "event", "covariates": None,
              "event_values": "1,1.0,true", "strategy": "bj", "epochs": 1500, "epochs_per_round": 200,
              "lr": 0.02, "grid": 5,
              "degree": 3, "test_fraction": 0.25, "seed": 0, "out": "run", "fit": {}},
    "evaluate": {"model": None, "data": None, "time_col": "time", "event_col": "event",
                 "event_values": "1,1.0,true", "out": None},
    "extract": {"model": None, "out": "formula.json"},
    "diagram": {"model": None, "out": "network.svg"},
}
REQUIRED = {"train": ("data",), "evaluate": ("model", "data"), "extract": ("model",), "diagram": ("model",)}


class UsageError(ConfigError):
    pass


def _schema_flags(p: argparse.ArgumentParser, covariates: bool) -> None:
    p.add_argument("--data", help="input CSV")
    p.add_argument("--time-col", dest="time_col")
    p.add_argument("--event-col", dest="event_col")
    if covariates:
        p.add_argument("--covariates", help="comma-separated covariate columns (default: all others)")
    p.add_argument("--event-values", dest="event_values", help="comma-separated tokens meaning 'event'")


def build_parser() -> argparse.ArgumentParser:
    # every default is None so that only explicit flags override the config file
    parser = argparse.ArgumentParser(prog="kanaft", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"kanaft {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON file of option values")
        p.add_argument("--out")
        return p

    p = command("simulate", "write a synthetic survival dataset as CSV")
    p.add_argument("--truth", choices=("linear", "nonlinear"))
    p.add_argument("--n", type=int)
    p.add_argument("--censor-scale", dest="censor_scale", type=float, help="mean of the censoring distribution")
    p.add_argument("--noise-sd", dest="noise_sd", type=float)
    p.add_argument("--seed", type=int)

    p = command("train", "split, fit and score a model")
    _schema_flags(p, covariates=True)
    p.add_argument("--strategy", choices=("bj", "ipcw", "transform", "buckley_james"))
    p.add_argument("--epochs", type=int, help="training epochs for ipcw/transform")
    p.add_argument("--epochs-per-round", dest="epochs_per_round", type=int, help="epochs per Buckley-James round")
    p.add_argument("--lr", type=float)
    p.add_argument("--grid", type=int)
    p.add_argument("--degree", type=int)
    p.add_argument("--test-fraction", dest="test_fraction", type=float)
    p.add_argument("--seed", type=int)

    p = command("evaluate", "score a saved model on a CSV")
    p.add_argument("--model")
    _schema_flags(p, covariates=False)

    p = command("extract", "fit closed-form functions to a saved model's edges")
    p.add_argument("--model")

    p = command("diagram", "draw a saved model as SVG")
    p.add_argument("--model")
    return parser


def effective_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS[args.command])
    if args.config:
        try:
            from_file = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(from_file, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(from_file) - set(cfg)
        if unknown:
            raise UsageError(f"unknown config keys for {args.command}: {sorted(unknown)}")
        cfg.update(from_file)
    for key in cfg:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    missing = [k for k in REQUIRED.get(args.command, ()) if cfg.get(k) in (None, "")]
    if missing:
        raise UsageError(f"{args.command}: missing required option(s): {', '.join('--' + m for m in missing)}")
    return cfg


def _stamp(doc: dict, cfg: dict) -> dict:
    return {**doc, "config": cfg, "version": __version__}


def _write_json(path, doc) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _split_list(value):
    if value is None or isinstance(value, list):
        return value
    return [v.strip() for v in str(value).split(",") if v.strip()]


def _schema(cfg: dict) -> CsvSchema:
    return CsvSchema(
        cfg["time_col"], cfg["event_col"], tuple(_split_list(cfg.get("covariates")) or ()),
        frozenset(_split_list(cfg["event_values"])),
    )


def cmd_simulate(cfg: dict) -> int:
    try:
        spec = SyntheticSpec(cfg["n"], cfg["truth"], cfg["censor_scale"], cfg["noise_sd"], cfg["seed"])
    except ConfigError as exc:
        raise UsageError(str(exc)) from None
    data = generate(spec)
    out = Path(cfg["out"])
    save_csv(data, out)
    _write_json(out.with_suffix(".meta.json"), _stamp({"censoring_fraction": data.censoring_fraction}, cfg))
    print(f"wrote {len(data)} records to {out}; censoring fraction {data.censoring_fraction:.3f}")
    return 0


def _fit_config(cfg: dict) -> FitConfig:
    extra = dict(cfg.get("fit") or {})
    try:
        return FitConfig.from_dict({
            **extra, "strategy": cfg["strategy"], "epochs": cfg["epochs"],
            "epochs_per_round": cfg["epochs_per_round"], "learning_rate": cfg["lr"],
            "grid": cfg["grid"], "degree": cfg["degree"], "seed": cfg["seed"],
        })
    except (ConfigError, TypeError) as exc:
        raise UsageError(str(exc)) from None


def cmd_train(cfg: dict) -> int:
    fit_cfg = _fit_config(cfg)
    data = load_csv(cfg["data"], _schema(cfg))
    train, test = split(data, cfg["test_fraction"], seed=cfg["seed"])
    model = fit(train, fit_cfg)
    out = Path(cfg["out"])
    reports = {
        "train": metric_report(train.times, train.events, model.predict_times(train.covariates)),
        "test": metric_report(test.times, test.events, model.predict_times(test.covariates)),
    }
    save_model(model, out / "model.json", run_config=cfg)
    for name, rep in reports.items():
        _write_json(out / f"metrics_{name}.json", _stamp({"split": name, **rep.to_dict()}, cfg))
    print(f"{'strategy':<14} {'C train':>8} {'C test':>8} {'MSE train':>10} {'MSE test':>10}")
    print(f"{model.strategy:<14} {reports['train'].c_index:8.4f} {reports['test'].c_index:8.4f} "
          f"{reports['train'].mse_log:10.4f} {reports['test'].mse_log:10.4f}")
    return 0


def cmd_evaluate(cfg: dict) -> int:
    model = load_model(cfg["model"])
    schema = CsvSchema(cfg["time_col"], cfg["event_col"], tuple(model.covariate_names),
                       frozenset(_split_list(cfg["event_values"])))
    data = load_csv(cfg["data"], schema)
    rep = metric_report(data.times, data.events, model.predict_times(data.covariates))
    doc = _stamp({"n_records": len(data), **rep.to_dict()}, cfg)
    if cfg["out"]:
        _write_json(cfg["out"], doc)
    print(f"C-index {rep.c_index:.4f}  MSE(log) {rep.mse_log:.4f}  over {len(data)} records")
    return 0


def cmd_extract(cfg: dict) -> int:
    from .symbolic import extract_formula, save_formula

    formula = extract_formula(load_model(cfg["model"]))
    save_formula(formula, cfg["out"], config=cfg, version=__version__)
    print(formula.rendered)
    return 0


def cmd_diagram(cfg: dict) -> int:
    from .diagram import draw_network

    model = load_model(cfg["model"])
    title = f"kanaft {__version__} | {model.strategy} | {Path(cfg['model']).name}"
    panels = draw_network(model.network, cfg["out"], model.covariate_names, title)
    print(f"wrote {cfg['out']} with {panels} edge panel(s)")
    return 0


COMMANDS = {"simulate": cmd_simulate, "train": cmd_train, "evaluate": cmd_evaluate,
            "extract": cmd_extract, "diagram": cmd_diagram}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = effective_config(args)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"kanaft {args.command}: {exc}", file=sys.stderr)
        return 2
    except (KanAftError, OSError) as exc:
        detail = f" (epoch {exc.epoch})" if hasattr(exc, "epoch") else ""
        print(f"kanaft {args.command}: {type(exc).__name__}: {exc}{detail}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
