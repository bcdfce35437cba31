"""Command-line interface: gen, predict, and validate.

Reports are JSON with sorted keys and no timestamps, so identical inputs
give byte-identical files. Every report embeds its fully resolved
configuration under "config"; rerunning with --config <report.json>
reproduces the run exactly (output path and --threads are execution
details and are deliberately not part of the config).

Seed resolution order: --seed flag, then the config file, then the
CONFEE_SEED environment variable, then 0.

Exit codes: 0 when the run completes (and any verdict is "consistent"),
2 when a validate run ends in a "violation" verdict, 1 for usage or
runtime errors.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys

import numpy as np

from .core import ClassificationTask, RegressionTask, derive_seed
from .data import (
    SCENARIO_PRESETS,
    Scenario,
    get_scenario,
    load_csv,
    sample,
    save_csv,
)
from .errors import ConfeeError, OutOfRangeError, ParseError, RaggedRowsError
from .predictors import (
    CrossEPredictor,
    FullEPredictor,
    SplitEPredictor,
    e_prediction_set,
)
from .validity import (
    DEFAULT_EPSILONS,
    PredictorSpec,
    build_predictor,
    compare_e_vs_p,
    mc_space_validity,
    online_time_validity,
)

_CONST_PATTERN = re.compile(r"^const(\d+(\.\d+)?)?$")


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors by default; this CLI reserves 2
    for validity violations, so usage errors exit 1 instead."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        # argparse refuses option values that start with a dash unless they
        # look like bare negative numbers; widen that test to comma-separated
        # vectors so `--x -2.0,1.5` works without the `--x=` form.
        self._negative_number_matcher = re.compile(
            r"^-\d*\.?\d+([eE][+-]?\d+)?(,-?\d*\.?\d+([eE][+-]?\d+)?)*$"
        )

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _labels(text: str) -> list:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if tok == "":
            continue
        try:
            out.append(int(tok))
        except ValueError:
            out.append(tok)
    return out


def build_parser() -> _Parser:
    parser = _Parser(prog="confee", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", parents=[], help="sample a scenario to CSV")
    gen.add_argument("--scenario", help=f"one of {sorted(SCENARIO_PRESETS)}")
    gen.add_argument("--n", type=int, help="number of observations")
    gen.add_argument("--seed", type=int)
    gen.add_argument("--config", help="JSON config or previous report to rerun")
    gen.add_argument("--out", help="CSV path (default: stdout)")

    predict = sub.add_parser("predict", help="per-object plausibility tables")
    predict.add_argument("--scenario")
    predict.add_argument("--n", type=int, help="training size when using --scenario")
    predict.add_argument("--input", help="training CSV (x1..xd,y)")
    predict.add_argument("--labels", type=_labels, help="label set for --input, e.g. 0,1")
    predict.add_argument("--grid", type=_floats, help="label grid for --input, e.g. -3,0,3")
    predict.add_argument("--predictor", help="split | cross | full | const<value>")
    predict.add_argument("--c", type=int, help="split calibration size")
    predict.add_argument("--K", type=int, help="cross fold count")
    predict.add_argument("--weighting", choices=["uniform", "size_proportional"])
    predict.add_argument("--rule", choices=["knn", "ridge"])
    predict.add_argument("--k", type=int, help="knn neighbour count")
    predict.add_argument("--lam", type=float, help="ridge penalty")
    predict.add_argument("--normalizer", choices=["sum", "mean"])
    predict.add_argument("--margin-w", type=_floats, dest="margin_w")
    predict.add_argument("--margin-b", type=float, dest="margin_b")
    predict.add_argument("--positive-label", dest="positive_label")
    predict.add_argument(
        "--x", action="append", type=_floats, help="test object, repeatable"
    )
    predict.add_argument("--test", help="CSV of test objects (x1..xd[,y])")
    predict.add_argument("--epsilons", type=_floats)
    predict.add_argument("--verbose", action="store_true", default=None,
                         help="include calibration summaries and full e-vectors")
    predict.add_argument("--seed", type=int)
    predict.add_argument("--config")
    predict.add_argument("--out", help="report path (default: stdout)")

    validate = sub.add_parser("validate", help="Monte Carlo validity checks")
    validate.add_argument("--mode", choices=["space", "time", "compare"])
    validate.add_argument("--scenario")
    validate.add_argument("--n", type=int, help="training size per trial")
    validate.add_argument("--trials", type=int)
    validate.add_argument("--rounds", type=int, help="time mode: stream length")
    validate.add_argument("--warmup", type=int)
    validate.add_argument("--tolerance", type=float)
    validate.add_argument("--predictor", help="split | cross | full | const<value>")
    validate.add_argument("--c", type=int)
    validate.add_argument("--K", type=int)
    validate.add_argument("--weighting", choices=["uniform", "size_proportional"])
    validate.add_argument("--rule", choices=["knn", "ridge"])
    validate.add_argument("--k", type=int)
    validate.add_argument("--lam", type=float)
    validate.add_argument("--normalizer", choices=["sum", "mean"])
    validate.add_argument("--epsilons", type=_floats, help="compare mode levels")
    validate.add_argument("--threads", type=int, default=1,
                          help="worker threads; does not affect results")
    validate.add_argument("--seed", type=int)
    validate.add_argument("--config")
    validate.add_argument("--out", help="report path (default: stdout)")

    return parser


def _env_seed(parser: _Parser) -> int:
    raw = os.environ.get("CONFEE_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        parser.error(f"CONFEE_SEED must be an integer, got {raw!r}")


def _load_config(parser: _Parser, path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"cannot read config {path}: {exc}")
    if not isinstance(obj, dict):
        parser.error(f"config {path} must hold a JSON object")
    config = obj.get("config", obj)
    if not isinstance(config, dict):
        parser.error(f"config {path} has a malformed 'config' entry")
    return config


def _resolve(args, config: dict, defaults: dict) -> dict:
    """flag > config file > default, key by key."""
    resolved = {}
    for key, default in defaults.items():
        flag = getattr(args, key, None)
        if flag is not None:
            resolved[key] = flag
        elif config.get(key) is not None:
            resolved[key] = config[key]
        else:
            resolved[key] = default
    return resolved


def _jsonify(value):
    if isinstance(value, (list, tuple)):
        return [_jsonify(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def _label_key(label) -> str:
    if isinstance(label, float):
        return repr(label)
    return str(label)


def _parse_predictor(parser: _Parser, text: str) -> tuple:
    """'split'/'cross'/'full' pass through; 'const<v>' carries its value."""
    if text in ("split", "cross", "full"):
        return text, 1.0
    match = _CONST_PATTERN.match(text)
    if match:
        return "const", float(match.group(1) or 1.0)
    parser.error(f"unknown predictor {text!r}")


def _scenario_from_name(name: str) -> Scenario:
    return get_scenario(name)


def _spec_from(cfg: dict, parser: _Parser) -> PredictorSpec:
    kind, const_value = _parse_predictor(parser, cfg["predictor"])
    return PredictorSpec(
        kind=kind,
        rule=cfg["rule"],
        k=cfg["k"],
        lam=cfg["lam"],
        normalizer=cfg["normalizer"],
        folds=cfg["K"],
        weighting=cfg["weighting"],
        calibration_size=cfg["c"],
        const_value=const_value,
        margin_w=tuple(cfg["margin_w"]) if cfg.get("margin_w") else None,
        margin_b=cfg.get("margin_b", 0.0),
        positive_label=cfg.get("positive_label", 1),
    )


def _write_report(report: dict, out) -> None:
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _check_command(parser: _Parser, config: dict, command: str) -> None:
    stored = config.get("command")
    if stored is not None and stored != command:
        parser.error(f"config was produced by '{stored}', not '{command}'")


def cmd_gen(parser: _Parser, args) -> int:
    config = _load_config(parser, args.config)
    _check_command(parser, config, "gen")
    cfg = _resolve(args, config, {
        "command": "gen",
        "scenario": "gm2d",
        "n": 100,
        "seed": _env_seed(parser),
    })
    dataset = sample(_scenario_from_name(cfg["scenario"]), cfg["n"], cfg["seed"])
    if args.out is None:
        save_csv(dataset, sys.stdout)
    else:
        save_csv(dataset, args.out)
    return 0


def _predict_defaults(parser: _Parser) -> dict:
    return {
        "command": "predict",
        "scenario": None,
        "n": 100,
        "input": None,
        "labels": None,
        "grid": None,
        "predictor": "cross",
        "c": 10,
        "K": 5,
        "weighting": "uniform",
        "rule": "knn",
        "k": 3,
        "lam": 1.0,
        "normalizer": "mean",
        "margin_w": None,
        "margin_b": 0.0,
        "positive_label": 1,
        "x": None,
        "test": None,
        "epsilons": list(DEFAULT_EPSILONS),
        "verbose": False,
        "seed": _env_seed(parser),
    }


def _training_data(parser: _Parser, cfg: dict):
    has_scenario = cfg["scenario"] is not None
    has_input = cfg["input"] is not None
    if has_scenario == has_input:
        parser.error("provide exactly one data source: --scenario or --input")
    if has_scenario:
        if cfg["labels"] or cfg["grid"]:
            parser.error("--labels/--grid apply to --input only")
        scenario = _scenario_from_name(cfg["scenario"])
        return sample(scenario, cfg["n"], cfg["seed"])
    if bool(cfg["labels"]) == bool(cfg["grid"]):
        parser.error("--input needs exactly one of --labels or --grid")
    if cfg["labels"]:
        task = ClassificationTask(tuple(cfg["labels"]))
    else:
        task = RegressionTask(tuple(cfg["grid"]))
    return load_csv(cfg["input"], task)


def _test_objects(parser: _Parser, cfg: dict, task, dim: int) -> list:
    """(x, true_label_or_None) pairs: --test rows first, then --x objects."""
    objects = []
    if cfg["test"] is not None:
        objects.extend(_load_test_csv(cfg["test"], task, dim))
    for vec in cfg["x"] or []:
        objects.append((tuple(float(v) for v in vec), None))
    if not objects:
        parser.error("no test objects; pass --x and/or --test")
    for vec, _ in objects:
        if len(vec) != dim:
            parser.error(f"test object has {len(vec)} features, training data has {dim}")
    return objects


def _load_test_csv(path, task, dim: int) -> list:
    import csv as _csv

    with open(path, "r", newline="", encoding="utf-8") as fh:
        rows = list(_csv.reader(fh))
    if not rows:
        raise ParseError(1, "header", "file is empty")
    header = [h.strip() for h in rows[0]]
    with_labels = header and header[-1] == "y"
    d = len(header) - 1 if with_labels else len(header)
    expected = [f"x{j + 1}" for j in range(d)] + (["y"] if with_labels else [])
    if d < 1 or header != expected:
        raise ParseError(1, "header", f"expected x1..xd[,y], got {','.join(header)}")
    out = []
    label_map = (
        {str(lab): lab for lab in task.labels}
        if isinstance(task, ClassificationTask)
        else None
    )
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise RaggedRowsError(r, len(header), len(row))
        try:
            vec = tuple(float(tok) for tok in row[:d])
        except ValueError:
            raise ParseError(r, "x", "not a number") from None
        label = None
        if with_labels:
            token = row[d]
            if label_map is not None:
                if token not in label_map:
                    raise ParseError(r, "y", f"label {token!r} not in task labels")
                label = label_map[token]
            else:
                try:
                    label = float(token)
                except ValueError:
                    raise ParseError(r, "y", f"not a number: {token!r}") from None
        out.append((vec, label))
    return out


def _details_for(predictor, x, labels) -> dict:
    if isinstance(predictor, SplitEPredictor):
        return {
            "calibration_summaries": list(predictor.calibration_summaries.values),
            "candidate_summaries": {
                _label_key(y): predictor.sigma_at(x, y) for y in labels
            },
            "normalized": {
                _label_key(y): list(predictor.alphas_at(x, y).values) for y in labels
            },
        }
    if isinstance(predictor, CrossEPredictor):
        return {
            "folds": [
                {
                    "fold": k + 1,
                    **_details_for(fp, x, labels),
                }
                for k, fp in enumerate(predictor.fold_predictors)
            ]
        }
    if isinstance(predictor, FullEPredictor):
        return {
            "assignment_vectors": {
                _label_key(y): list(predictor.vector_at(x, y).values) for y in labels
            }
        }
    return {}


def cmd_predict(parser: _Parser, args) -> int:
    config = _load_config(parser, args.config)
    _check_command(parser, config, "predict")
    cfg = _resolve(args, config, _predict_defaults(parser))
    training = _training_data(parser, cfg)
    task = training.task
    labels = task.candidates
    spec = _spec_from(cfg, parser)
    predictor = build_predictor(spec, training, derive_seed(cfg["seed"], 3))
    objects = _test_objects(parser, cfg, task, training.dim)

    epsilons = [float(e) for e in cfg["epsilons"]]
    results = []
    for x, true_label in objects:
        table = predictor.predict(x, labels)
        entry = {
            "x": list(x),
            "true_label": None if true_label is None else _label_key(true_label),
            "e_values": {_label_key(y): v for y, v in zip(table.labels, table.values)},
            "prediction_sets": {
                repr(eps): [_label_key(y) for y in e_prediction_set(table, eps)]
                for eps in epsilons
            },
        }
        if isinstance(predictor, CrossEPredictor):
            fold_tables = predictor.fold_tables(x, labels)
            entry["fold_e_values"] = {
                _label_key(y): [t.values[i] for t in fold_tables]
                for i, y in enumerate(labels)
            }
        if cfg["verbose"]:
            entry["details"] = _details_for(predictor, x, labels)
        results.append(entry)

    if isinstance(task, ClassificationTask):
        task_obj = {"type": "classification", "labels": [_label_key(y) for y in labels]}
    else:
        task_obj = {"type": "regression", "grid": [float(g) for g in labels]}
    report = {
        "kind": "predict",
        "seed": cfg["seed"],
        "config": {k: _jsonify(v) for k, v in cfg.items()},
        "task": task_obj,
        "results": results,
    }
    _write_report(report, args.out)
    return 0


def _validate_defaults(parser: _Parser) -> dict:
    return {
        "command": "validate",
        "mode": "space",
        "scenario": "gm2d",
        "n": 60,
        "trials": 1000,
        "rounds": 1000,
        "warmup": 20,
        "tolerance": 0.05,
        "predictor": "cross",
        "c": 10,
        "K": 5,
        "weighting": "uniform",
        "rule": "knn",
        "k": 3,
        "lam": 1.0,
        "normalizer": "mean",
        "epsilons": list(DEFAULT_EPSILONS),
        "seed": _env_seed(parser),
    }


def cmd_validate(parser: _Parser, args) -> int:
    config = _load_config(parser, args.config)
    _check_command(parser, config, "validate")
    cfg = _resolve(args, config, _validate_defaults(parser))
    scenario = _scenario_from_name(cfg["scenario"])
    spec = _spec_from(cfg, parser)
    threads = args.threads

    if cfg["mode"] == "space":
        body = mc_space_validity(
            scenario, spec, cfg["trials"], cfg["seed"], n_train=cfg["n"], threads=threads
        )
    elif cfg["mode"] == "time":
        body = online_time_validity(
            scenario,
            spec,
            cfg["rounds"],
            cfg["seed"],
            warmup=cfg["warmup"],
            tolerance=cfg["tolerance"],
        )
    else:
        body = compare_e_vs_p(
            scenario,
            spec,
            cfg["trials"],
            cfg["seed"],
            n_train=cfg["n"],
            epsilons=tuple(cfg["epsilons"]),
            threads=threads,
        )

    report = {
        "kind": "validate",
        "mode": cfg["mode"],
        "seed": cfg["seed"],
        "config": {k: _jsonify(v) for k, v in cfg.items()},
        "verdict": body.verdict,
        "report": body.to_dict(),
    }
    _write_report(report, args.out)
    return 0 if body.verdict == "consistent" else 2


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {"gen": cmd_gen, "predict": cmd_predict, "validate": cmd_validate}[
            args.command
        ]
        return handler(parser, args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    except ConfeeError as exc:
        sys.stderr.write(f"confee: error: {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"confee: error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
