"""Command-line entry point: dataset generation, single trainings, paired
benchmarks, and class-prior sweeps.

Experiments are described by an INI-style config file (key = value sections,
one optional override section per method); see README for the schema. Exit
codes: 0 success, 1 runtime failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from configparser import ConfigParser, Error as ConfigParserError
from pathlib import Path

from . import evaluation, nn, pseudo_labels, training
from .datasets import (
    SYNTHETIC_KINDS,
    generate_synthetic,
    load_csv,
    make_pu_split,
    save_csv,
    stratified_split,
)
from .errors import FormatError
from .evaluation import DatasetSpec, SplitSpec, Variant
from .pseudo_labels import INIT_STRATEGIES
from .training import METHODS, PU_METHODS, TrainConfig

OUTPUT_DIR_ENV = "PUJOINT_OUT"

_TRAIN_KEYS = {
    "lr": float,
    "num_batches": int,
    "epochs": int,
    "label_update_start": int,
    "label_window": int,
    "lambda_init": float,
    "alpha": float,
    "beta": float,
    "ascent_threshold": float,
    "surrogate": str,
    "clean_surrogate": str,
    "hidden": "intlist",
    "hidden_activation": str,
}

_SECTION_KEYS = {
    "dataset": {"kind": str, "n": int, "dim": int, "center": float, "noise": float,
                "pi_p": float, "test_n": int},
    "split": {"n_p": int, "n_u": int, "pi_p": float, "val_fraction": float},
    "experiment": {"methods": "strlist", "inits": "strlist", "trials": int,
                   "base_seed": int},
    "train": _TRAIN_KEYS,
    "sweep": {"priors": "floatlist"},
}
for _m in METHODS:
    _SECTION_KEYS[f"train.{_m}"] = _TRAIN_KEYS


class ConfigError(Exception):
    """Config file problem; maps to exit code 2."""


def _key_line_map(text: str) -> dict:
    """(section, key) -> 1-based line number, for diagnostics."""
    lines = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(("#", ";")):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            lines.setdefault(("", section), lineno)
            continue
        if "=" in line and section is not None:
            key = line.split("=", 1)[0].strip()
            lines.setdefault((section, key), lineno)
    return lines


def _convert(path, section, key, raw, kind, line):
    where = f"{path}:{line}" if line else str(path)
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is str:
            return raw.strip()
        if kind == "strlist":
            return [item.strip() for item in raw.split(",") if item.strip()]
        if kind == "floatlist":
            return [float(item) for item in raw.split(",") if item.strip()]
        if kind == "intlist":
            if raw.strip().lower() in ("", "none"):
                return ()
            return tuple(int(item) for item in raw.split(",") if item.strip())
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value for {key!r} in [{section}]: {exc}") from exc
    raise AssertionError(f"unknown kind {kind}")


@dataclasses.dataclass
class ExperimentConfig:
    dataset: DatasetSpec
    split: SplitSpec
    methods: list
    inits: list
    trials: int
    base_seed: int
    train_overrides: dict       # method -> key/value dict ("" = shared)
    sweep_priors: list | None

    def train_config(self, method: str) -> TrainConfig:
        merged = dict(self.train_overrides.get("", {}))
        merged.update(self.train_overrides.get(method, {}))
        try:
            return TrainConfig(**merged)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid [train] settings for {method}: {exc}") from exc

    def variants(self) -> list:
        out = []
        for method in self.methods:
            if method == "joint":
                for init in self.inits:
                    out.append(Variant(f"joint:{init}", "joint", init,
                                       self.train_config("joint")))
            else:
                out.append(Variant(method, method, None, self.train_config(method)))
        return out


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    parser = ConfigParser()
    try:
        parser.read_string(text, source=str(path))
    except ConfigParserError as exc:
        raise ConfigError(f"config parse failure: {exc}") from exc
    lines = _key_line_map(text)

    values = {}
    for section in parser.sections():
        if section not in _SECTION_KEYS:
            line = lines.get(("", section))
            raise ConfigError(f"{path}:{line}: unknown section [{section}]")
        allowed = _SECTION_KEYS[section]
        values[section] = {}
        for key, raw in parser.items(section):
            line = lines.get((section, key))
            if key not in allowed:
                raise ConfigError(f"{path}:{line}: unknown key {key!r} in [{section}]")
            values[section][key] = _convert(path, section, key, raw, allowed[key], line)

    dataset = DatasetSpec(**values.get("dataset", {}))
    split = SplitSpec(**values.get("split", {}))
    exp = values.get("experiment", {})
    methods = exp.get("methods", ["joint", "nnpu"])
    inits = exp.get("inits", ["class-prior"])
    for method in methods:
        if method not in METHODS:
            raise ConfigError(f"unknown method {method!r}; choose from {METHODS}")
    for init in inits:
        if init not in INIT_STRATEGIES:
            raise ConfigError(f"unknown init {init!r}; choose from {INIT_STRATEGIES}")
    if dataset.kind not in SYNTHETIC_KINDS:
        raise ConfigError(f"unknown dataset kind {dataset.kind!r}")

    overrides = {"": values.get("train", {})}
    for method in METHODS:
        section = f"train.{method}"
        if section in values:
            overrides[method] = values[section]
    return ExperimentConfig(
        dataset=dataset,
        split=split,
        methods=methods,
        inits=inits,
        trials=exp.get("trials", 10),
        base_seed=exp.get("base_seed", 0),
        train_overrides=overrides,
        sweep_priors=values.get("sweep", {}).get("priors"),
    )


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _write_json(path: Path, doc: dict) -> None:
    _atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    validate_json_file(path)


def validate_json_file(path: Path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: invalid JSON artifact: {exc}") from exc


def _validate_csv(path: Path, header: str) -> None:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != header:
        raise FormatError(f"{path}: expected header {header!r}")
    width = len(header.split(","))
    for lineno, line in enumerate(lines[1:], start=2):
        if len(line.split(",")) != width:
            raise FormatError(f"{path}:{lineno}: wrong field count")


def _write_trace(path: Path, trace: training.TrainingTrace) -> None:
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    training.export_trace(trace, tmp)
    os.replace(tmp, path)
    training.load_trace(path)  # schema check


def _default_out(arg_out, subdir: str) -> Path:
    base = Path(arg_out) if arg_out else Path(os.environ.get(OUTPUT_DIR_ENV, "runs"))
    out = base / subdir if arg_out is None else base
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------- generate

def cmd_generate(args) -> int:
    out = Path(args.out)
    if out.exists() and not args.force:
        print(f"error: {out} exists (use --force to overwrite)", file=sys.stderr)
        return 1
    data = generate_synthetic(args.kind, args.n, args.pi_p, noise=args.noise,
                              seed=args.seed, center=args.center, dim=args.dim)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = out.with_name(out.name + f".tmp{os.getpid()}")
    save_csv(data, tmp)
    os.replace(tmp, out)
    load_csv(out)  # schema check
    print(f"wrote {data.n} rows ({int(data.labels.sum())} positive) to {out}")
    return 0


# ------------------------------------------------------------------- train

def _single_report(method, init, seed, result, test_data) -> dict:
    report = {
        "method": method,
        "init": init,
        "seed": seed,
        "selected_epoch": result.best.epoch,
        "validation_loss": result.best.val_loss,
        "test_error": evaluation.test_error(result.best.model, test_data),
        "recovery_error_model": None,
        "recovery_error_labels": None,
    }
    train_part = result.train_part
    if method in PU_METHODS and train_part.u_truth is not None:
        sigma_u = nn.forward(result.best.model, train_part.x_u)
        report["recovery_error_model"] = evaluation.recovery_error(sigma_u, train_part.u_truth)
        if result.label_state is not None:
            report["recovery_error_labels"] = evaluation.recovery_error(
                result.label_state.y, train_part.u_truth)
    return report


def cmd_train(args) -> int:
    config = load_config(args.config)
    if args.method not in METHODS:
        raise ConfigError(f"unknown method {args.method!r}")
    init = args.init
    if args.method != "joint" and init is not None:
        print(f"warning: --init is ignored by method {args.method}", file=sys.stderr)
        init = None
    if args.method == "joint" and init is None:
        init = "class-prior"
    seed = config.base_seed if args.seed is None else args.seed
    train_cfg = dataclasses.replace(config.train_config(args.method), seed=seed)

    out = _default_out(args.out, f"train-{args.method}")
    pool = generate_synthetic(config.dataset.kind, config.dataset.n, config.dataset.pi_p,
                              noise=config.dataset.noise, seed=seed,
                              center=config.dataset.center, dim=config.dataset.dim)
    test_data = evaluation.make_test_set(config.dataset, config.split, seed)

    if args.method == "pn":
        train_data, val_data = stratified_split(pool, config.split.val_fraction, seed=seed)
        result = training.train_pn(train_cfg, train_data, val_data)
    else:
        split = make_pu_split(pool, config.split.n_p, config.split.n_u, config.split.pi_p,
                              seed=seed, val_fraction=config.split.val_fraction)
        result = training.train_pu_method(args.method, train_cfg, split, init or "class-prior")

    _write_trace(out / "trace.csv", result.trace)
    tmp_model = out / f"model.npz.tmp{os.getpid()}"
    nn.save_checkpoint(result.best.model, tmp_model)
    os.replace(tmp_model, out / "model.npz")
    nn.load_checkpoint(out / "model.npz")  # schema check
    if result.label_state is not None:
        tmp_labels = out / f"labels.csv.tmp{os.getpid()}"
        pseudo_labels.export_label_state(result.label_state, tmp_labels,
                                         truth=result.train_part.u_truth)
        os.replace(tmp_labels, out / "labels.csv")
    report = _single_report(args.method, init, seed, result, test_data)
    _write_json(out / "report.json", report)
    print(f"{args.method}: test_error={report['test_error']:.2f}% "
          f"selected_epoch={report['selected_epoch']} -> {out}")
    return 0


# --------------------------------------------------------------- benchmark

def _trial_dir(out: Path, label: str, trial: int) -> Path:
    return out / "trials" / label.replace(":", "_") / f"t{trial:03d}"


def _load_completed_trial(tdir: Path, expected_seed: int):
    report_path = tdir / "report.json"
    trace_path = tdir / "trace.csv"
    if not (report_path.exists() and trace_path.exists()):
        return None
    try:
        doc = validate_json_file(report_path)
        trace = training.load_trace(trace_path)
    except FormatError:
        return None
    if doc.get("seed") != expected_seed:
        return None
    report = evaluation.TrialReport(
        method=doc["method"], init=doc["init"], seed=doc["seed"],
        test_error=doc["test_error"],
        recovery_error_model=doc["recovery_error_model"],
        recovery_error_labels=doc["recovery_error_labels"],
        selected_epoch=doc["selected_epoch"],
    )
    return evaluation.TrialOutcome(report, trace)


def _execute_benchmark(config: ExperimentConfig, out: Path, jobs: int) -> evaluation.BenchmarkResult:
    variants = config.variants()
    for variant in variants:
        if variant.method not in PU_METHODS:
            raise ConfigError(f"benchmark compares PU methods only, got {variant.method!r}; "
                              f"train the PN oracle with the `train` command")
    test_data = evaluation.make_test_set(config.dataset, config.split, config.base_seed)

    cells = [(variant, trial) for variant in variants for trial in range(config.trials)]
    outcomes = {v.label: {} for v in variants}
    pending = []
    for variant, trial in cells:
        seed = config.base_seed + trial
        loaded = _load_completed_trial(_trial_dir(out, variant.label, trial), seed)
        if loaded is not None:
            outcomes[variant.label][trial] = loaded
        else:
            pending.append((variant, trial, seed))

    def finish(variant, trial, outcome):
        tdir = _trial_dir(out, variant.label, trial)
        tdir.mkdir(parents=True, exist_ok=True)
        _write_trace(tdir / "trace.csv", outcome.trace)
        _write_json(tdir / "report.json", dataclasses.asdict(outcome.report))
        outcomes[variant.label][trial] = outcome

    if jobs > 1 and pending:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [(variant, trial,
                        pool.submit(_worker_trial, variant, config.dataset, config.split,
                                    seed, test_data))
                       for variant, trial, seed in pending]
            for variant, trial, future in futures:
                finish(variant, trial, future.result())
    else:
        for variant, trial, seed in pending:
            split = evaluation.make_trial_split(config.dataset, config.split, seed)
            finish(variant, trial, evaluation.run_trial(variant, split, test_data, seed))

    ordered = {label: [by_trial[t] for t in range(config.trials)]
               for label, by_trial in outcomes.items()}
    aggregates = {label: evaluation.aggregate_reports(label, [o.report for o in outs])
                  for label, outs in ordered.items()}
    return evaluation.BenchmarkResult(config.dataset, config.split, config.trials,
                                      config.base_seed, variants, ordered, aggregates)


def _worker_trial(variant, dataset_spec, split_spec, seed, test_data):
    split = evaluation.make_trial_split(dataset_spec, split_spec, seed)
    return evaluation.run_trial(variant, split, test_data, seed)


def _write_benchmark_outputs(result: evaluation.BenchmarkResult, out: Path) -> None:
    _write_json(out / "aggregate.json", evaluation.benchmark_to_json(result))
    _atomic_write_text(out / "trials.csv", "\n".join(evaluation.report_csv_lines(result)) + "\n")
    _validate_csv(out / "trials.csv",
                  "label,method,init,trial,seed,test_error,recovery_error_model,"
                  "recovery_error_labels,selected_epoch")
    for label, outs in result.outcomes.items():
        name = f"loss_curve_{label.replace(':', '_')}.csv"
        _atomic_write_text(out / name, "\n".join(evaluation.loss_curve_lines(outs)) + "\n")
        _validate_csv(out / name, "epoch,train_loss_mean,train_loss_std")
    for label, agg in result.aggregates.items():
        stats = agg.metrics["test_error"]
        print(f"{label}: test_error {stats['mean']:.2f} +/- {stats['std']:.2f} "
              f"over {agg.trials} trials")


def cmd_benchmark(args) -> int:
    config = load_config(args.config)
    out = _default_out(args.out, "benchmark")
    result = _execute_benchmark(config, out, args.jobs)
    _write_benchmark_outputs(result, out)
    print(f"artifacts in {out}")
    return 0


# ------------------------------------------------------------------- sweep

def cmd_sweep(args) -> int:
    config = load_config(args.config)
    if args.priors:
        priors = [float(p) for p in args.priors.split(",")]
    elif config.sweep_priors:
        priors = config.sweep_priors
    else:
        raise ConfigError("no priors given: pass --priors or a [sweep] section")
    out = _default_out(args.out, "sweep")

    summary = {"schema": "pujoint-sweep-v1", "priors": {}}
    csv_lines = ["pi_p,label,test_error_mean,test_error_std"]
    for prior in priors:
        sub_config = dataclasses.replace(config, split=dataclasses.replace(config.split, pi_p=prior))
        sub_out = out / f"pi_{prior:g}"
        sub_out.mkdir(parents=True, exist_ok=True)
        result = _execute_benchmark(sub_config, sub_out, args.jobs)
        _write_benchmark_outputs(result, sub_out)
        summary["priors"][f"{prior:g}"] = {
            label: agg.metrics for label, agg in result.aggregates.items()
        }
        for label, agg in result.aggregates.items():
            stats = agg.metrics["test_error"]
            csv_lines.append(f"{prior:g},{label},{repr(stats['mean'])},{repr(stats['std'])}")
    _write_json(out / "sweep.json", summary)
    _atomic_write_text(out / "sweep.csv", "\n".join(csv_lines) + "\n")
    _validate_csv(out / "sweep.csv", "pi_p,label,test_error_mean,test_error_std")
    print(f"sweep artifacts in {out}")
    return 0


# -------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pujoint",
        description="PU learning by joint optimization of a classifier and noisy pseudo-labels",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic dataset as CSV")
    gen.add_argument("--kind", choices=SYNTHETIC_KINDS, required=True)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--pi-p", dest="pi_p", type=float, required=True)
    gen.add_argument("--noise", type=float, default=1.0)
    gen.add_argument("--center", type=float, default=1.0)
    gen.add_argument("--dim", type=int, default=2)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.add_argument("--force", action="store_true")
    gen.set_defaults(func=cmd_generate)

    tr = sub.add_parser("train", help="run one training and write its artifacts")
    tr.add_argument("--config", required=True)
    tr.add_argument("--method", choices=METHODS, required=True)
    tr.add_argument("--init", choices=INIT_STRATEGIES, default=None)
    tr.add_argument("--seed", type=int, default=None)
    tr.add_argument("--out", default=None)
    tr.set_defaults(func=cmd_train)

    bench = sub.add_parser("benchmark", help="paired multi-trial comparison")
    bench.add_argument("--config", required=True)
    bench.add_argument("--out", default=None)
    bench.add_argument("--jobs", type=int, default=1)
    bench.set_defaults(func=cmd_benchmark)

    sw = sub.add_parser("sweep", help="benchmark across class priors")
    sw.add_argument("--config", required=True)
    sw.add_argument("--priors", default=None, help="comma list, e.g. 0.3,0.5,0.7")
    sw.add_argument("--out", default=None)
    sw.add_argument("--jobs", type=int, default=1)
    sw.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
