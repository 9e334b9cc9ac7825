"""Metrics and multi-trial experiment protocols.

The benchmark harness pairs methods on identical seeded data: trial t uses
seed base_seed + t to build one PU split that every method variant trains
on, so differences in the aggregates reflect methods rather than sampling.
Errors are percentages; aggregates are mean +/- sample std (n-1 denominator).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import nn, training
from .datasets import LabeledDataset, PUSplit, generate_synthetic, make_pu_split
from .errors import StateError

_TEST_STREAM = 0x7E57


def test_error(model: nn.MLPModel, test_data: LabeledDataset) -> float:
    """Percent of test points misclassified at threshold 0.5 (ties count as
    positive predictions)."""
    if test_data.n == 0:
        raise ValueError("empty test set")
    sigma = nn.forward(model, test_data.features)
    predictions = (sigma >= 0.5).astype(np.int64)
    return 100.0 * float(np.mean(predictions != test_data.labels))


def recovery_error(values, u_truth) -> float:
    """Percent of unlabeled training points whose thresholded value (final
    pseudo-label or model prediction) disagrees with the hidden truth."""
    if u_truth is None:
        raise StateError("hidden truth is not available on this split")
    values = np.asarray(values, dtype=float)
    truth = np.asarray(u_truth)
    if values.shape != truth.shape:
        raise ValueError(f"{values.shape} values against {truth.shape} truth labels")
    if values.size == 0:
        raise ValueError("empty unlabeled set")
    predictions = (values >= 0.5).astype(np.int64)
    return 100.0 * float(np.mean(predictions != truth))


@dataclass(frozen=True)
class DatasetSpec:
    """Synthetic pool generation parameters (see datasets.generate_synthetic)."""

    kind: str = "two-gaussians"
    n: int = 2600
    dim: int = 2
    center: float = 1.2
    noise: float = 1.0
    pi_p: float = 0.5
    test_n: int = 4000


@dataclass(frozen=True)
class SplitSpec:
    """PU sampling parameters for each trial."""

    n_p: int = 100
    n_u: int = 1000
    pi_p: float = 0.4
    val_fraction: float = 0.2


@dataclass(frozen=True)
class Variant:
    """One benchmark column: a method, its init strategy (joint only), and
    its hyperparameters. `label` keys all outputs."""

    label: str
    method: str
    init: str | None
    config: training.TrainConfig


@dataclass
class TrialReport:
    method: str
    init: str | None
    seed: int
    test_error: float
    recovery_error_model: float | None
    recovery_error_labels: float | None
    selected_epoch: int


@dataclass
class TrialOutcome:
    report: TrialReport
    trace: training.TrainingTrace


def make_trial_split(dataset_spec: DatasetSpec, split_spec: SplitSpec, seed: int) -> PUSplit:
    pool = generate_synthetic(dataset_spec.kind, dataset_spec.n, dataset_spec.pi_p,
                              noise=dataset_spec.noise, seed=seed,
                              center=dataset_spec.center, dim=dataset_spec.dim)
    return make_pu_split(pool, split_spec.n_p, split_spec.n_u, split_spec.pi_p,
                         seed=seed, val_fraction=split_spec.val_fraction)


def make_test_set(dataset_spec: DatasetSpec, split_spec: SplitSpec, base_seed: int) -> LabeledDataset:
    """One fixed test set per benchmark, drawn at the split's class prior."""
    return generate_synthetic(dataset_spec.kind, dataset_spec.test_n, split_spec.pi_p,
                              noise=dataset_spec.noise, seed=(_TEST_STREAM, base_seed),
                              center=dataset_spec.center, dim=dataset_spec.dim)


def split_digest(split: PUSplit) -> str:
    """Content hash of a split; paired methods must see identical digests."""
    h = hashlib.sha256()
    h.update(split.x_p.tobytes())
    h.update(split.x_u.tobytes())
    h.update(np.float64(split.pi_p).tobytes())
    if split.u_truth is not None:
        h.update(split.u_truth.tobytes())
    return h.hexdigest()


def run_trial(variant: Variant, split: PUSplit, test_data: LabeledDataset,
              seed: int) -> TrialOutcome:
    """Train one variant on one split and score it. The trial seed overrides
    the variant config's seed so pairing is by-construction."""
    config = dataclasses.replace(variant.config, seed=seed)
    result = training.train_pu_method(variant.method, config, split,
                                      init_strategy=variant.init or "class-prior")
    train_part: PUSplit = result.train_part
    err = test_error(result.best.model, test_data)
    rec_model = None
    rec_labels = None
    if train_part.u_truth is not None:
        sigma_u = nn.forward(result.best.model, train_part.x_u)
        rec_model = recovery_error(sigma_u, train_part.u_truth)
        if result.label_state is not None:
            rec_labels = recovery_error(result.label_state.y, train_part.u_truth)
    report = TrialReport(
        method=variant.method,
        init=variant.init,
        seed=seed,
        test_error=err,
        recovery_error_model=rec_model,
        recovery_error_labels=rec_labels,
        selected_epoch=result.best.epoch,
    )
    return TrialOutcome(report, result.trace)


def _run_trial_task(args):
    variant, dataset_spec, split_spec, seed, test_data = args
    split = make_trial_split(dataset_spec, split_spec, seed)
    return variant.label, seed, run_trial(variant, split, test_data, seed)


@dataclass
class MethodAggregate:
    label: str
    trials: int
    metrics: dict  # metric name -> {"mean": float, "std": float}


@dataclass
class BenchmarkResult:
    dataset_spec: DatasetSpec
    split_spec: SplitSpec
    trials: int
    base_seed: int
    variants: list
    outcomes: dict  # label -> list[TrialOutcome] ordered by trial
    aggregates: dict  # label -> MethodAggregate


def aggregate_reports(label: str, reports: list[TrialReport]) -> MethodAggregate:
    if len(reports) < 2:
        raise ValueError("need at least 2 trials to aggregate")
    metrics = {}
    for name in ("test_error", "recovery_error_model", "recovery_error_labels"):
        values = [getattr(r, name) for r in reports]
        if any(v is None for v in values):
            continue
        arr = np.array(values, dtype=float)
        metrics[name] = {"mean": float(arr.mean()), "std": float(arr.std(ddof=1))}
    return MethodAggregate(label, len(reports), metrics)


def run_benchmark(variants: list[Variant], dataset_spec: DatasetSpec,
                  split_spec: SplitSpec, trials: int = 10, base_seed: int = 0,
                  jobs: int = 1) -> BenchmarkResult:
    """Run every variant x trial cell with paired seeds and aggregate."""
    if trials < 2:
        raise ValueError("trials must be >= 2")
    labels = [v.label for v in variants]
    if len(set(labels)) != len(labels):
        raise ValueError("variant labels must be unique")
    test_data = make_test_set(dataset_spec, split_spec, base_seed)

    tasks = [(v, dataset_spec, split_spec, base_seed + t, test_data)
             for t in range(trials) for v in variants]
    outcomes: dict[str, dict[int, TrialOutcome]] = {v.label: {} for v in variants}
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for label, seed, outcome in pool.map(_run_trial_task, tasks):
                outcomes[label][seed] = outcome
    else:
        for task in tasks:
            label, seed, outcome = _run_trial_task(task)
            outcomes[label][seed] = outcome

    ordered = {label: [by_seed[base_seed + t] for t in range(trials)]
               for label, by_seed in outcomes.items()}
    aggregates = {label: aggregate_reports(label, [o.report for o in outs])
                  for label, outs in ordered.items()}
    return BenchmarkResult(dataset_spec, split_spec, trials, base_seed,
                           list(variants), ordered, aggregates)


def benchmark_to_json(result: BenchmarkResult) -> dict:
    """Nested report: experiment -> method -> trials -> metrics."""
    return {
        "schema": "pujoint-benchmark-v1",
        "experiment": {
            "dataset": dataclasses.asdict(result.dataset_spec),
            "split": dataclasses.asdict(result.split_spec),
            "trials": result.trials,
            "base_seed": result.base_seed,
        },
        "methods": {
            label: {
                "method": next(v.method for v in result.variants if v.label == label),
                "init": next(v.init for v in result.variants if v.label == label),
                "aggregates": result.aggregates[label].metrics,
                "trials": [dataclasses.asdict(o.report) for o in outs],
            }
            for label, outs in result.outcomes.items()
        },
    }


def report_csv_lines(result: BenchmarkResult) -> list[str]:
    """Flat per-trial CSV (one row per variant x trial)."""
    lines = ["label,method,init,trial,seed,test_error,recovery_error_model,"
             "recovery_error_labels,selected_epoch"]
    for label, outs in result.outcomes.items():
        for t, outcome in enumerate(outs):
            r = outcome.report
            lines.append(",".join([
                label, r.method, r.init or "", str(t), str(r.seed),
                repr(float(r.test_error)),
                "" if r.recovery_error_model is None else repr(float(r.recovery_error_model)),
                "" if r.recovery_error_labels is None else repr(float(r.recovery_error_labels)),
                str(r.selected_epoch),
            ]))
    return lines


def loss_curve_lines(outcomes: list[TrialOutcome]) -> list[str]:
    """Per-epoch mean/std of the training loss across trials (the loss-curve
    comparison shape)."""
    stack = np.stack([o.trace.train_loss for o in outcomes])
    lines = ["epoch,train_loss_mean,train_loss_std"]
    means = stack.mean(axis=0)
    stds = stack.std(axis=0, ddof=1)
    for e in range(stack.shape[1]):
        lines.append(f"{e + 1},{repr(float(means[e]))},{repr(float(stds[e]))}")
    return lines
