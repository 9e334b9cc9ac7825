"""Pseudo-label state for unlabeled data: initial assignment, the per-epoch
prediction buffer, the rolling-window label update, and the decaying weight
schedule for the clean-positive loss term."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StateError

INIT_STRATEGIES = ("class-prior", "all-negative", "randomized-hard")


def init_labels(strategy: str, n_u: int, pi_p: float, seed: int = 0) -> np.ndarray:
    """Initial soft labels for the unlabeled pool.

    class-prior: every label equals pi_p (the constant minimizing the KL
    divergence to any ground truth with positive fraction pi_p).
    all-negative: zeros, like classifiers that treat U as N.
    randomized-hard: i.i.d. 1 with probability pi_p.
    """
    if strategy not in INIT_STRATEGIES:
        raise ValueError(f"unknown init strategy {strategy!r}; choose from {INIT_STRATEGIES}")
    if n_u < 1:
        raise ValueError("n_u must be >= 1")
    if not 0.0 < pi_p < 1.0:
        raise ValueError(f"class prior must lie in (0, 1), got {pi_p}")
    if strategy == "class-prior":
        return np.full(n_u, float(pi_p))
    if strategy == "all-negative":
        return np.zeros(n_u)
    rng = np.random.default_rng(seed)
    return (rng.random(n_u) < pi_p).astype(float)


@dataclass(frozen=True)
class LambdaSchedule:
    """Linear decay of the clean-positive weight from lambda_init at epoch 1
    down to floor = n_p / n_u at the final epoch."""

    lambda_init: float
    floor: float
    epochs: int

    def __post_init__(self):
        if self.lambda_init < 0 or self.floor < 0:
            raise ValueError("schedule values must be nonnegative")
        if self.epochs < 2:
            raise ValueError("schedule needs at least 2 epochs")


def make_lambda_schedule(lambda_init: float, n_p: int, n_u: int, epochs: int) -> LambdaSchedule:
    if n_p < 1 or n_u < 1:
        raise ValueError("n_p and n_u must be >= 1")
    return LambdaSchedule(float(lambda_init), n_p / n_u, int(epochs))


def lambda_at(schedule: LambdaSchedule, epoch: int) -> float:
    """Schedule value at a 1-based epoch; endpoints are returned exactly."""
    if not 1 <= epoch <= schedule.epochs:
        raise ValueError(f"epoch {epoch} outside [1, {schedule.epochs}]")
    if epoch == 1:
        return schedule.lambda_init
    if epoch == schedule.epochs:
        return schedule.floor
    frac = (schedule.epochs - epoch) / (schedule.epochs - 1)
    return frac * (schedule.lambda_init - schedule.floor) + schedule.floor


@dataclass
class PseudoLabelState:
    """Soft labels y plus the (n_u x epochs) buffer of recorded predictions.

    Labels only move from epoch `update_start` on, and then become the mean
    of the last `window` recorded predictions. Requiring
    update_start >= window keeps the rolling window always full.
    """

    y: np.ndarray
    predictions: np.ndarray
    window: int
    update_start: int
    recorded: np.ndarray

    @property
    def n_u(self) -> int:
        return self.y.shape[0]

    @property
    def epochs(self) -> int:
        return self.predictions.shape[1]


def make_label_state(initial_y: np.ndarray, epochs: int, window: int,
                     update_start: int) -> PseudoLabelState:
    y = np.asarray(initial_y, dtype=float).copy()
    if y.ndim != 1 or y.size == 0:
        raise ValueError("initial labels must be a nonempty vector")
    if np.any((y < 0) | (y > 1)):
        raise ValueError("initial labels must lie in [0, 1]")
    if window < 1:
        raise ValueError("window must be >= 1")
    if update_start < window:
        raise ValueError(f"update_start={update_start} < window={window}: rolling window would be unfilled")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    return PseudoLabelState(
        y=y,
        predictions=np.full((y.size, int(epochs)), np.nan),
        window=int(window),
        update_start=int(update_start),
        recorded=np.zeros(y.size, dtype=np.int64),
    )


def _check_epoch(state: PseudoLabelState, epoch: int) -> None:
    if not 1 <= epoch <= state.epochs:
        raise ValueError(f"epoch {epoch} outside [1, {state.epochs}]")


def record_predictions(state: PseudoLabelState, indices, epoch: int, sigmas) -> None:
    """Store sigma values for the given U rows at a 1-based epoch.

    Writing the same cell twice keeps the last value (defensive; each sample
    is visited once per epoch)."""
    _check_epoch(state, epoch)
    idx = np.atleast_1d(np.asarray(indices, dtype=np.int64))
    vals = np.atleast_1d(np.asarray(sigmas, dtype=float))
    if idx.shape != vals.shape:
        raise ValueError(f"{idx.size} indices for {vals.size} values")
    if np.any((idx < 0) | (idx >= state.n_u)):
        raise ValueError("sample index out of range")
    if np.any(~np.isfinite(vals)) or np.any((vals < 0) | (vals > 1)):
        raise ValueError("predictions must be finite probabilities")
    fresh = np.isnan(state.predictions[idx, epoch - 1])
    state.predictions[idx, epoch - 1] = vals
    state.recorded[idx[fresh]] += 1


def record_prediction(state: PseudoLabelState, index: int, epoch: int, sigma: float) -> None:
    record_predictions(state, [index], epoch, [sigma])


def update_labels(state: PseudoLabelState, indices, epoch: int) -> np.ndarray:
    """Replace y at the given rows by the mean of their last `window`
    recorded predictions. No-op when epoch < update_start (the caller's
    guard); raises StateError if the window has unrecorded cells."""
    _check_epoch(state, epoch)
    idx = np.atleast_1d(np.asarray(indices, dtype=np.int64))
    if np.any((idx < 0) | (idx >= state.n_u)):
        raise ValueError("sample index out of range")
    if epoch < state.update_start:
        return state.y[idx]
    lo = epoch - state.window  # window covers epochs epoch-window+1 .. epoch
    recent = state.predictions[idx, lo:epoch]
    if np.any(np.isnan(recent)):
        raise StateError(f"missing predictions in epochs {lo + 1}..{epoch} for some of {idx.tolist()}")
    state.y[idx] = recent.mean(axis=1)
    return state.y[idx]


def update_label(state: PseudoLabelState, index: int, epoch: int) -> float:
    return float(update_labels(state, [index], epoch)[0])


def export_label_state(state: PseudoLabelState, path, truth=None) -> None:
    """Label snapshot as CSV (index, y [, truth]) for recovery analysis."""
    with open(path, "w", encoding="utf-8") as fh:
        if truth is None:
            fh.write("index,y\n")
            for i, v in enumerate(state.y):
                fh.write(f"{i},{repr(float(v))}\n")
        else:
            truth = np.asarray(truth)
            if truth.shape != (state.n_u,):
                raise ValueError("truth length must match the label vector")
            fh.write("index,y,truth\n")
            for i, (v, t) in enumerate(zip(state.y, truth)):
                fh.write(f"{i},{repr(float(v))},{int(t)}\n")
