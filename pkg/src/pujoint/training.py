"""Training loops: supervised PN, unbiased PU, non-negative PU, and the
joint optimization of network parameters and pseudo-labels.

Every trainer runs mini-batch AMSGrad, evaluates a validation loss after
each epoch, and reports the snapshot with the lowest validation loss. PU
trainers select by the non-negative PU risk on the validation split; the
supervised PN trainer selects by its own PN risk (it has no unlabeled pool).
All randomness derives from config.seed, so a rerun reproduces every trace
value bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import losses, nn, pseudo_labels
from .datasets import LabeledDataset, PUSplit, shuffle_batches, split_validation
from .errors import FormatError, NumericError

# Sub-stream tags keeping the independent rngs derived from one trial seed.
_MODEL_STREAM = 0x0DE1
_VAL_STREAM = 0x5B17
_LABEL_STREAM = 0x1AB3
_PN_BATCH_STREAM = 0x9A7C


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters shared by all trainers; the pseudo-label fields only
    matter for the joint method."""

    lr: float = 0.005
    num_batches: int = 10
    epochs: int = 100                 # e_end
    label_update_start: int = 20      # first epoch at which labels move
    label_window: int = 10            # rolling mean width
    lambda_init: float = 10.0
    alpha: float = 10.0
    beta: float = 2.0
    ascent_threshold: float = 0.0     # nnPU switches to ascent below this
    seed: int = 0
    surrogate: str = "sigmoid"        # for the PN/uPU/nnPU risk estimators
    clean_surrogate: str = "logistic"  # for the joint clean-positive term
    hidden: tuple[int, ...] = (32, 16)
    hidden_activation: str = "relu"

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if min(self.num_batches, self.epochs, self.label_window, self.label_update_start) < 1:
            raise ValueError("counts must be >= 1")
        if self.label_update_start < self.label_window:
            raise ValueError("label_update_start must be >= label_window")
        if self.lambda_init < 0 or self.alpha < 0 or self.beta < 0:
            raise ValueError("loss weights must be nonnegative")
        if self.surrogate not in losses.SURROGATES:
            raise ValueError(f"unknown surrogate {self.surrogate!r}")
        if self.clean_surrogate not in losses.SURROGATES:
            raise ValueError(f"unknown surrogate {self.clean_surrogate!r}")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))


@dataclass
class ModelSnapshot:
    epoch: int
    model: nn.MLPModel
    val_loss: float
    lam: float


@dataclass
class TrainingTrace:
    """Per-epoch curves; lam / mean_pseudo_label are NaN where inapplicable."""

    train_loss: np.ndarray
    val_loss: np.ndarray
    lam: np.ndarray
    mean_pseudo_label: np.ndarray
    clamp_count: np.ndarray


@dataclass
class TrainResult:
    best: ModelSnapshot
    trace: TrainingTrace
    final_model: nn.MLPModel
    train_part: object
    val_part: object
    label_state: pseudo_labels.PseudoLabelState | None = None


def export_trace(trace: TrainingTrace, path) -> None:
    """Trace as CSV with stable columns and round-trip float formatting."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,train_loss,val_loss,lambda,mean_pseudo_label,clamp_count\n")
        for e in range(trace.train_loss.size):
            fh.write(",".join([
                str(e + 1),
                repr(float(trace.train_loss[e])),
                repr(float(trace.val_loss[e])),
                repr(float(trace.lam[e])),
                repr(float(trace.mean_pseudo_label[e])),
                str(int(trace.clamp_count[e])),
            ]) + "\n")


def load_trace(path) -> TrainingTrace:
    """Read back a trace CSV written by export_trace."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "epoch,train_loss,val_loss,lambda,mean_pseudo_label,clamp_count":
            raise FormatError(f"{path}: unexpected trace header {header!r}")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    if not rows:
        raise FormatError(f"{path}: no trace rows")
    try:
        cols = list(zip(*[(float(r[1]), float(r[2]), float(r[3]), float(r[4]), int(r[5]))
                          for r in rows]))
    except (ValueError, IndexError) as exc:
        raise FormatError(f"{path}: malformed trace row: {exc}") from exc
    return TrainingTrace(
        train_loss=np.array(cols[0]),
        val_loss=np.array(cols[1]),
        lam=np.array(cols[2]),
        mean_pseudo_label=np.array(cols[3]),
        clamp_count=np.array(cols[4], dtype=np.int64),
    )


def _new_trace(epochs: int) -> TrainingTrace:
    return TrainingTrace(
        train_loss=np.full(epochs, np.nan),
        val_loss=np.full(epochs, np.nan),
        lam=np.full(epochs, np.nan),
        mean_pseudo_label=np.full(epochs, np.nan),
        clamp_count=np.zeros(epochs, dtype=np.int64),
    )


def _build_model(config: TrainConfig, dim: int) -> nn.MLPModel:
    sizes = (dim, *config.hidden, 1)
    return nn.init_mlp(sizes, seed=(_MODEL_STREAM, config.seed),
                       hidden_activation=config.hidden_activation)


def _check_val(val_loss: float) -> float:
    if not np.isfinite(val_loss):
        raise NumericError(f"validation loss is not finite: {val_loss}")
    return float(val_loss)


def _maybe_snapshot(best: ModelSnapshot | None, epoch: int, model: nn.MLPModel,
                    val_loss: float, lam: float) -> ModelSnapshot:
    if best is None or val_loss < best.val_loss:
        return ModelSnapshot(epoch, model.copy(), val_loss, lam)
    return best


def _pn_batches(n_pos: int, n_neg: int, num_batches: int, seed: int, epoch: int):
    rng = np.random.default_rng((_PN_BATCH_STREAM, seed, epoch))
    return (np.array_split(rng.permutation(n_pos), num_batches),
            np.array_split(rng.permutation(n_neg), num_batches))


def train_pn(config: TrainConfig, train_data: LabeledDataset, val_data: LabeledDataset,
             pi_p: float | None = None) -> TrainResult:
    """Supervised oracle baseline: mini-batch descent on the PN risk."""
    for name, ds in (("train", train_data), ("validation", val_data)):
        if not (np.any(ds.labels == 1) and np.any(ds.labels == 0)):
            raise ValueError(f"{name} data must contain both classes")
    pi = float(np.mean(train_data.labels)) if pi_p is None else float(pi_p)
    surrogate = losses.SURROGATES[config.surrogate]

    pos = train_data.features[train_data.labels == 1]
    neg = train_data.features[train_data.labels == 0]
    if config.num_batches > min(len(pos), len(neg)):
        raise ValueError("num_batches exceeds the smaller class count")
    val_pos = val_data.features[val_data.labels == 1]
    val_neg = val_data.features[val_data.labels == 0]

    model = _build_model(config, train_data.dim)
    opt = nn.AmsGrad(model, lr=config.lr)
    trace = _new_trace(config.epochs)
    best: ModelSnapshot | None = None

    for epoch in range(1, config.epochs + 1):
        p_parts, n_parts = _pn_batches(len(pos), len(neg), config.num_batches,
                                       config.seed, epoch)
        batch_losses = []
        for p_idx, n_idx in zip(p_parts, n_parts):
            xp, xn = pos[p_idx], neg[n_idx]
            x = np.vstack([xp, xn])
            sigma = nn.forward(model, x)
            risk = losses.pn_risk(sigma[:len(xp)], sigma[len(xp):], pi, surrogate)
            grads = nn.backward(model, x, np.concatenate([risk.grad_p, risk.grad_n]))
            opt.step(model, grads)
            batch_losses.append(risk.value)
        trace.train_loss[epoch - 1] = float(np.mean(batch_losses))
        sv = nn.forward(model, np.vstack([val_pos, val_neg]))
        val_loss = _check_val(losses.pn_risk(sv[:len(val_pos)], sv[len(val_pos):], pi, surrogate).value)
        trace.val_loss[epoch - 1] = val_loss
        best = _maybe_snapshot(best, epoch, model, val_loss, float("nan"))

    return TrainResult(best, trace, model, train_data, val_data)


def _pu_val_loss(model: nn.MLPModel, val: PUSplit, surrogate: losses.Surrogate) -> float:
    sp = nn.forward(model, val.x_p)
    su = nn.forward(model, val.x_u)
    return _check_val(losses.nnpu_risk(sp, su, val.pi_p, surrogate).value)


def _train_pu_risk(config: TrainConfig, split: PUSplit, ascent_threshold: float,
                   clamp_objective: bool) -> TrainResult:
    """Shared loop for uPU / nnPU. They differ only in when (if ever) the
    gradient ascends the correction term and in which objective the trace
    records; while no batch triggers ascent the two coincide exactly."""
    train, val = split_validation(split, seed=(_VAL_STREAM, config.seed))
    surrogate = losses.SURROGATES[config.surrogate]
    model = _build_model(config, split.dim)
    opt = nn.AmsGrad(model, lr=config.lr)
    trace = _new_trace(config.epochs)
    best: ModelSnapshot | None = None
    dummy_y = np.zeros(train.n_u)

    for epoch in range(1, config.epochs + 1):
        batch_losses = []
        triggered = 0
        for batch in shuffle_batches(train, dummy_y, config.num_batches, config.seed, epoch):
            x = np.vstack([batch.x_p, batch.x_u])
            sigma = nn.forward(model, x)
            n_p = len(batch.x_p)
            risk = losses.nnpu_risk(sigma[:n_p], sigma[n_p:], train.pi_p, surrogate,
                                    ascent_threshold=ascent_threshold)
            grads = nn.backward(model, x, np.concatenate([risk.grad_p, risk.grad_u]))
            opt.step(model, grads)
            batch_losses.append(risk.value if clamp_objective else risk.unclamped_value)
            triggered += int(risk.ascending if clamp_objective else risk.clamped)
        trace.train_loss[epoch - 1] = float(np.mean(batch_losses))
        trace.clamp_count[epoch - 1] = triggered
        val_loss = _pu_val_loss(model, val, surrogate)
        trace.val_loss[epoch - 1] = val_loss
        best = _maybe_snapshot(best, epoch, model, val_loss, float("nan"))

    return TrainResult(best, trace, model, train, val)


def train_upu(config: TrainConfig, split: PUSplit) -> TrainResult:
    """Unbiased PU baseline: plain descent on the (possibly negative) risk.
    clamp_count in the trace counts batches whose correction went negative."""
    return _train_pu_risk(config, split, ascent_threshold=-np.inf, clamp_objective=False)


def train_nnpu(config: TrainConfig, split: PUSplit) -> TrainResult:
    """Non-negative PU baseline: ascends the correction term whenever it
    falls below config.ascent_threshold."""
    return _train_pu_risk(config, split, ascent_threshold=config.ascent_threshold,
                          clamp_objective=True)


def train_joint(config: TrainConfig, split: PUSplit, init_strategy: str = "class-prior",
                epoch_callback: Callable | None = None) -> TrainResult:
    """Joint optimization of the network and the pseudo-labels on U.

    Per epoch: refresh the clean-positive weight from its linear schedule,
    shuffle into mini-batches, and per batch: take the joint-loss gradient
    with the current labels, record this model's predictions into the
    buffer, update the visited labels to their rolling mean once past
    label_update_start, then step the optimizer. Model selection uses the
    non-negative PU risk on the validation part.
    """
    if config.epochs < 2:
        raise ValueError("joint training needs epochs >= 2")
    train, val = split_validation(split, seed=(_VAL_STREAM, config.seed))
    risk_surrogate = losses.SURROGATES[config.surrogate]
    clean_surrogate = losses.SURROGATES[config.clean_surrogate]

    y0 = pseudo_labels.init_labels(init_strategy, train.n_u, train.pi_p,
                                   seed=(_LABEL_STREAM, config.seed))
    state = pseudo_labels.make_label_state(y0, config.epochs, config.label_window,
                                           config.label_update_start)
    schedule = pseudo_labels.make_lambda_schedule(config.lambda_init, train.n_p,
                                                  train.n_u, config.epochs)
    model = _build_model(config, split.dim)
    opt = nn.AmsGrad(model, lr=config.lr)
    trace = _new_trace(config.epochs)
    best: ModelSnapshot | None = None

    for epoch in range(1, config.epochs + 1):
        lam = pseudo_labels.lambda_at(schedule, epoch)
        batch_losses = []
        for batch in shuffle_batches(train, state.y, config.num_batches, config.seed, epoch):
            x = np.vstack([batch.x_p, batch.x_u])
            sigma = nn.forward(model, x)
            n_p = len(batch.x_p)
            sigma_p, sigma_u = sigma[:n_p], sigma[n_p:]
            terms = losses.joint_loss(sigma_p, sigma_u, batch.y, lam, config.alpha,
                                      config.beta, train.pi_p, clean_surrogate)
            grads = nn.backward(model, x, np.concatenate([terms.grad_p, terms.grad_u]))
            pseudo_labels.record_predictions(state, batch.u_indices, epoch, sigma_u)
            if epoch >= config.label_update_start:
                pseudo_labels.update_labels(state, batch.u_indices, epoch)
            opt.step(model, grads)
            batch_losses.append(terms.total)
        trace.train_loss[epoch - 1] = float(np.mean(batch_losses))
        trace.lam[epoch - 1] = lam
        trace.mean_pseudo_label[epoch - 1] = float(np.mean(state.y))
        val_loss = _pu_val_loss(model, val, risk_surrogate)
        trace.val_loss[epoch - 1] = val_loss
        best = _maybe_snapshot(best, epoch, model, val_loss, lam)
        if epoch_callback is not None:
            epoch_callback(epoch, state, model)

    return TrainResult(best, trace, model, train, val, label_state=state)


PU_METHODS = ("upu", "nnpu", "joint")
METHODS = ("pn",) + PU_METHODS


def train_pu_method(method: str, config: TrainConfig, split: PUSplit,
                    init_strategy: str = "class-prior") -> TrainResult:
    """Dispatch a PU trainer by name (PN needs labeled data, see train_pn)."""
    if method == "upu":
        return train_upu(config, split)
    if method == "nnpu":
        return train_nnpu(config, split)
    if method == "joint":
        return train_joint(config, split, init_strategy)
    raise ValueError(f"unknown PU method {method!r}; choose from {PU_METHODS}")
