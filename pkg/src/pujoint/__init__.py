"""Positive-unlabeled learning by joint optimization of a sigmoid-headed MLP
and noisy pseudo-labels on the unlabeled pool, alongside the supervised PN
oracle and the unbiased / non-negative PU risk baselines."""

from .datasets import (
    LabeledDataset,
    MiniBatch,
    PUSplit,
    generate_synthetic,
    load_csv,
    load_idx,
    make_pu_split,
    save_csv,
    shuffle_batches,
    split_validation,
)
from .errors import FormatError, NumericError, ShapeError, StateError
from .evaluation import (
    BenchmarkResult,
    DatasetSpec,
    SplitSpec,
    TrialReport,
    Variant,
    recovery_error,
    run_benchmark,
    run_trial,
    test_error,
)
from .losses import (
    LOGISTIC_LOSS,
    SIGMOID_LOSS,
    SURROGATES,
    JointLossTerms,
    PURisk,
    Surrogate,
    binary_kl,
    classification_loss,
    joint_loss,
    negative_entropy,
    nnpu_risk,
    pn_risk,
    prior_alignment,
    upu_risk,
)
from .nn import AmsGrad, Gradients, MLPModel, backward, forward, init_mlp, load_checkpoint, save_checkpoint
from .pseudo_labels import (
    INIT_STRATEGIES,
    LambdaSchedule,
    PseudoLabelState,
    init_labels,
    lambda_at,
    make_label_state,
    make_lambda_schedule,
    record_prediction,
    record_predictions,
    update_label,
    update_labels,
)
from .training import (
    ModelSnapshot,
    TrainConfig,
    TrainingTrace,
    TrainResult,
    export_trace,
    train_joint,
    train_nnpu,
    train_pn,
    train_pu_method,
    train_upu,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
