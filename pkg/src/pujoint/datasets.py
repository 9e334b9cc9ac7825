"""Dataset generation, ingestion, PU sampling, and mini-batching.

All sampling is exact-count (stratified): the requested class prior is
realized up to integer rounding, not in expectation. Every operation is
deterministic under its seed.
"""

from __future__ import annotations

import gzip
import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, ShapeError

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801

_BATCH_STREAM = 0xBA7C4  # namespaces the per-epoch shuffle rng


def round_half_down(x: float) -> int:
    """Round to nearest integer, ties toward zero-side (0.5 -> 0)."""
    return int(math.ceil(x - 0.5))


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix plus ground-truth {0,1} labels (1 = positive)."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels)
        if f.ndim != 2:
            raise ShapeError(f"features must be 2-d, got shape {f.shape}")
        if y.shape != (f.shape[0],):
            raise ShapeError(f"{y.shape[0] if y.ndim == 1 else y.shape} labels for {f.shape[0]} rows")
        if not np.all(np.isfinite(f)):
            raise ValueError("features contain non-finite entries")
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("labels must be 0 or 1")
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "labels", y.astype(np.int64))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class PUSplit:
    """Positive set, unlabeled set, and the class prior of the unlabeled pool.

    `u_truth` is for evaluation only; trainers must run without it (pass
    None to prove it).
    """

    x_p: np.ndarray
    x_u: np.ndarray
    pi_p: float
    u_truth: np.ndarray | None = None
    val_fraction: float = 0.2

    def __post_init__(self):
        xp = np.asarray(self.x_p, dtype=float)
        xu = np.asarray(self.x_u, dtype=float)
        if xp.ndim != 2 or xu.ndim != 2:
            raise ShapeError("x_p and x_u must be 2-d")
        if xp.shape[1] != xu.shape[1]:
            raise ShapeError(f"x_p has {xp.shape[1]} features, x_u has {xu.shape[1]}")
        if not 0.0 < self.pi_p < 1.0:
            raise ValueError(f"class prior must lie in (0, 1), got {self.pi_p}")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError(f"val_fraction must lie in (0, 1), got {self.val_fraction}")
        if self.u_truth is not None:
            t = np.asarray(self.u_truth)
            if t.shape != (xu.shape[0],):
                raise ShapeError("u_truth length must match x_u")
            if not np.all((t == 0) | (t == 1)):
                raise ValueError("u_truth must be 0 or 1")
            object.__setattr__(self, "u_truth", t.astype(np.int64))
        object.__setattr__(self, "x_p", xp)
        object.__setattr__(self, "x_u", xu)

    @property
    def n_p(self) -> int:
        return self.x_p.shape[0]

    @property
    def n_u(self) -> int:
        return self.x_u.shape[0]

    @property
    def dim(self) -> int:
        return self.x_p.shape[1]


@dataclass(frozen=True)
class MiniBatch:
    """One mini-batch: P rows, U rows, the U rows' global indices (for the
    prediction buffer), and their pseudo-labels at shuffle time."""

    x_p: np.ndarray
    x_u: np.ndarray
    u_indices: np.ndarray
    y: np.ndarray


SYNTHETIC_KINDS = ("two-gaussians", "two-moons", "rings")


def generate_synthetic(kind: str, n: int, pi_p: float, noise: float = 1.0,
                       seed: int = 0, center: float = 1.0, dim: int = 2) -> LabeledDataset:
    """Synthetic binary dataset with exactly round(n * pi_p) positives.

    two-gaussians: positives N(+center * 1, noise^2 I), negatives mirrored,
    any `dim`. two-moons / rings: the usual 2-d toys, `noise` is the jitter.
    """
    if kind not in SYNTHETIC_KINDS:
        raise ValueError(f"unknown synthetic kind {kind!r}; choose from {SYNTHETIC_KINDS}")
    if n < 2:
        raise ValueError("need n >= 2")
    if not 0.0 < pi_p < 1.0:
        raise ValueError(f"class prior must lie in (0, 1), got {pi_p}")
    if noise < 0:
        raise ValueError("noise must be nonnegative")
    n_pos = round_half_down(n * pi_p)
    n_neg = n - n_pos
    if n_pos < 1 or n_neg < 1:
        raise ValueError(f"degenerate split: {n_pos} positives / {n_neg} negatives")

    rng = np.random.default_rng(seed)
    if kind == "two-gaussians":
        if dim < 1:
            raise ValueError("dim must be >= 1")
        mu = np.full(dim, float(center))
        pos = rng.normal(size=(n_pos, dim)) * noise + mu
        neg = rng.normal(size=(n_neg, dim)) * noise - mu
    elif kind == "two-moons":
        if dim != 2:
            raise ValueError("two-moons is 2-d")
        tp = rng.uniform(0.0, np.pi, size=n_pos)
        tn = rng.uniform(0.0, np.pi, size=n_neg)
        pos = np.column_stack([np.cos(tp), np.sin(tp)])
        neg = np.column_stack([1.0 - np.cos(tn), 0.5 - np.sin(tn)])
        pos += rng.normal(size=pos.shape) * noise
        neg += rng.normal(size=neg.shape) * noise
    else:  # rings
        if dim != 2:
            raise ValueError("rings is 2-d")
        tp = rng.uniform(0.0, 2.0 * np.pi, size=n_pos)
        tn = rng.uniform(0.0, 2.0 * np.pi, size=n_neg)
        pos = 0.5 * np.column_stack([np.cos(tp), np.sin(tp)])
        neg = 1.0 * np.column_stack([np.cos(tn), np.sin(tn)])
        pos += rng.normal(size=pos.shape) * noise
        neg += rng.normal(size=neg.shape) * noise

    features = np.vstack([pos, neg])
    labels = np.concatenate([np.ones(n_pos, dtype=np.int64), np.zeros(n_neg, dtype=np.int64)])
    order = rng.permutation(n)
    return LabeledDataset(features[order], labels[order])


def make_pu_split(data: LabeledDataset, n_p: int, n_u: int, pi_p: float,
                  seed: int = 0, val_fraction: float = 0.2) -> PUSplit:
    """Case-control PU sampling without replacement: X_p from positives only,
    X_u stratified so its hidden positive fraction is pi_p up to rounding.
    X_p and X_u are disjoint."""
    if n_p < 1 or n_u < 1:
        raise ValueError("n_p and n_u must be >= 1")
    if not 0.0 < pi_p < 1.0:
        raise ValueError(f"class prior must lie in (0, 1), got {pi_p}")
    n_u_pos = round_half_down(n_u * pi_p)
    n_u_neg = n_u - n_u_pos

    pos_idx = np.flatnonzero(data.labels == 1)
    neg_idx = np.flatnonzero(data.labels == 0)
    if pos_idx.size < n_p + n_u_pos:
        raise ValueError(
            f"need {n_p + n_u_pos} positives (n_p={n_p} plus {n_u_pos} hidden), have {pos_idx.size}")
    if neg_idx.size < n_u_neg:
        raise ValueError(f"need {n_u_neg} negatives for the unlabeled pool, have {neg_idx.size}")

    rng = np.random.default_rng(seed)
    pos_perm = rng.permutation(pos_idx)
    neg_perm = rng.permutation(neg_idx)
    p_rows = pos_perm[:n_p]
    u_rows = np.concatenate([pos_perm[n_p:n_p + n_u_pos], neg_perm[:n_u_neg]])
    u_order = rng.permutation(n_u)
    u_rows = u_rows[u_order]
    return PUSplit(
        x_p=data.features[p_rows],
        x_u=data.features[u_rows],
        pi_p=float(pi_p),
        u_truth=data.labels[u_rows],
        val_fraction=val_fraction,
    )


def validation_indices(n_p: int, n_u: int, fraction: float, seed: int):
    """Disjoint, exhaustive train/validation index partition of P and U,
    both cut at the same fraction (round-nearest, ties down)."""
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    n_val_p = round_half_down(n_p * fraction)
    n_val_u = round_half_down(n_u * fraction)
    if min(n_val_p, n_val_u) < 1 or n_val_p >= n_p or n_val_u >= n_u:
        raise ValueError(
            f"fraction {fraction} gives an empty partition (P {n_val_p}/{n_p}, U {n_val_u}/{n_u})")
    rng = np.random.default_rng(seed)
    p_perm = rng.permutation(n_p)
    u_perm = rng.permutation(n_u)
    return (np.sort(p_perm[n_val_p:]), np.sort(p_perm[:n_val_p]),
            np.sort(u_perm[n_val_u:]), np.sort(u_perm[:n_val_u]))


def stratified_split(data: LabeledDataset, fraction: float, seed: int = 0):
    """Partition a labeled dataset into (train, validation) with each class
    cut at the same fraction; both parts keep both classes."""
    pos = np.flatnonzero(data.labels == 1)
    neg = np.flatnonzero(data.labels == 0)
    if pos.size == 0 or neg.size == 0:
        raise ValueError("both classes must be present")
    p_tr, p_va, n_tr, n_va = validation_indices(pos.size, neg.size, fraction, seed)
    train_idx = np.concatenate([pos[p_tr], neg[n_tr]])
    val_idx = np.concatenate([pos[p_va], neg[n_va]])
    return (LabeledDataset(data.features[train_idx], data.labels[train_idx]),
            LabeledDataset(data.features[val_idx], data.labels[val_idx]))


def split_validation(split: PUSplit, fraction: float | None = None, seed: int = 0):
    """Partition a PUSplit into (train, validation) parts."""
    fraction = split.val_fraction if fraction is None else fraction
    p_tr, p_va, u_tr, u_va = validation_indices(split.n_p, split.n_u, fraction, seed)
    truth = split.u_truth

    def part(p_idx, u_idx):
        return PUSplit(
            x_p=split.x_p[p_idx],
            x_u=split.x_u[u_idx],
            pi_p=split.pi_p,
            u_truth=None if truth is None else truth[u_idx],
            val_fraction=fraction,
        )

    return part(p_tr, u_tr), part(p_va, u_va)


def shuffle_batches(split: PUSplit, pseudo_labels: np.ndarray, num_batches: int,
                    seed: int, epoch: int) -> list[MiniBatch]:
    """Deal P and U into `num_batches` mini-batches for one epoch.

    Every sample appears exactly once; batch sizes stay proportional to
    n_p : n_u. The permutation depends on both seed and epoch.
    """
    if num_batches < 1:
        raise ValueError("num_batches must be >= 1")
    if num_batches > min(split.n_p, split.n_u):
        raise ValueError(
            f"num_batches={num_batches} exceeds min(n_p, n_u)={min(split.n_p, split.n_u)}")
    y = np.asarray(pseudo_labels, dtype=float)
    if y.shape != (split.n_u,):
        raise ShapeError(f"pseudo-labels have shape {y.shape}, expected {(split.n_u,)}")

    rng = np.random.default_rng((_BATCH_STREAM, seed, epoch))
    p_parts = np.array_split(rng.permutation(split.n_p), num_batches)
    u_parts = np.array_split(rng.permutation(split.n_u), num_batches)
    return [
        MiniBatch(
            x_p=split.x_p[p_part],
            x_u=split.x_u[u_part],
            u_indices=u_part,
            y=y[u_part].copy(),
        )
        for p_part, u_part in zip(p_parts, u_parts)
    ]


def _read_be_u32(fh, path, what: str) -> int:
    raw = fh.read(4)
    if len(raw) != 4:
        raise FormatError(f"{path}: truncated while reading {what}")
    return struct.unpack(">I", raw)[0]


def _open_idx(path):
    return gzip.open(path, "rb") if str(path).endswith(".gz") else open(path, "rb")


def load_idx(images_path, labels_path, positive_class_set) -> LabeledDataset:
    """Load an IDX image/label pair (MNIST layout), scale pixels to [0, 1],
    and binarize labels: digit in positive_class_set -> 1, else 0."""
    positive = {int(c) for c in positive_class_set}
    with _open_idx(images_path) as fh:
        magic = _read_be_u32(fh, images_path, "magic")
        if magic != IDX_IMAGE_MAGIC:
            raise FormatError(f"{images_path}: bad image magic 0x{magic:08x}")
        count = _read_be_u32(fh, images_path, "count")
        rows = _read_be_u32(fh, images_path, "rows")
        cols = _read_be_u32(fh, images_path, "cols")
        raw = fh.read(count * rows * cols)
        if len(raw) != count * rows * cols:
            raise FormatError(f"{images_path}: truncated pixel data")
        pixels = np.frombuffer(raw, dtype=np.uint8).reshape(count, rows * cols)
    with _open_idx(labels_path) as fh:
        magic = _read_be_u32(fh, labels_path, "magic")
        if magic != IDX_LABEL_MAGIC:
            raise FormatError(f"{labels_path}: bad label magic 0x{magic:08x}")
        label_count = _read_be_u32(fh, labels_path, "count")
        raw = fh.read(label_count)
        if len(raw) != label_count:
            raise FormatError(f"{labels_path}: truncated label data")
        digits = np.frombuffer(raw, dtype=np.uint8)
    if label_count != count:
        raise FormatError(f"image/label count mismatch: {count} images, {label_count} labels")
    features = pixels.astype(float) / 255.0
    labels = np.isin(digits, sorted(positive)).astype(np.int64)
    return LabeledDataset(features, labels)


def save_csv(data: LabeledDataset, path) -> None:
    """Write the dataset as CSV: header `label,x0,...`, shortest round-trip
    float formatting so a reload is bit-exact."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("label," + ",".join(f"x{i}" for i in range(data.dim)) + "\n")
        for label, row in zip(data.labels, data.features):
            fh.write(str(int(label)) + "," + ",".join(repr(float(v)) for v in row) + "\n")


def load_csv(path) -> LabeledDataset:
    """Read the CSV schema written by save_csv: one `label` column of {0,1},
    all other columns numeric features (order preserved)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header:
            raise FormatError(f"{path}: empty file")
        columns = header.split(",")
        if "label" not in columns:
            raise FormatError(f"{path}: no `label` column in header {columns}")
        label_col = columns.index("label")
        feat_cols = [i for i in range(len(columns)) if i != label_col]
        features, labels = [], []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(columns):
                raise FormatError(f"{path}:{lineno}: {len(parts)} fields, header has {len(columns)}")
            try:
                lab = float(parts[label_col])
                row = [float(parts[i]) for i in feat_cols]
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
            if lab not in (0.0, 1.0):
                raise FormatError(f"{path}:{lineno}: label must be 0 or 1, got {parts[label_col]}")
            labels.append(int(lab))
            features.append(row)
    if not features:
        raise FormatError(f"{path}: no data rows")
    return LabeledDataset(np.array(features, dtype=float), np.array(labels, dtype=np.int64))
