#!/usr/bin/env python3
"""Joint vs nnPU on real MNIST IDX files (digits {0,2,4,6,8} as positive,
pi_p ~ 0.49, n_p=500, n_u=6000), paired over a few seeds.

Expects the four standard files under --mnist-dir (plain or .gz):
train-images-idx3-ubyte, train-labels-idx1-ubyte,
t10k-images-idx3-ubyte, t10k-labels-idx1-ubyte.
"""

import argparse
import dataclasses
import pathlib
import sys
import time

import numpy as np

from pujoint import datasets, evaluation, training
from pujoint.training import TrainConfig

POSITIVE_DIGITS = {0, 2, 4, 6, 8}

JOINT = TrainConfig(lr=0.005, num_batches=10, epochs=100, hidden=(128, 64, 32),
                    label_update_start=20, label_window=10,
                    lambda_init=10.0, alpha=10.0, beta=2.0)
NNPU = TrainConfig(lr=0.005, num_batches=10, epochs=100, hidden=(128, 64, 32))


def find_pair(root: pathlib.Path, stem: str) -> pathlib.Path:
    for name in (stem, stem + ".gz"):
        if (root / name).exists():
            return root / name
    raise FileNotFoundError(f"{stem}[.gz] not found under {root}")


def load_mnist(root: pathlib.Path):
    train = datasets.load_idx(find_pair(root, "train-images-idx3-ubyte"),
                              find_pair(root, "train-labels-idx1-ubyte"),
                              POSITIVE_DIGITS)
    test = datasets.load_idx(find_pair(root, "t10k-images-idx3-ubyte"),
                             find_pair(root, "t10k-labels-idx1-ubyte"),
                             POSITIVE_DIGITS)
    return train, test


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--mnist-dir", required=True)
    parser.add_argument("--seeds", default="1,2,3")
    parser.add_argument("--n-p", type=int, default=500)
    parser.add_argument("--n-u", type=int, default=6000)
    parser.add_argument("--pi-p", type=float, default=0.49)
    args = parser.parse_args()

    train_pool, test = load_mnist(pathlib.Path(args.mnist_dir))
    print(f"train pool: {train_pool.n} images, positive fraction "
          f"{train_pool.labels.mean():.4f}; test: {test.n}")

    results = {"joint": [], "nnpu": []}
    for seed in (int(s) for s in args.seeds.split(",")):
        t0 = time.time()
        split = datasets.make_pu_split(train_pool, args.n_p, args.n_u, args.pi_p, seed=seed)
        joint = training.train_joint(dataclasses.replace(JOINT, seed=seed), split, "class-prior")
        nnpu = training.train_nnpu(dataclasses.replace(NNPU, seed=seed), split)
        ej = evaluation.test_error(joint.best.model, test)
        en = evaluation.test_error(nnpu.best.model, test)
        results["joint"].append(ej)
        results["nnpu"].append(en)
        print(f"seed {seed}: joint {ej:.2f}%  nnpu {en:.2f}%  ({time.time() - t0:.0f}s)")

    for method, errs in results.items():
        arr = np.array(errs)
        print(f"{method}: {arr.mean():.2f} +- {arr.std(ddof=1):.2f} over {arr.size} seeds")
    return 0


if __name__ == "__main__":
    sys.exit(main())
