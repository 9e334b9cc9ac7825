"""Risk estimators and loss terms for PN / PU / joint noisy-label training.

Every operation returns its scalar value together with the per-sample
gradient w.r.t. the network probabilities, so trainers can feed `nn.backward`
directly. Convention throughout: sigma(x) estimates P(Y=1|x).

Surrogate losses l+ / l- are configurable. The risk estimators default to the
sigmoid loss (l+ = 1 - s, l- = s); the clean-positive term of the joint
classification loss defaults to -log s so it matches the KL term it sits
next to.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import ShapeError

# Probabilities are clamped to [CLAMP_EPS, 1 - CLAMP_EPS] before any log.
CLAMP_EPS = 1e-7

_TINY = np.finfo(float).tiny


def clamp_probs(s):
    return np.clip(s, CLAMP_EPS, 1.0 - CLAMP_EPS)


@dataclass(frozen=True)
class Surrogate:
    """Per-sample losses for positive (l+) and negative (l-) treatment.

    l+ must be nonincreasing and l- nondecreasing in sigma; both nonnegative.
    """

    name: str
    pos: Callable[[np.ndarray], np.ndarray]
    dpos: Callable[[np.ndarray], np.ndarray]
    neg: Callable[[np.ndarray], np.ndarray]
    dneg: Callable[[np.ndarray], np.ndarray]


SIGMOID_LOSS = Surrogate(
    name="sigmoid",
    pos=lambda s: 1.0 - s,
    dpos=lambda s: -np.ones_like(s),
    neg=lambda s: np.asarray(s, dtype=float).copy(),
    dneg=lambda s: np.ones_like(s),
)

LOGISTIC_LOSS = Surrogate(
    name="logistic",
    pos=lambda s: -np.log(clamp_probs(s)),
    dpos=lambda s: -1.0 / clamp_probs(s),
    neg=lambda s: -np.log(1.0 - clamp_probs(s)),
    dneg=lambda s: 1.0 / (1.0 - clamp_probs(s)),
)

SURROGATES = {s.name: s for s in (SIGMOID_LOSS, LOGISTIC_LOSS)}


def _as_probs(name: str, s) -> np.ndarray:
    arr = np.asarray(s, dtype=float)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be 1-d, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    return arr


def _check_prior(pi_p: float) -> float:
    pi_p = float(pi_p)
    if not 0.0 < pi_p < 1.0:
        raise ValueError(f"class prior must lie in (0, 1), got {pi_p}")
    return pi_p


def binary_kl(y, s):
    """KL divergence between the two-point distributions [y, 1-y] and
    [s, 1-s], elementwise, with 0 log 0 = 0 and s clamped away from {0, 1}.

    Written as y*(log y - log s) + (1-y)*(log(1-y) - log(1-s)) so degenerate
    labels reduce bitwise to the matching cross-entropy term.
    """
    y = np.asarray(y, dtype=float)
    s = clamp_probs(np.asarray(s, dtype=float))
    pos = np.where(y > 0.0, y * (np.log(np.maximum(y, _TINY)) - np.log(s)), 0.0)
    neg = np.where(y < 1.0, (1.0 - y) * (np.log(np.maximum(1.0 - y, _TINY)) - np.log(1.0 - s)), 0.0)
    out = pos + neg
    return float(out) if out.ndim == 0 else out


def binary_kl_grad(y, s):
    """d binary_kl / d s, elementwise (on clamped s)."""
    y = np.asarray(y, dtype=float)
    s = clamp_probs(np.asarray(s, dtype=float))
    out = -y / s + (1.0 - y) / (1.0 - s)
    return float(out) if out.ndim == 0 else out


class PNRisk(NamedTuple):
    value: float
    grad_p: np.ndarray
    grad_n: np.ndarray


def pn_risk(sigma_p, sigma_n, pi_p, surrogate: Surrogate = SIGMOID_LOSS) -> PNRisk:
    """Supervised risk: pi_p * mean l+(sigma_p) + pi_n * mean l-(sigma_n)."""
    sp = _as_probs("sigma_p", sigma_p)
    sn = _as_probs("sigma_n", sigma_n)
    pi_p = _check_prior(pi_p)
    pi_n = 1.0 - pi_p
    value = pi_p * np.mean(surrogate.pos(sp)) + pi_n * np.mean(surrogate.neg(sn))
    grad_p = (pi_p / sp.size) * surrogate.dpos(sp)
    grad_n = (pi_n / sn.size) * surrogate.dneg(sn)
    return PNRisk(float(value), grad_p, grad_n)


class PULoss(NamedTuple):
    value: float
    grad_p: np.ndarray
    grad_u: np.ndarray


def _pu_terms(sp, su, pi_p, surrogate):
    """Positive term and correction of the PU decomposition; uPU's value is
    their plain sum, nnPU clamps the correction. One code path keeps the two
    estimators bitwise identical whenever the correction is nonnegative."""
    positive_term = pi_p * float(np.mean(surrogate.pos(sp)))
    correction = float(np.mean(surrogate.neg(su)) - pi_p * np.mean(surrogate.neg(sp)))
    return positive_term, correction


def _pu_descent_grads(sp, su, pi_p, surrogate):
    grad_p = (pi_p / sp.size) * (surrogate.dpos(sp) - surrogate.dneg(sp))
    grad_u = surrogate.dneg(su) / su.size
    return grad_p, grad_u


def upu_risk(sigma_p, sigma_u, pi_p, surrogate: Surrogate = SIGMOID_LOSS) -> PULoss:
    """Unbiased PU risk. The negative-class term is rewritten through the
    unlabeled pool: pi_p * mean l+(P) + mean l-(U) - pi_p * mean l-(P).
    Can be negative on flexible models."""
    sp = _as_probs("sigma_p", sigma_p)
    su = _as_probs("sigma_u", sigma_u)
    pi_p = _check_prior(pi_p)
    positive_term, correction = _pu_terms(sp, su, pi_p, surrogate)
    grad_p, grad_u = _pu_descent_grads(sp, su, pi_p, surrogate)
    return PULoss(positive_term + correction, grad_p, grad_u)


@dataclass(frozen=True)
class PURisk:
    """Non-negative PU risk split into its positive term and correction.

    value = positive_term + max(0, correction); `clamped` flags a negative
    correction. When the correction falls below the ascent threshold the
    gradients point along ASCENT of the correction term only (i.e. descent
    on -correction), which is what keeps flexible models from overfitting.
    """

    positive_term: float
    correction: float
    clamped: bool
    ascending: bool
    grad_p: np.ndarray
    grad_u: np.ndarray

    @property
    def value(self) -> float:
        return self.positive_term + max(0.0, self.correction)

    @property
    def unclamped_value(self) -> float:
        return self.positive_term + self.correction


def nnpu_risk(sigma_p, sigma_u, pi_p, surrogate: Surrogate = SIGMOID_LOSS,
              ascent_threshold: float = 0.0) -> PURisk:
    sp = _as_probs("sigma_p", sigma_p)
    su = _as_probs("sigma_u", sigma_u)
    pi_p = _check_prior(pi_p)
    positive_term, correction = _pu_terms(sp, su, pi_p, surrogate)
    ascending = correction < ascent_threshold
    if ascending:
        # descend on -(mean l-(U) - pi_p mean l-(P))
        grad_p = (pi_p / sp.size) * surrogate.dneg(sp)
        grad_u = -surrogate.dneg(su) / su.size
    else:
        grad_p, grad_u = _pu_descent_grads(sp, su, pi_p, surrogate)
    return PURisk(positive_term, correction, correction < 0.0, ascending, grad_p, grad_u)


def classification_loss(sigma_p, sigma_u, y, lam,
                        clean_surrogate: Surrogate = LOGISTIC_LOSS) -> PULoss:
    """lam * mean l+(sigma_p) + mean_i KL([y_i,1-y_i] || [sigma_u_i, .]).

    `y` are the current pseudo-labels of the unlabeled batch; `lam` is the
    decaying weight on the clean positive term.
    """
    sp = _as_probs("sigma_p", sigma_p)
    su = _as_probs("sigma_u", sigma_u)
    y = np.asarray(y, dtype=float)
    if y.shape != su.shape:
        raise ShapeError(f"pseudo-labels have shape {y.shape}, sigma_u has {su.shape}")
    lam = float(lam)
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    value = lam * np.mean(clean_surrogate.pos(sp)) + np.mean(binary_kl(y, su))
    grad_p = (lam / sp.size) * clean_surrogate.dpos(sp)
    grad_u = binary_kl_grad(y, su) / su.size
    return PULoss(float(value), grad_p, grad_u)


class RegLoss(NamedTuple):
    value: float
    grad_u: np.ndarray


def prior_alignment(sigma_u, pi_p) -> RegLoss:
    """KL from the class-prior distribution to the batch-mean prediction,
    binary_kl(pi_p, mean sigma_u). Zero iff the batch mean matches the prior."""
    su = _as_probs("sigma_u", sigma_u)
    pi_p = _check_prior(pi_p)
    m = float(clamp_probs(np.mean(su)))
    value = binary_kl(pi_p, m)
    grad_u = np.full(su.size, (-pi_p / m + (1.0 - pi_p) / (1.0 - m)) / su.size)
    return RegLoss(float(value), grad_u)


def negative_entropy(sigma_u) -> RegLoss:
    """mean_i [s log s + (1-s) log(1-s)]; always <= 0, maximal (0) at hard
    predictions, so minimizing it pushes outputs toward {0, 1}."""
    su = clamp_probs(_as_probs("sigma_u", sigma_u))
    value = np.mean(su * np.log(su) + (1.0 - su) * np.log(1.0 - su))
    grad_u = (np.log(su) - np.log(1.0 - su)) / su.size
    return RegLoss(float(value), grad_u)


@dataclass(frozen=True)
class JointLossTerms:
    """Joint objective: classification + alpha * prior_kl + beta * entropy."""

    classification: float
    prior_kl: float
    entropy: float
    total: float
    lam: float
    alpha: float
    beta: float
    grad_p: np.ndarray
    grad_u: np.ndarray


def joint_loss(sigma_p, sigma_u, y, lam, alpha, beta, pi_p,
               clean_surrogate: Surrogate = LOGISTIC_LOSS) -> JointLossTerms:
    alpha = float(alpha)
    beta = float(beta)
    if alpha < 0 or beta < 0:
        raise ValueError("regularizer weights must be nonnegative")
    cls = classification_loss(sigma_p, sigma_u, y, lam, clean_surrogate)
    r1 = prior_alignment(sigma_u, pi_p)
    r2 = negative_entropy(sigma_u)
    total = cls.value + alpha * r1.value + beta * r2.value
    grad_u = cls.grad_u + alpha * r1.grad_u + beta * r2.grad_u
    return JointLossTerms(
        classification=cls.value,
        prior_kl=r1.value,
        entropy=r2.value,
        total=float(total),
        lam=float(lam),
        alpha=alpha,
        beta=beta,
        grad_p=cls.grad_p,
        grad_u=grad_u,
    )
