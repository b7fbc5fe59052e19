"""Reason-wise stance comparison and the three-class classifier head.

Every pair of reason columns between the two utterances is compared with
elementwise multiplication and squared difference; each family is global
max-pooled so the strongest signal per dimension survives, and the
concatenation feeds a two-layer feed-forward network with a softmax output.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import tensor as T
from .errors import DataError, ShapeError
from .tensor import Tensor

N_CLASSES = 3
PROB_FLOOR = 1e-12


@dataclass
class ComparisonVector:
    """Pooled multiplicative and subtractive comparisons plus their concat."""

    s_mul: Tensor
    s_sub: Tensor
    s: Tensor


@dataclass
class ClassifierParams:
    """Two feed-forward layers; the output layer has exactly 3 units."""

    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor

    @classmethod
    def init(cls, input_size: int, hidden_size: int, rng: np.random.Generator) -> "ClassifierParams":
        bound1 = 1.0 / np.sqrt(input_size)
        bound2 = 1.0 / np.sqrt(hidden_size)
        return cls(
            w1=T.parameter(rng.uniform(-bound1, bound1, size=(input_size, hidden_size))),
            b1=T.parameter(np.zeros(hidden_size)),
            w2=T.parameter(rng.uniform(-bound2, bound2, size=(hidden_size, N_CLASSES))),
            b2=T.parameter(np.zeros(N_CLASSES)),
        )

    def named_tensors(self, prefix: str) -> list[tuple[str, Tensor]]:
        return [(f"{prefix}.w1", self.w1), (f"{prefix}.b1", self.b1),
                (f"{prefix}.w2", self.w2), (f"{prefix}.b2", self.b2)]


@dataclass
class Prediction:
    logits: Tensor
    probabilities: Tensor


def compare_reasons(reasons_p: Tensor, reasons_q: Tensor) -> ComparisonVector:
    """Compare every (i, j) reason pair and max-pool each comparison family.

    Inputs are (..., 2h, kappa); the output s is (..., 4h).
    """
    if reasons_p.shape != reasons_q.shape:
        raise ShapeError(f"reason matrices differ: {reasons_p.shape} vs {reasons_q.shape}")
    kappa = reasons_p.shape[-1]
    cols_p = [T.index_last(reasons_p, i) for i in range(kappa)]
    cols_q = [T.index_last(reasons_q, j) for j in range(kappa)]
    muls = [T.elementwise_binary("mul", p, q) for p in cols_p for q in cols_q]
    subs = [T.elementwise_binary("sub_square", p, q) for p in cols_p for q in cols_q]
    s_mul = T.global_max_pool(muls)
    s_sub = T.global_max_pool(subs)
    return ComparisonVector(s_mul=s_mul, s_sub=s_sub, s=T.concat_last([s_mul, s_sub]))


def classify(s: Tensor, params: ClassifierParams) -> Prediction:
    """ReLU hidden layer, linear output layer, softmax over the 3 classes."""
    hidden = T.relu_map(T.add_bias(T.matmul(s, params.w1), params.b1))
    logits = T.add_bias(T.matmul(hidden, params.w2), params.b2)
    return Prediction(logits=logits, probabilities=T.softmax_rows(logits))


def one_hot(labels: Sequence[int] | np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1 or not np.isin(labels, range(N_CLASSES)).all():
        raise DataError(f"labels must be integers in [0, {N_CLASSES}), got {labels!r}")
    out = np.zeros((labels.size, N_CLASSES), dtype=T.DTYPE)
    out[np.arange(labels.size), labels] = 1.0
    return out


def l2_penalty(trainable: Sequence[Tensor]) -> Tensor | None:
    """Sum of squares of every given parameter scalar; None when empty."""
    penalty = None
    for theta in trainable:
        term = T.sum_all(T.mul(theta, theta))
        penalty = term if penalty is None else T.add(penalty, term)
    return penalty


def cross_entropy_loss(probabilities: Tensor, labels, trainable: Sequence[Tensor],
                       l2: float) -> Tensor:
    """Summed cross-entropy over the batch plus l2 * sum of squared parameters.

    Probabilities are clamped at 1e-12 before the log so saturated softmax
    outputs cannot produce infinities.
    """
    targets = one_hot(labels)
    if probabilities.shape != targets.shape:
        raise ShapeError(f"predictions {probabilities.shape} do not match "
                         f"{targets.shape[0]} labels")
    nll = T.scale(T.sum_all(T.mul(Tensor(targets), T.log_clamped(probabilities, PROB_FLOOR))), -1.0)
    penalty = l2_penalty(trainable) if l2 != 0.0 else None
    if penalty is None:
        return nll
    return T.add(nll, T.scale(penalty, l2))
