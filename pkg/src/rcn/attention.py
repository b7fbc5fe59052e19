"""Reason encoder: multi-dimensional self-attention over encoder states.

Per utterance, a bilinear pairwise relatedness matrix feeds a learned
position-to-reason map, producing kappa attention columns over positions;
each reason encoding is the attention-weighted sum of the encoder states.

All matrix products here request ordered accumulation so results are
reproducible bit-for-bit against reference scalar loops.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .encoder import EncodedSequence
from .errors import ShapeError
from .tensor import Tensor


@dataclass
class ReasonAttentionParams:
    """Bilinear relatedness w1 (2h, 2h), position map w2 (L, kappa), bias b."""

    w1: Tensor
    w2: Tensor
    b: Tensor
    kappa: int

    @classmethod
    def init(cls, twice_hidden: int, max_len: int, kappa: int,
             rng: np.random.Generator) -> "ReasonAttentionParams":
        """w1 small uniform; w2 and b zero, so attention starts near-uniform."""
        if kappa < 1:
            raise ValueError("kappa must be >= 1")
        return cls(
            w1=T.parameter(rng.uniform(-0.01, 0.01, size=(twice_hidden, twice_hidden))),
            w2=T.parameter(np.zeros((max_len, kappa))),
            b=T.parameter(np.zeros(kappa)),
            kappa=kappa,
        )

    def named_tensors(self, prefix: str) -> list[tuple[str, Tensor]]:
        return [(f"{prefix}.w1", self.w1), (f"{prefix}.w2", self.w2), (f"{prefix}.b", self.b)]


@dataclass
class ReasonMatrix:
    """Intermediate and final products of the reason encoder for one batch."""

    relatedness: Tensor   # (B, L, L), masked cells 0
    scores: Tensor        # (B, L, kappa), masked rows at the -inf surrogate
    attention: Tensor     # (B, L, kappa), columns sum to 1 over unmasked rows
    reasons: Tensor       # (B, 2h, kappa)


def _mask_outer(mask: np.ndarray) -> np.ndarray:
    m = mask.astype(T.DTYPE)
    return m[..., :, None] * m[..., None, :]


def pairwise_relatedness(enc: EncodedSequence, w1: Tensor) -> Tensor:
    """c_ij = tanh(h_i^T W1 h_j); cells with a masked i or j are exactly 0."""
    h_seq = enc.h_seq
    if w1.shape != (h_seq.shape[-1], h_seq.shape[-1]):
        raise ShapeError(f"w1 shape {w1.shape} does not match state width {h_seq.shape[-1]}")
    raw = T.matmul(T.matmul(h_seq, w1, ordered=True), T.transpose_last2(h_seq), ordered=True)
    return T.mul(T.tanh_map(raw), Tensor(_mask_outer(enc.mask)))


def reason_scores(relatedness: Tensor, params: ReasonAttentionParams,
                  mask: np.ndarray) -> Tensor:
    """e_ik = sum_j c_ij * w2[j, k] + b[k]; masked rows get the -inf surrogate."""
    length = relatedness.shape[-1]
    if params.w2.shape[0] != length:
        raise ShapeError(f"w2 has {params.w2.shape[0]} position rows, "
                         f"sequence length is {length}")
    scores = T.add_bias(T.matmul(relatedness, params.w2, ordered=True), params.b)
    surrogate = ((mask.astype(T.DTYPE) - 1.0) * -T.NEG_INF)[..., None]
    return T.add(scores, Tensor(np.broadcast_to(surrogate, scores.shape).copy()))


def attention_weights(scores: Tensor, mask: np.ndarray) -> Tensor:
    """Per-reason softmax over positions; masked positions are exactly 0."""
    return T.softmax_cols(scores, mask)


def reason_matrix(enc: EncodedSequence, attention: Tensor) -> Tensor:
    """r_k = sum_i A[i, k] * h_i, stacked into a (2h, kappa) matrix per item."""
    if attention.shape[-2] != enc.h_seq.shape[-2]:
        raise ShapeError(f"attention rows {attention.shape} do not match "
                         f"sequence length {enc.h_seq.shape}")
    return T.matmul(T.transpose_last2(enc.h_seq), attention, ordered=True)


def reason_encoder(enc: EncodedSequence, params: ReasonAttentionParams) -> ReasonMatrix:
    relatedness = pairwise_relatedness(enc, params.w1)
    scores = reason_scores(relatedness, params, enc.mask)
    attention = attention_weights(scores, enc.mask)
    reasons = reason_matrix(enc, attention)
    return ReasonMatrix(relatedness=relatedness, scores=scores,
                        attention=attention, reasons=reasons)
