"""The assembled pair-comparison network and its BiLSTM baseline.

Both architectures share the encoding stage: a topic BiLSTM whose final
states condition a single weight-shared utterance BiLSTM applied to both
sides of the pair. The full model runs the reason encoder on each side and
compares reason matrices; the baseline skips the reason encoder and
compares one max-pooled encoder vector per utterance. A two-layer
feed-forward softmax head produces the three class probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .attention import ReasonAttentionParams, ReasonMatrix, reason_encoder
from .classifier import ClassifierParams, Prediction, classify, compare_reasons
from .encoder import BiLstmParams, encode_topic, encode_utterance_conditional
from .errors import ShapeError
from .tensor import Tensor

CLASSES = ("Agree", "Disagree", "Neither")

ARCH_RCN = "rcn"
ARCH_BILSTM = "bilstm"


@dataclass
class PairBatch:
    """Index/mask arrays for a batch of (P, Q, topic) triples."""

    p_idx: np.ndarray
    p_mask: np.ndarray
    q_idx: np.ndarray
    q_mask: np.ndarray
    t_idx: np.ndarray
    t_mask: np.ndarray
    labels: np.ndarray | None = None

    def __len__(self) -> int:
        return self.p_idx.shape[0]

    def slice(self, lo: int, hi: int) -> "PairBatch":
        labels = self.labels[lo:hi] if self.labels is not None else None
        return PairBatch(self.p_idx[lo:hi], self.p_mask[lo:hi],
                         self.q_idx[lo:hi], self.q_mask[lo:hi],
                         self.t_idx[lo:hi], self.t_mask[lo:hi], labels)

    def take(self, order: np.ndarray) -> "PairBatch":
        labels = self.labels[order] if self.labels is not None else None
        return PairBatch(self.p_idx[order], self.p_mask[order],
                         self.q_idx[order], self.q_mask[order],
                         self.t_idx[order], self.t_mask[order], labels)


@dataclass
class ForwardResult:
    prediction: Prediction
    comparison_s: Tensor
    reasons_p: ReasonMatrix | None = None
    reasons_q: ReasonMatrix | None = None

    @property
    def logits(self) -> Tensor:
        return self.prediction.logits

    @property
    def probabilities(self) -> Tensor:
        return self.prediction.probabilities


def apply_dropout(x: Tensor, drop_prob: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: kept activations are rescaled by 1/(1-p)."""
    keep = (rng.random(x.shape) >= drop_prob) / (1.0 - drop_prob)
    return T.mul(x, Tensor(keep))


class RcnModel:
    """Parameter container plus batched forward pass."""

    def __init__(self, embeddings: np.ndarray, hidden_size: int, max_len: int,
                 topic_max_len: int, kappa: int, ff_hidden: int,
                 architecture: str = ARCH_RCN, seed: int = 0):
        if architecture not in (ARCH_RCN, ARCH_BILSTM):
            raise ValueError(f"unknown architecture {architecture!r}")
        self.embeddings = np.asarray(embeddings, dtype=T.DTYPE)
        self.hidden_size = hidden_size
        self.max_len = max_len
        self.topic_max_len = topic_max_len
        self.kappa = kappa
        self.ff_hidden = ff_hidden
        self.architecture = architecture
        rng = np.random.default_rng(seed)
        d_emb = self.embeddings.shape[1]
        self.topic_lstm = BiLstmParams.init(d_emb, hidden_size, rng)
        self.utterance_lstm = BiLstmParams.init(d_emb, hidden_size, rng)
        self.attention: ReasonAttentionParams | None = None
        if architecture == ARCH_RCN:
            self.attention = ReasonAttentionParams.init(2 * hidden_size, max_len, kappa, rng)
        self.classifier = ClassifierParams.init(4 * hidden_size, ff_hidden, rng)

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        named = self.topic_lstm.named_tensors("topic_lstm")
        named += self.utterance_lstm.named_tensors("utterance_lstm")
        if self.attention is not None:
            named += self.attention.named_tensors("attention")
        named += self.classifier.named_tensors("classifier")
        return named

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_parameters()]

    def structure(self) -> dict:
        return {
            "architecture": self.architecture,
            "hidden_size": self.hidden_size,
            "max_len": self.max_len,
            "topic_max_len": self.topic_max_len,
            "kappa": self.kappa,
            "ff_hidden": self.ff_hidden,
            "vocab_size": int(self.embeddings.shape[0]),
            "embedding_dim": int(self.embeddings.shape[1]),
        }

    def forward(self, batch: PairBatch, dropout: float = 0.0,
                rng: np.random.Generator | None = None) -> ForwardResult:
        """Run the network; dropout > 0 requires an rng and means training mode."""
        if batch.p_idx.shape[1] != self.max_len or batch.t_idx.shape[1] != self.topic_max_len:
            raise ShapeError(
                f"batch lengths {batch.p_idx.shape[1]}/{batch.t_idx.shape[1]} do not match "
                f"model lengths {self.max_len}/{self.topic_max_len}")
        if dropout > 0.0 and rng is None:
            raise ValueError("dropout requires a random generator")

        _, topic_state = encode_topic(batch.t_idx, batch.t_mask, self.embeddings,
                                      self.topic_lstm)
        enc_p = encode_utterance_conditional(batch.p_idx, batch.p_mask, self.embeddings,
                                             self.utterance_lstm, topic_state)
        enc_q = encode_utterance_conditional(batch.q_idx, batch.q_mask, self.embeddings,
                                             self.utterance_lstm, topic_state)
        if dropout > 0.0:
            enc_p.h_seq = apply_dropout(enc_p.h_seq, dropout, rng)
            enc_q.h_seq = apply_dropout(enc_q.h_seq, dropout, rng)

        reasons_p = reasons_q = None
        if self.architecture == ARCH_RCN:
            reasons_p = reason_encoder(enc_p, self.attention)
            reasons_q = reason_encoder(enc_q, self.attention)
            r_p, r_q = reasons_p.reasons, reasons_q.reasons
        else:
            r_p = T.unsqueeze_last(T.masked_max_positions(enc_p.h_seq, enc_p.mask))
            r_q = T.unsqueeze_last(T.masked_max_positions(enc_q.h_seq, enc_q.mask))

        comparison = compare_reasons(r_p, r_q)
        s = comparison.s
        if dropout > 0.0:
            s = apply_dropout(s, dropout, rng)
        return ForwardResult(prediction=classify(s, self.classifier), comparison_s=s,
                             reasons_p=reasons_p, reasons_q=reasons_q)
