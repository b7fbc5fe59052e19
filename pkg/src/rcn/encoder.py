"""BiLSTM sequence encoding with topic conditioning.

Sequences are batched as (B, L, d) embeddings with boolean masks. Padded
steps freeze the recurrent state (h = m*h_new + (1-m)*h_prev), so the
backward direction effectively runs over the reversed unmasked prefix only
and padding cannot perturb any real position. Output rows at padded
positions are zeroed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import DegenerateInputError, ShapeError
from .tensor import Tensor


@dataclass
class LstmParams:
    """Gate weights and biases for one direction."""

    hidden_size: int
    w_i: Tensor
    u_i: Tensor
    b_i: Tensor
    w_f: Tensor
    u_f: Tensor
    b_f: Tensor
    w_o: Tensor
    u_o: Tensor
    b_o: Tensor
    w_c: Tensor
    u_c: Tensor
    b_c: Tensor

    @classmethod
    def init(cls, input_size: int, hidden_size: int, rng: np.random.Generator) -> "LstmParams":
        """Uniform [-1/sqrt(h), 1/sqrt(h)] gate weights; forget bias +1."""
        bound = 1.0 / np.sqrt(hidden_size)

        def weight(rows, cols):
            return T.parameter(rng.uniform(-bound, bound, size=(rows, cols)))

        def bias(extra=0.0):
            return T.parameter(rng.uniform(-bound, bound, size=hidden_size) + extra)

        return cls(
            hidden_size=hidden_size,
            w_i=weight(input_size, hidden_size), u_i=weight(hidden_size, hidden_size), b_i=bias(),
            w_f=weight(input_size, hidden_size), u_f=weight(hidden_size, hidden_size), b_f=bias(1.0),
            w_o=weight(input_size, hidden_size), u_o=weight(hidden_size, hidden_size), b_o=bias(),
            w_c=weight(input_size, hidden_size), u_c=weight(hidden_size, hidden_size), b_c=bias(),
        )

    def named_tensors(self, prefix: str) -> list[tuple[str, Tensor]]:
        names = ("w_i", "u_i", "b_i", "w_f", "u_f", "b_f",
                 "w_o", "u_o", "b_o", "w_c", "u_c", "b_c")
        return [(f"{prefix}.{n}", getattr(self, n)) for n in names]


@dataclass
class BiLstmParams:
    fwd: LstmParams
    bwd: LstmParams

    @classmethod
    def init(cls, input_size: int, hidden_size: int, rng: np.random.Generator) -> "BiLstmParams":
        return cls(fwd=LstmParams.init(input_size, hidden_size, rng),
                   bwd=LstmParams.init(input_size, hidden_size, rng))

    def named_tensors(self, prefix: str) -> list[tuple[str, Tensor]]:
        return self.fwd.named_tensors(f"{prefix}.fwd") + self.bwd.named_tensors(f"{prefix}.bwd")


@dataclass
class DirectionState:
    """Final (h, c) of one LSTM direction, each (B, h)."""

    h: Tensor
    c: Tensor


@dataclass
class TopicState:
    fwd: DirectionState
    bwd: DirectionState


@dataclass
class EncodedSequence:
    """Per-position forward/backward concatenation H (B, L, 2h) plus mask."""

    h_seq: Tensor
    mask: np.ndarray
    fwd_final: DirectionState | None = None
    bwd_final: DirectionState | None = None


def lstm_step(x: Tensor, h_prev: Tensor, c_prev: Tensor,
              params: LstmParams) -> tuple[Tensor, Tensor]:
    """Standard LSTM cell: sigmoid gates, tanh candidate and output squash."""
    if h_prev.shape[-1] != params.hidden_size or c_prev.shape[-1] != params.hidden_size:
        raise ShapeError(f"state size {h_prev.shape}/{c_prev.shape} does not match "
                         f"hidden size {params.hidden_size}")
    i = T.sigmoid_map(T.add_bias(T.add(T.matmul(x, params.w_i), T.matmul(h_prev, params.u_i)), params.b_i))
    f = T.sigmoid_map(T.add_bias(T.add(T.matmul(x, params.w_f), T.matmul(h_prev, params.u_f)), params.b_f))
    o = T.sigmoid_map(T.add_bias(T.add(T.matmul(x, params.w_o), T.matmul(h_prev, params.u_o)), params.b_o))
    g = T.tanh_map(T.add_bias(T.add(T.matmul(x, params.w_c), T.matmul(h_prev, params.u_c)), params.b_c))
    c_next = T.add(T.mul(f, c_prev), T.mul(i, g))
    h_next = T.mul(o, T.tanh_map(c_next))
    return h_next, c_next


def _run_direction(embedded: np.ndarray, mask: np.ndarray, params: LstmParams,
                   init: DirectionState | None, reverse: bool) -> tuple[list[Tensor], DirectionState]:
    batch, length, _ = embedded.shape
    h = init.h if init is not None else T.zeros((batch, params.hidden_size))
    c = init.c if init is not None else T.zeros((batch, params.hidden_size))
    keep = mask.astype(T.DTYPE)
    outputs: list[Tensor | None] = [None] * length
    steps = range(length - 1, -1, -1) if reverse else range(length)
    for t in steps:
        x_t = Tensor(embedded[:, t, :])
        h_new, c_new = lstm_step(x_t, h, c, params)
        m = Tensor(np.repeat(keep[:, t:t + 1], params.hidden_size, axis=1))
        inv = Tensor(1.0 - m.data)
        h = T.add(T.mul(m, h_new), T.mul(inv, h))
        c = T.add(T.mul(m, c_new), T.mul(inv, c))
        outputs[t] = h
    return outputs, DirectionState(h=h, c=c)


def encode_sequence(indices: np.ndarray, mask: np.ndarray, embeddings: np.ndarray,
                    params: BiLstmParams, init: TopicState | None = None) -> EncodedSequence:
    """Run both directions over embedded tokens and concatenate per position."""
    indices = np.atleast_2d(np.asarray(indices))
    mask = np.atleast_2d(np.asarray(mask, dtype=bool))
    if indices.shape != mask.shape:
        raise ShapeError(f"index/mask shapes differ: {indices.shape} vs {mask.shape}")
    if not mask.any(axis=1).all():
        raise DegenerateInputError("a sequence in the batch has no real tokens")
    embedded = embeddings[indices]
    fwd_out, fwd_final = _run_direction(embedded, mask, params.fwd,
                                        init.fwd if init else None, reverse=False)
    bwd_out, bwd_final = _run_direction(embedded, mask, params.bwd,
                                        init.bwd if init else None, reverse=True)
    per_pos = [T.concat_last([fwd_out[t], bwd_out[t]]) for t in range(indices.shape[1])]
    h_seq = T.stack_positions(per_pos)
    blank = np.repeat(mask[:, :, None].astype(T.DTYPE), 2 * params.fwd.hidden_size, axis=2)
    h_seq = T.mul(h_seq, Tensor(blank))
    return EncodedSequence(h_seq=h_seq, mask=mask, fwd_final=fwd_final, bwd_final=bwd_final)


def encode_topic(indices: np.ndarray, mask: np.ndarray, embeddings: np.ndarray,
                 params: BiLstmParams) -> tuple[EncodedSequence, TopicState]:
    """Encode the topic from zero initial states; return both finals."""
    enc = encode_sequence(indices, mask, embeddings, params, init=None)
    return enc, TopicState(fwd=enc.fwd_final, bwd=enc.bwd_final)


def encode_utterance_conditional(indices: np.ndarray, mask: np.ndarray,
                                 embeddings: np.ndarray, params: BiLstmParams,
                                 topic_state: TopicState) -> EncodedSequence:
    """Encode an utterance with each direction seeded by the topic's finals."""
    for state in (topic_state.fwd, topic_state.bwd):
        if state.h.shape[-1] != params.fwd.hidden_size:
            raise ShapeError(f"topic state size {state.h.shape} does not match "
                             f"hidden size {params.fwd.hidden_size}")
    return encode_sequence(indices, mask, embeddings, params, init=topic_state)
