"""Stance (dis)agreement detection between utterance pairs.

A pair of stance-bearing texts and their topic are encoded by a
topic-conditioned shared BiLSTM; a multi-dimensional self-attention layer
extracts per-utterance reason encodings, which are compared reason-wise and
classified as Agree, Disagree, or Neither. Built on an in-package
reverse-mode autodiff core so every gradient is checkable against finite
differences.
"""

from .estimator import RCNClassifier
from .model import ARCH_BILSTM, ARCH_RCN, CLASSES, PairBatch, RcnModel
from .pairs import (PairCounts, StanceRecord, UtterancePair, generate_pairs,
                    load_stance_corpus, pair_label, read_pairs, split_dataset,
                    write_pairs)
from .tensor import Tensor, backward, grad_check
from .text import EmbeddingTable, Vocabulary, build_vocab, load_embeddings, tokenize
from .training import (AdamState, EarlyStopper, EvalResult, RunMetrics, TrainConfig,
                       TrainOutcome, adam_step, desk_scale_grad_check,
                       evaluate_macro_f1, load_checkpoint, macro_f1_from_labels,
                       multi_run_protocol, multi_run_ttest, save_checkpoint, train)
from .viz import ReasonWordRanking, export_heatmap, top_reason_words

__version__ = "0.1.0"

__all__ = [
    "ARCH_BILSTM", "ARCH_RCN", "AdamState", "CLASSES", "EarlyStopper",
    "EmbeddingTable", "EvalResult", "PairBatch", "PairCounts", "RCNClassifier",
    "RcnModel", "ReasonWordRanking", "RunMetrics", "StanceRecord", "Tensor",
    "TrainConfig", "TrainOutcome", "UtterancePair", "Vocabulary", "adam_step",
    "backward", "build_vocab", "desk_scale_grad_check", "evaluate_macro_f1",
    "export_heatmap", "generate_pairs", "grad_check", "load_checkpoint",
    "load_embeddings", "load_stance_corpus", "macro_f1_from_labels",
    "multi_run_protocol", "multi_run_ttest", "pair_label", "read_pairs",
    "save_checkpoint", "split_dataset", "tokenize", "top_reason_words", "train",
    "write_pairs",
]
