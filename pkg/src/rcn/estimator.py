"""Scikit-learn estimator facade over the pair-comparison network.

``RCNClassifier`` takes X as an (n, 3) array-like of string triples
(utterance_p, utterance_q, topic) and y as labels from
{"Agree", "Disagree", "Neither"} (or their indices 0/1/2), so the model
drops into sklearn pipelines, grid search, and cross-validation.
"""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .model import CLASSES, PairBatch
from .text import EmbeddingTable, batch_encode, load_embeddings, random_embeddings
from .training import (TrainConfig, build_vocab_from_pairs,
                       predict_probabilities, train)
from .pairs import StanceRecord, UtterancePair


def _as_text_triples(X) -> list[tuple[str, str, str]]:
    rows = list(X)
    if not rows:
        raise ValueError("X must contain at least one (p, q, topic) triple")
    triples = []
    for i, row in enumerate(rows):
        items = list(row)
        if len(items) != 3 or not all(isinstance(v, str) for v in items):
            raise ValueError(f"X row {i} must be three strings (p, q, topic), got {row!r}")
        triples.append(tuple(items))
    return triples


def _as_label_indices(y, n: int) -> tuple[np.ndarray, bool]:
    """Return (indices in 0..2, whether labels came in as integers)."""
    values = list(y)
    if len(values) != n:
        raise ValueError(f"y has {len(values)} labels for {n} samples")
    as_int = all(isinstance(v, (numbers.Integral, np.integer)) for v in values)
    idx = np.empty(n, dtype=np.int64)
    for i, v in enumerate(values):
        if as_int:
            if not 0 <= int(v) < len(CLASSES):
                raise ValueError(f"integer label {v!r} outside 0..{len(CLASSES) - 1}")
            idx[i] = int(v)
        else:
            if v not in CLASSES:
                raise ValueError(f"label {v!r} not in {CLASSES}")
            idx[i] = CLASSES.index(v)
    return idx, as_int


class RCNClassifier(BaseEstimator, ClassifierMixin):
    """Stance (dis)agreement classifier for utterance pairs.

    Parameters mirror the training configuration; ``embeddings`` may be a
    GloVe text file path, an ``EmbeddingTable``, or None for deterministic
    random frozen vectors keyed to ``random_state``.
    """

    def __init__(self, hidden_size=100, max_len=64, topic_max_len=8, n_reasons=2,
                 l2=1e-5, learning_rate=1e-4, dropout=0.8, patience=7,
                 batch_size=64, max_epochs=100, ff_hidden=100, min_count=1,
                 architecture="rcn", embeddings=None, validation_fraction=0.1,
                 random_state=0):
        self.hidden_size = hidden_size
        self.max_len = max_len
        self.topic_max_len = topic_max_len
        self.n_reasons = n_reasons
        self.l2 = l2
        self.learning_rate = learning_rate
        self.dropout = dropout
        self.patience = patience
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.ff_hidden = ff_hidden
        self.min_count = min_count
        self.architecture = architecture
        self.embeddings = embeddings
        self.validation_fraction = validation_fraction
        self.random_state = random_state

    def _train_config(self) -> TrainConfig:
        return TrainConfig(h=self.hidden_size, max_len=self.max_len,
                           topic_max_len=self.topic_max_len, kappa=self.n_reasons,
                           l2=self.l2, lr=self.learning_rate, dropout=self.dropout,
                           patience=self.patience, batch_size=self.batch_size,
                           max_epochs=self.max_epochs, ff=self.ff_hidden,
                           min_count=self.min_count, architecture=self.architecture,
                           seed=self.random_state)

    def _resolve_embeddings(self, vocab) -> EmbeddingTable:
        if self.embeddings is None:
            return random_embeddings(vocab, seed=self.random_state)
        if isinstance(self.embeddings, EmbeddingTable):
            return self.embeddings
        return load_embeddings(self.embeddings, vocab)

    def _encode(self, triples, config, labels=None) -> PairBatch:
        p_idx, p_mask = batch_encode([t[0] for t in triples], self.vocab_, config.max_len)
        q_idx, q_mask = batch_encode([t[1] for t in triples], self.vocab_, config.max_len)
        t_idx, t_mask = batch_encode([t[2] for t in triples], self.vocab_, config.topic_max_len)
        return PairBatch(p_idx, p_mask, q_idx, q_mask, t_idx, t_mask, labels)

    def fit(self, X, y):
        triples = _as_text_triples(X)
        labels, int_labels = _as_label_indices(y, len(triples))
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must be in (0, 1)")
        config = self._train_config()

        as_pairs = [UtterancePair(p=StanceRecord("", t[2], t[0], "None"),
                                  q=StanceRecord("", t[2], t[1], "None"),
                                  topic=t[2], label=CLASSES[labels[i]])
                    for i, t in enumerate(triples)]
        self.vocab_ = build_vocab_from_pairs(as_pairs, min_count=self.min_count)
        self.embeddings_ = self._resolve_embeddings(self.vocab_)

        # stratified holdout for early stopping
        rng = np.random.default_rng(self.random_state)
        val_idx: list[int] = []
        for c in range(len(CLASSES)):
            members = np.flatnonzero(labels == c)
            if members.size == 0:
                continue
            members = members[rng.permutation(members.size)]
            n_val = max(1, int(round(members.size * self.validation_fraction))) \
                if members.size > 1 else 0
            val_idx.extend(members[:n_val])
        val_mask = np.zeros(len(triples), dtype=bool)
        val_mask[val_idx] = True
        if not val_mask.any() or val_mask.all():
            raise ValueError("validation split is empty or swallows all samples; "
                             "adjust validation_fraction or provide more data")

        full = self._encode(triples, config, labels)
        train_set = full.take(np.flatnonzero(~val_mask))
        val_set = full.take(np.flatnonzero(val_mask))
        outcome = train(config, train_set, val_set, self.embeddings_.matrix)

        self.model_ = outcome.model
        self.history_ = outcome.metrics
        self.classes_ = np.arange(len(CLASSES)) if int_labels else np.array(CLASSES)
        self.n_features_in_ = 3
        return self

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        triples = _as_text_triples(X)
        batch = self._encode(triples, self._train_config())
        return predict_probabilities(self.model_, batch)

    def predict(self, X) -> np.ndarray:
        return self.classes_[self.predict_proba(X).argmax(axis=1)]

    def validation_macro_f1(self) -> float:
        check_is_fitted(self, "model_")
        return self.history_.best_val_macro_f1
