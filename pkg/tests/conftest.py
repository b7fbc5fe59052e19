"""Shared builders for model-level and training tests."""

import numpy as np

from rcn.model import ARCH_RCN, PairBatch, RcnModel


def tiny_model(seed=0, hidden_size=2, max_len=4, topic_max_len=2, kappa=2,
               ff_hidden=3, vocab_size=12, emb_dim=3, architecture=ARCH_RCN):
    rng = np.random.default_rng(seed + 1000)
    emb = rng.standard_normal((vocab_size, emb_dim))
    emb[0] = 0.0  # PAD
    return RcnModel(embeddings=emb, hidden_size=hidden_size, max_len=max_len,
                    topic_max_len=topic_max_len, kappa=kappa, ff_hidden=ff_hidden,
                    architecture=architecture, seed=seed)


def random_batch(model, batch_size=2, seed=0, min_tokens=1):
    """Random left-aligned index/mask arrays consistent with the model."""
    rng = np.random.default_rng(seed + 2000)
    vocab_size = model.embeddings.shape[0]

    def sequences(length):
        idx = np.zeros((batch_size, length), dtype=np.int64)
        mask = np.zeros((batch_size, length), dtype=bool)
        for b in range(batch_size):
            n = int(rng.integers(min_tokens, length + 1))
            idx[b, :n] = rng.integers(2, vocab_size, size=n)
            mask[b, :n] = True
        return idx, mask

    p_idx, p_mask = sequences(model.max_len)
    q_idx, q_mask = sequences(model.max_len)
    t_idx, t_mask = sequences(model.topic_max_len)
    labels = rng.integers(0, 3, size=batch_size)
    return PairBatch(p_idx, p_mask, q_idx, q_mask, t_idx, t_mask, labels)
