"""Attention visualization: token heatmaps and per-topic reason-word rankings.

Heatmaps shade each token by its attention weight rescaled by the column
maximum, so the strongest token per reason renders at full intensity; the
output is a single self-contained HTML file per pair (inline styles, no
scripts). Reason words are ranked by the largest raw attention weight a
word ever receives over the evaluated utterances.
"""

from __future__ import annotations

import html
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError
from .model import CLASSES, PairBatch, RcnModel
from .pairs import TOPIC_CODES, UtterancePair
from .text import (PAD_INDEX, UNK_INDEX, Vocabulary, batch_encode,
                   encode_text, tokenize)

# Fifty function words filtered out of reason-word rankings.
STOP_WORDS = frozenset("""
a an the and or but if than as of at by for with about into to from
in on off over under again here there all any both each more most
other some such no nor not only same too very can will just is are
was be been
""".split())

# Tokens the pipeline fabricates; never reason words.
_ARTIFACT_TOKENS = frozenset({"<pad>", "<unk>", "<url>"})


@dataclass
class HeatmapUtterance:
    text: str
    stance: str
    # one row per reason: list of (token, weight in [0, 1]) for real tokens
    reason_rows: list[list[tuple[str, float]]]


@dataclass
class HeatmapDocument:
    topic: str
    gold_label: str
    predicted_label: str
    utterances: list[HeatmapUtterance]


@dataclass
class ReasonWordRanking:
    topic: str
    words: list[tuple[str, float]]   # (word, max attention weight), descending

    def to_lines(self) -> str:
        return "".join(f"{rank}\t{word}\t{weight:.6f}\n"
                       for rank, (word, weight) in enumerate(self.words, start=1))


def _encode_pair(model: RcnModel, vocab: Vocabulary, pair: UtterancePair) -> PairBatch:
    enc_p = encode_text(pair.p.text, vocab, model.max_len)
    enc_q = encode_text(pair.q.text, vocab, model.max_len)
    enc_t = encode_text(pair.topic, vocab, model.topic_max_len)
    for enc, side in ((enc_p, "P"), (enc_q, "Q")):
        real = enc.indices[enc.mask]
        if np.all((real == PAD_INDEX) | (real == UNK_INDEX)):
            raise DataError(f"utterance {side} has no in-vocabulary tokens: {enc.text!r}")
    return PairBatch(enc_p.indices[None], enc_p.mask[None],
                     enc_q.indices[None], enc_q.mask[None],
                     enc_t.indices[None], enc_t.mask[None])


def _rescaled_rows(attention: np.ndarray, mask: np.ndarray,
                   tokens: Sequence[str]) -> list[list[tuple[str, float]]]:
    """Per reason column: weights over real tokens, rescaled by the column max."""
    rows = []
    real = np.flatnonzero(mask)
    for k in range(attention.shape[1]):
        column = attention[real, k]
        top = column.max()
        scale = 1.0 / top if top > 0 else 0.0
        rows.append([(tokens[i], float(attention[pos, k] * scale))
                     for i, pos in enumerate(real)])
    return rows


def build_heatmap(model: RcnModel, vocab: Vocabulary, pair: UtterancePair) -> HeatmapDocument:
    if model.architecture != "rcn":
        raise DataError("heatmaps need the attention model, not the baseline")
    batch = _encode_pair(model, vocab, pair)
    result = model.forward(batch)
    predicted = CLASSES[int(result.probabilities.data[0].argmax())]
    utterances = []
    for record, reasons, idx_mask in ((pair.p, result.reasons_p, batch.p_mask[0]),
                                      (pair.q, result.reasons_q, batch.q_mask[0])):
        tokens = tokenize(record.text)[: model.max_len]
        rows = _rescaled_rows(reasons.attention.data[0], idx_mask, tokens)
        utterances.append(HeatmapUtterance(text=record.text, stance=record.stance,
                                           reason_rows=rows))
    return HeatmapDocument(topic=pair.topic, gold_label=pair.label,
                           predicted_label=predicted, utterances=utterances)


def render_heatmap_html(doc: HeatmapDocument) -> str:
    parts = [
        "<!DOCTYPE html>",
        '<html><head><meta charset="utf-8"><title>Attention heatmap</title></head>',
        '<body style="font-family: sans-serif; max-width: 60em; margin: 2em auto;">',
        f"<h2>Topic: {html.escape(doc.topic)}</h2>",
        f"<p>Gold label: <b>{html.escape(doc.gold_label)}</b> &mdash; "
        f"predicted: <b>{html.escape(doc.predicted_label)}</b></p>",
    ]
    for n, utt in enumerate(doc.utterances, start=1):
        parts.append(f'<h3>Utterance {n} (stance: {html.escape(utt.stance)})</h3>')
        for k, row in enumerate(utt.reason_rows, start=1):
            spans = "".join(
                f'<span style="background-color: rgba(214, 39, 40, {weight:.4f}); '
                f'padding: 1px 2px; margin: 0 1px;">{html.escape(token)}</span> '
                for token, weight in row)
            parts.append(f'<p><b>Reason {k}:</b> {spans}</p>')
    parts.append("</body></html>")
    return "\n".join(parts) + "\n"


def export_heatmap(model: RcnModel, vocab: Vocabulary, pair: UtterancePair,
                   out_path) -> HeatmapDocument:
    doc = build_heatmap(model, vocab, pair)
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(render_heatmap_html(doc))
    return doc


def top_reason_words(model: RcnModel, vocab: Vocabulary,
                     pair_list: Sequence[UtterancePair], topic: str,
                     top_n: int = 15, batch_size: int = 256) -> ReasonWordRanking:
    """Rank words by the largest attention weight they receive on a topic.

    Every unmasked token of every utterance contributes its maximum weight
    across reasons; words aggregate by maximum. The fixed function-word list,
    fabricated tokens and single-character tokens are excluded. Ties break by
    corpus frequency, then lexicographically.
    """
    if model.architecture != "rcn":
        raise DataError("reason words need the attention model, not the baseline")
    selected = [p for p in pair_list if p.topic == topic or
                _topic_code(p.topic) == topic]
    if not selected:
        raise DataError(f"no pairs for topic {topic!r}")
    best: dict[str, float] = {}
    freq: dict[str, int] = {}
    texts = [p.p.text for p in selected] + [p.q.text for p in selected]
    topic_text = selected[0].topic
    for lo in range(0, len(texts), batch_size):
        chunk = texts[lo:lo + batch_size]
        token_lists = [tokenize(t)[: model.max_len] for t in chunk]
        u_idx, u_mask = batch_encode(chunk, vocab, model.max_len)
        t_idx, t_mask = batch_encode([topic_text] * len(chunk), vocab, model.topic_max_len)
        batch = PairBatch(u_idx, u_mask, u_idx, u_mask, t_idx, t_mask)
        result = model.forward(batch)
        weights = result.reasons_p.attention.data.max(axis=2)  # (B, L)
        for b, tokens in enumerate(token_lists):
            for i, token in enumerate(tokens):
                freq[token] = freq.get(token, 0) + 1
                w = float(weights[b, i])
                if w > best.get(token, -1.0):
                    best[token] = w
    ranked = [(tok, w) for tok, w in best.items()
              if len(tok) >= 2 and tok not in STOP_WORDS and tok not in _ARTIFACT_TOKENS]
    ranked.sort(key=lambda item: (-item[1], -freq[item[0]], item[0]))
    return ReasonWordRanking(topic=topic, words=ranked[:top_n])


def _topic_code(topic: str) -> str:
    return TOPIC_CODES.get(topic, topic)
