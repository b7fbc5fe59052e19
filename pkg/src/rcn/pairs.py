"""Stance corpus ingestion and labeled utterance-pair generation.

Pairs are sampled within-topic, uniformly with replacement over the eligible
stance-combination pools; a record may serve in many pairs but never pairs
with itself. Splits are stratified by class and fully seed-reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError, FormatError, GenerationError, ParseError

FAVOUR = "Favour"
AGAINST = "Against"
NONE = "None"
STANCES = (FAVOUR, AGAINST, NONE)

AGREE = "Agree"
DISAGREE = "Disagree"
NEITHER = "Neither"
CLASSES = (AGREE, DISAGREE, NEITHER)
CLASS_TO_INDEX = {label: i for i, label in enumerate(CLASSES)}

_STANCE_ALIASES = {
    "favour": FAVOUR, "favor": FAVOUR,
    "against": AGAINST,
    "none": NONE,
}

# SemEval-2016 Task 6 target strings and their short codes.
TOPIC_CODES = {
    "Climate Change is a Real Concern": "CC",
    "Hillary Clinton": "HC",
    "Feminist Movement": "FM",
    "Atheism": "AT",
    "Legalization of Abortion": "LA",
}

# Stance combinations eligible for each class; symmetric by construction.
_CLASS_COMBOS = {
    AGREE: [(FAVOUR, FAVOUR), (AGAINST, AGAINST)],
    DISAGREE: [(FAVOUR, AGAINST), (AGAINST, FAVOUR),
               (FAVOUR, NONE), (NONE, FAVOUR),
               (AGAINST, NONE), (NONE, AGAINST)],
    NEITHER: [(NONE, NONE)],
}


def pair_label(stance_p: str, stance_q: str) -> str:
    """Class of a stance pair: same stance agrees, None+None is Neither,
    anything else disagrees."""
    if stance_p == stance_q:
        return NEITHER if stance_p == NONE else AGREE
    return DISAGREE


@dataclass(frozen=True)
class StanceRecord:
    id: str
    topic: str
    text: str
    stance: str


@dataclass(frozen=True)
class UtterancePair:
    p: StanceRecord
    q: StanceRecord
    topic: str
    label: str


@dataclass(frozen=True)
class PairCounts:
    agree: int = 20000
    disagree: int = 20000
    neither: int = 10000

    def for_class(self, label: str) -> int:
        return {AGREE: self.agree, DISAGREE: self.disagree, NEITHER: self.neither}[label]


def normalize_stance(raw: str, row: int | None = None) -> str:
    stance = _STANCE_ALIASES.get(raw.strip().lower())
    if stance is None:
        where = f" at row {row}" if row is not None else ""
        raise ParseError(f"unknown stance {raw!r}{where}; expected one of {STANCES}")
    return stance


def load_stance_corpus(path) -> list[StanceRecord]:
    """Parse a SemEval-style TSV with header columns ID, Target, Tweet, Stance."""
    records: list[StanceRecord] = []
    with open(path, encoding="utf-8", errors="replace") as fh:
        header_line = fh.readline()
        if not header_line:
            raise FormatError(f"{path}: empty corpus file")
        header = [h.strip().lower() for h in header_line.rstrip("\n").split("\t")]
        try:
            cols = {name: header.index(name) for name in ("id", "target", "tweet", "stance")}
        except ValueError as exc:
            raise FormatError(f"{path}: missing column in header {header}") from exc
        for row, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split("\t")
            if len(fields) < len(header):
                raise ParseError(f"row {row}: expected {len(header)} columns, got {len(fields)}")
            records.append(StanceRecord(
                id=fields[cols["id"]].strip(),
                topic=fields[cols["target"]].strip(),
                text=fields[cols["tweet"]].strip(),
                stance=normalize_stance(fields[cols["stance"]], row=row),
            ))
    return records


def generate_pairs(records: Sequence[StanceRecord], counts: PairCounts,
                   seed: int = 0) -> list[UtterancePair]:
    """Sample labeled within-topic pairs, meeting the requested class counts exactly.

    For each class, the pool is every ordered (p, q) of distinct same-topic
    records whose stances form an eligible combination; draws are uniform over
    that pool, with replacement across draws.
    """
    by_topic_stance: dict[tuple[str, str], list[StanceRecord]] = {}
    for rec in records:
        by_topic_stance.setdefault((rec.topic, rec.stance), []).append(rec)
    topics = sorted({rec.topic for rec in records})

    rng = np.random.default_rng(seed)
    pairs: list[UtterancePair] = []
    for label in CLASSES:
        requested = counts.for_class(label)
        if requested == 0:
            continue
        # Pool size per (topic, stance combo); same-stance combos exclude self-pairs.
        buckets: list[tuple[str, str, str, int]] = []
        for topic in topics:
            for s_p, s_q in _CLASS_COMBOS[label]:
                n_p = len(by_topic_stance.get((topic, s_p), ()))
                n_q = len(by_topic_stance.get((topic, s_q), ()))
                size = n_p * (n_p - 1) if s_p == s_q else n_p * n_q
                if size > 0:
                    buckets.append((topic, s_p, s_q, size))
        total = sum(size for *_, size in buckets)
        if total == 0:
            raise GenerationError(f"no eligible record pairs for class {label!r}")
        weights = np.array([size for *_, size in buckets], dtype=np.float64) / total
        choices = rng.choice(len(buckets), size=requested, p=weights)
        for which in choices:
            topic, s_p, s_q, _ = buckets[which]
            pool_p = by_topic_stance[(topic, s_p)]
            pool_q = by_topic_stance[(topic, s_q)]
            if s_p == s_q:
                i, j = rng.choice(len(pool_p), size=2, replace=False)
                p, q = pool_p[int(i)], pool_p[int(j)]
            else:
                p = pool_p[int(rng.integers(len(pool_p)))]
                q = pool_q[int(rng.integers(len(pool_q)))]
            pairs.append(UtterancePair(p=p, q=q, topic=topic, label=label))
    return pairs


def split_dataset(pairs: Sequence[UtterancePair],
                  ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
                  seed: int = 0) -> tuple[list[UtterancePair], list[UtterancePair], list[UtterancePair]]:
    """Deterministic stratified train/validation/test partition."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {ratios}")
    if len(pairs) < 10:
        raise DataError(f"need at least 10 pairs to split, got {len(pairs)}")
    rng = np.random.default_rng(seed)
    parts: tuple[list[UtterancePair], ...] = ([], [], [])
    for label in CLASSES:
        members = [i for i, pair in enumerate(pairs) if pair.label == label]
        if not members:
            continue
        order = rng.permutation(len(members))
        # Largest-remainder allocation keeps each class within +-1 of its share.
        exact = [r * len(members) for r in ratios]
        sizes = [int(e) for e in exact]
        leftovers = sorted(range(3), key=lambda k: (-(exact[k] - sizes[k]), k))
        for k in leftovers[: len(members) - sum(sizes)]:
            sizes[k] += 1
        start = 0
        for part, size in zip(parts, sizes):
            part.extend(members[i] for i in order[start:start + size])
            start += size
    train, val, test = (sorted(part) for part in parts)
    return ([pairs[i] for i in train], [pairs[i] for i in val], [pairs[i] for i in test])


# ---------------------------------------------------------------------------
# pair file io: one JSON record per line, fixed key order


def write_pairs(path, pairs: Sequence[UtterancePair]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            record = {
                "topic": pair.topic,
                "p_text": pair.p.text,
                "q_text": pair.q.text,
                "p_stance": pair.p.stance,
                "q_stance": pair.q.stance,
                "label": pair.label,
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_pairs(path) -> list[UtterancePair]:
    pairs: list[UtterancePair] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                pair = UtterancePair(
                    p=StanceRecord(id=f"{lineno}:p", topic=rec["topic"],
                                   text=rec["p_text"], stance=rec["p_stance"]),
                    q=StanceRecord(id=f"{lineno}:q", topic=rec["topic"],
                                   text=rec["q_text"], stance=rec["q_stance"]),
                    topic=rec["topic"],
                    label=rec["label"],
                )
            except (KeyError, json.JSONDecodeError) as exc:
                raise ParseError(f"pair file line {lineno}: {exc}") from exc
            if pair.label not in CLASSES:
                raise ParseError(f"pair file line {lineno}: unknown label {pair.label!r}")
            pairs.append(pair)
    return pairs
