"""Training harness: Adam, early stopping, macro-F1, multi-run protocol.

The loss summed over each mini-batch (plus the L2 penalty) drives Adam;
after every epoch the validation macro-F1 is computed and training stops
once it fails to improve for ``patience`` consecutive epochs. The best
checkpoint by validation macro-F1 is kept. Everything is driven by one
seeded generator, so a (config, seed) pair fixes the entire run.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy import stats as _scipy_stats

from . import tensor as T
from .classifier import N_CLASSES, cross_entropy_loss, l2_penalty
from .errors import CheckpointError, DataError, TrainingError
from .model import ARCH_BILSTM, ARCH_RCN, CLASSES, PairBatch, RcnModel
from .pairs import CLASS_TO_INDEX, UtterancePair, split_dataset
from .tensor import Tensor
from .text import EmbeddingTable, Vocabulary, batch_encode, build_vocab, tokenize

CHECKPOINT_MAGIC = b"RCNCKPT1"
CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    """All hyperparameters of one training run, file-round-trippable."""

    h: int = 100                # LSTM hidden size per direction
    max_len: int = 64           # padded utterance length
    topic_max_len: int = 8      # padded topic length
    kappa: int = 2              # number of attended reasons
    l2: float = 1e-5            # L2 coefficient
    lr: float = 1e-4
    dropout: float = 0.8        # drop probability on H and on s
    patience: int = 7
    batch_size: int = 64
    max_epochs: int = 100
    seed: int = 0
    runs: int = 10
    ff: int = 100               # feed-forward hidden width
    min_count: int = 1
    architecture: str = ARCH_RCN
    agree_pairs: int = 20000    # pair-generation counts (used by pairgen)
    disagree_pairs: int = 20000
    neither_pairs: int = 10000

    def __post_init__(self):
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")
        if not 1 <= self.kappa <= 8:
            raise ValueError(f"kappa must be in 1..8, got {self.kappa}")
        if self.architecture not in (ARCH_RCN, ARCH_BILSTM):
            raise ValueError(f"unknown architecture {self.architecture!r}")
        for name in ("h", "max_len", "topic_max_len", "batch_size", "max_epochs", "ff"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name: f.type for f in dataclasses.fields(cls)}
        unknown = set(data) - set(known)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "TrainConfig":
        """Flat key=value text; blank lines and # comments are ignored."""
        casts = {f.name: type(getattr(cls(), f.name)) for f in dataclasses.fields(cls)}
        values: dict = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ValueError(f"config line {lineno}: expected key=value, got {line!r}")
                key, _, raw = line.partition("=")
                key, raw = key.strip(), raw.strip()
                if key not in casts:
                    raise ValueError(f"config line {lineno}: unknown key {key!r}")
                values[key] = raw if casts[key] is str else casts[key](raw)
        return cls(**values)

    def to_file(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for f in dataclasses.fields(self):
                fh.write(f"{f.name}={getattr(self, f.name)}\n")


def build_model(config: TrainConfig, embeddings: np.ndarray) -> RcnModel:
    return RcnModel(embeddings=embeddings, hidden_size=config.h, max_len=config.max_len,
                    topic_max_len=config.topic_max_len, kappa=config.kappa,
                    ff_hidden=config.ff, architecture=config.architecture,
                    seed=config.seed)


# ---------------------------------------------------------------------------
# dataset plumbing


def build_vocab_from_pairs(pair_list: Sequence[UtterancePair], min_count: int = 1) -> Vocabulary:
    corpus = []
    for pair in pair_list:
        corpus.append(tokenize(pair.p.text))
        corpus.append(tokenize(pair.q.text))
        corpus.append(tokenize(pair.topic))
    return build_vocab(corpus, min_count=min_count)


def encode_pair_dataset(pair_list: Sequence[UtterancePair], vocab: Vocabulary,
                        config: TrainConfig) -> PairBatch:
    if not pair_list:
        raise DataError("cannot encode an empty pair list")
    p_idx, p_mask = batch_encode([p.p.text for p in pair_list], vocab, config.max_len)
    q_idx, q_mask = batch_encode([p.q.text for p in pair_list], vocab, config.max_len)
    t_idx, t_mask = batch_encode([p.topic for p in pair_list], vocab, config.topic_max_len)
    labels = np.array([CLASS_TO_INDEX[p.label] for p in pair_list], dtype=np.int64)
    return PairBatch(p_idx, p_mask, q_idx, q_mask, t_idx, t_mask, labels)


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    """First/second moment estimates per parameter, plus the step counter."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, params: Sequence[Tensor]) -> "AdamState":
        return cls(m=[np.zeros_like(p.data) for p in params],
                   v=[np.zeros_like(p.data) for p in params])


def adam_step(params: Sequence[Tensor], grads: dict[Tensor, np.ndarray],
              state: AdamState, lr: float) -> None:
    """Standard Adam update with bias correction, in place on param data."""
    state.step += 1
    correct1 = 1.0 - state.beta1 ** state.step
    correct2 = 1.0 - state.beta2 ** state.step
    for k, p in enumerate(params):
        g = grads[p]
        if not np.isfinite(g).all():
            raise TrainingError(f"non-finite gradient in parameter {k} at step {state.step}")
        state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g
        state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * g * g
        m_hat = state.m[k] / correct1
        v_hat = state.v[k] / correct2
        p.data -= lr * m_hat / (np.sqrt(v_hat) + state.eps)


class EarlyStopper:
    """Stop once the tracked metric fails to improve `patience` times in a row."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = -np.inf
        self.best_step = -1
        self.stale = 0
        self.steps = 0

    def update(self, value: float) -> bool:
        self.steps += 1
        if value > self.best:
            self.best = value
            self.best_step = self.steps
            self.stale = 0
        else:
            self.stale += 1
        return self.stale >= self.patience


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class EvalResult:
    macro_f1: float
    accuracy: float
    per_class: dict[str, dict[str, float]]
    confusion: np.ndarray


def macro_f1_from_labels(y_true, y_pred) -> EvalResult:
    """Per-class precision/recall/F1 with the zero-denominator-is-zero rule."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape or y_true.size == 0:
        raise DataError(f"label arrays must be equal non-empty, got "
                        f"{y_true.shape} and {y_pred.shape}")
    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        confusion[t, p] += 1
    per_class: dict[str, dict[str, float]] = {}
    f1s = []
    for c, name in enumerate(CLASSES):
        tp = confusion[c, c]
        fp = confusion[:, c].sum() - tp
        fn = confusion[c, :].sum() - tp
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[name] = {"precision": float(precision), "recall": float(recall),
                           "f1": float(f1)}
        f1s.append(f1)
    return EvalResult(macro_f1=float(np.mean(f1s)),
                      accuracy=float(np.trace(confusion) / confusion.sum()),
                      per_class=per_class, confusion=confusion)


def predict_probabilities(model: RcnModel, dataset: PairBatch,
                          batch_size: int = 256) -> np.ndarray:
    chunks = []
    for lo in range(0, len(dataset), batch_size):
        result = model.forward(dataset.slice(lo, lo + batch_size))
        chunks.append(result.probabilities.data)
    return np.concatenate(chunks, axis=0)


def predict_labels(model: RcnModel, dataset: PairBatch, batch_size: int = 256) -> np.ndarray:
    return predict_probabilities(model, dataset, batch_size).argmax(axis=1)


def evaluate_macro_f1(model: RcnModel, dataset: PairBatch) -> EvalResult:
    if dataset.labels is None:
        raise DataError("dataset has no labels to evaluate against")
    return macro_f1_from_labels(dataset.labels, predict_labels(model, dataset))


# ---------------------------------------------------------------------------
# training loop


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float           # per-sample mean of the data term
    val_macro_f1: float

    def to_json(self) -> str:
        return json.dumps({"epoch": self.epoch, "train_loss": self.train_loss,
                           "val_macro_f1": self.val_macro_f1}, sort_keys=True)


@dataclass
class RunMetrics:
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_val_macro_f1: float = 0.0
    test: EvalResult | None = None


@dataclass
class TrainOutcome:
    model: RcnModel
    metrics: RunMetrics


def train(config: TrainConfig, train_set: PairBatch, val_set: PairBatch,
          embeddings: np.ndarray, metrics_path=None,
          log: Callable[[str], None] | None = None) -> TrainOutcome:
    """Mini-batch Adam training with dropout and early stopping on macro-F1."""
    if len(train_set) == 0 or len(val_set) == 0:
        raise TrainingError("train and validation sets must be non-empty")
    model = build_model(config, embeddings)
    params = model.parameters()
    adam = AdamState.init(params)
    rng = np.random.default_rng(config.seed)
    stopper = EarlyStopper(config.patience)
    metrics = RunMetrics()
    best_snapshot = [p.data.copy() for p in params]
    metrics_fh = open(metrics_path, "w", encoding="utf-8") if metrics_path else None
    try:
        for epoch in range(1, config.max_epochs + 1):
            order = rng.permutation(len(train_set))
            shuffled = train_set.take(order)
            data_loss = 0.0
            for lo in range(0, len(shuffled), config.batch_size):
                batch = shuffled.slice(lo, lo + config.batch_size)
                result = model.forward(batch, dropout=config.dropout, rng=rng)
                nll = cross_entropy_loss(result.probabilities, batch.labels, [], l2=0.0)
                loss = nll
                if config.l2 > 0.0:
                    loss = T.add(nll, T.scale(l2_penalty(params), config.l2))
                if not np.isfinite(loss.item()):
                    raise TrainingError(f"loss diverged at epoch {epoch}")
                grads = T.backward(loss, params=params)
                adam_step(params, grads, adam, config.lr)
                data_loss += nll.item()
            val_eval = evaluate_macro_f1(model, val_set)
            record = EpochRecord(epoch=epoch, train_loss=data_loss / len(train_set),
                                 val_macro_f1=val_eval.macro_f1)
            metrics.epochs.append(record)
            if metrics_fh:
                metrics_fh.write(record.to_json() + "\n")
            if log:
                log(f"epoch {epoch}: train_loss={record.train_loss:.4f} "
                    f"val_macro_f1={record.val_macro_f1:.4f}")
            improved = val_eval.macro_f1 > metrics.best_val_macro_f1 or metrics.best_epoch == 0
            if improved:
                metrics.best_val_macro_f1 = val_eval.macro_f1
                metrics.best_epoch = epoch
                best_snapshot = [p.data.copy() for p in params]
            if stopper.update(val_eval.macro_f1):
                break
    finally:
        if metrics_fh:
            metrics_fh.close()
    for p, best in zip(params, best_snapshot):
        p.data[:] = best
    return TrainOutcome(model=model, metrics=metrics)


# ---------------------------------------------------------------------------
# multi-run protocol and significance test


@dataclass
class TTestResult:
    mean_a: float
    std_a: float
    mean_b: float
    std_b: float
    t: float
    p: float
    dof: float


def multi_run_ttest(scores_a: Sequence[float], scores_b: Sequence[float]) -> TTestResult:
    """Welch's two-tailed t-test over per-run scores.

    Degenerate samples follow the conventions: zero variance on both sides
    with equal means reports p=1; unequal means with zero variance reports p=0.
    """
    a = np.asarray(scores_a, dtype=float)
    b = np.asarray(scores_b, dtype=float)
    if a.size != b.size or a.size < 2:
        raise DataError(f"need equal-length samples of >= 2 runs, got {a.size} and {b.size}")
    mean_a, mean_b = a.mean(), b.mean()
    std_a = a.std(ddof=1)
    std_b = b.std(ddof=1)
    se_a = std_a ** 2 / a.size
    se_b = std_b ** 2 / b.size
    if se_a + se_b == 0.0:
        same = bool(mean_a == mean_b)
        return TTestResult(mean_a, std_a, mean_b, std_b,
                           t=0.0 if same else np.inf * np.sign(mean_a - mean_b),
                           p=1.0 if same else 0.0, dof=float(a.size + b.size - 2))
    t = (mean_a - mean_b) / np.sqrt(se_a + se_b)
    dof = (se_a + se_b) ** 2 / (se_a ** 2 / (a.size - 1) + se_b ** 2 / (b.size - 1))
    p = 2.0 * float(_scipy_stats.t.sf(abs(t), dof))
    return TTestResult(float(mean_a), float(std_a), float(mean_b), float(std_b),
                       t=float(t), p=p, dof=float(dof))


@dataclass
class RunResult:
    seed: int
    test: EvalResult
    metrics: RunMetrics


def multi_run_protocol(config: TrainConfig, pair_list: Sequence[UtterancePair],
                       vocab: Vocabulary, table: EmbeddingTable,
                       runs: int | None = None,
                       log: Callable[[str], None] | None = None) -> list[RunResult]:
    """Repeat split+train+test with consecutive seeds; one result per run."""
    runs = config.runs if runs is None else runs
    results = []
    for r in range(runs):
        cfg = replace(config, seed=config.seed + r)
        train_pairs, val_pairs, test_pairs = split_dataset(pair_list, seed=cfg.seed)
        outcome = train(cfg, encode_pair_dataset(train_pairs, vocab, cfg),
                        encode_pair_dataset(val_pairs, vocab, cfg), table.matrix, log=None)
        test_eval = evaluate_macro_f1(outcome.model, encode_pair_dataset(test_pairs, vocab, cfg))
        outcome.metrics.test = test_eval
        if log:
            log(f"run {r}: seed={cfg.seed} test_macro_f1={test_eval.macro_f1:.4f}")
        results.append(RunResult(seed=cfg.seed, test=test_eval, metrics=outcome.metrics))
    return results


# ---------------------------------------------------------------------------
# soundness check


def desk_scale_grad_check(kappa: int = 2, seed: int = 0, epsilon: float = 1e-5) -> float:
    """Finite-difference check of every trainable parameter on the full graph.

    Desk scale: L=6, L_T=3, h=4, batch of 2, double precision. Attention
    params are set to a generic point because the zero init puts all reason
    columns on a max-pool tie, where finite differences straddle the kink.
    Returns the worst relative error.
    """
    rng = np.random.default_rng(seed)
    emb = rng.standard_normal((16, 5))
    emb[0] = 0.0
    model = RcnModel(embeddings=emb, hidden_size=4, max_len=6, topic_max_len=3,
                     kappa=kappa, ff_hidden=5, architecture=ARCH_RCN, seed=seed)
    model.attention.w2.data[:] = rng.standard_normal(model.attention.w2.shape) * 0.3
    model.attention.b.data[:] = rng.standard_normal(model.attention.b.shape) * 0.3

    def sequences(batch, length):
        idx = np.zeros((batch, length), dtype=np.int64)
        mask = np.zeros((batch, length), dtype=bool)
        for row in range(batch):
            n = int(rng.integers(max(1, length - 2), length + 1))
            idx[row, :n] = rng.integers(2, 16, size=n)
            mask[row, :n] = True
        return idx, mask

    batch = PairBatch(*sequences(2, 6), *sequences(2, 6), *sequences(2, 3),
                      labels=rng.integers(0, 3, size=2))
    params = model.parameters()

    def build():
        result = model.forward(batch)
        return cross_entropy_loss(result.probabilities, batch.labels, params, l2=1e-3)

    return T.grad_check(build, params, epsilon=epsilon)


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, model: RcnModel, config: TrainConfig, vocab: Vocabulary) -> None:
    """Versioned binary container; see README for the byte layout."""
    named = model.named_parameters() + [("embeddings", Tensor(model.embeddings))]
    header = {
        "version": CHECKPOINT_VERSION,
        "config": config.to_dict(),
        "structure": model.structure(),
        "vocab": vocab.tokens_in_order(),
        "tensors": [{"name": n, "shape": list(t.shape)} for n, t in named],
        "dtype": "<f8",
    }
    blob = json.dumps(header, sort_keys=True, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for _, t in named:
            fh.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())


@dataclass
class CheckpointBundle:
    model: RcnModel
    config: TrainConfig
    vocab: Vocabulary


def load_checkpoint(path) -> CheckpointBundle:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file (magic {magic!r})")
        (header_len,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        if header.get("version") != CHECKPOINT_VERSION:
            raise CheckpointError(f"{path}: unsupported version {header.get('version')!r}")
        config = TrainConfig.from_dict(header["config"])
        vocab = Vocabulary({tok: i for i, tok in enumerate(header["vocab"])})
        tensors = {}
        for entry in header["tensors"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(count * 8)
            if len(raw) != count * 8:
                raise CheckpointError(f"{path}: truncated tensor {entry['name']!r}")
            tensors[entry["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
    structure = header["structure"]
    if "embeddings" not in tensors:
        raise CheckpointError(f"{path}: missing embeddings tensor")
    model = RcnModel(embeddings=tensors.pop("embeddings"),
                     hidden_size=structure["hidden_size"], max_len=structure["max_len"],
                     topic_max_len=structure["topic_max_len"], kappa=structure["kappa"],
                     ff_hidden=structure["ff_hidden"],
                     architecture=structure["architecture"], seed=config.seed)
    for name, param in model.named_parameters():
        if name not in tensors:
            raise CheckpointError(f"{path}: missing tensor {name!r}")
        data = tensors[name]
        if data.shape != param.shape:
            raise CheckpointError(f"{path}: tensor {name!r} has shape {data.shape}, "
                                  f"expected {param.shape}")
        param.data[:] = data
    return CheckpointBundle(model=model, config=config, vocab=vocab)
