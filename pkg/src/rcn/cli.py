"""Command-line entry points.

Subcommands: pairgen, train, eval, visualize, reasons, gradcheck.
Exit codes: 0 success, 1 usage error, 2 data/config error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .errors import (CheckpointError, DataError, DegenerateInputError, FormatError,
                     GenerationError, ParseError, TrainingError)
from .model import ARCH_BILSTM, ARCH_RCN
from .pairs import (PairCounts, TOPIC_CODES, UtterancePair, generate_pairs,
                    load_stance_corpus, read_pairs, split_dataset, write_pairs)
from .text import EmbeddingTable, load_embeddings, random_embeddings
from .training import (TrainConfig, build_vocab_from_pairs, desk_scale_grad_check,
                       encode_pair_dataset, evaluate_macro_f1, load_checkpoint,
                       multi_run_protocol, multi_run_ttest, save_checkpoint, train)
from .viz import export_heatmap, top_reason_words


def topic_matches(record_topic: str, wanted: str) -> bool:
    return record_topic == wanted or TOPIC_CODES.get(record_topic) == wanted


def _load_config(args) -> TrainConfig:
    config = TrainConfig.from_file(args.config) if getattr(args, "config", None) \
        else TrainConfig()
    if getattr(args, "seed", None) is not None:
        config = replace(config, seed=args.seed)
    if getattr(args, "kappa", None) is not None:
        config = replace(config, kappa=args.kappa)
    return config


def _load_pairs(args, config) -> list[UtterancePair]:
    if getattr(args, "pairs", None):
        pair_list = read_pairs(args.pairs)
    elif getattr(args, "corpus", None):
        records = load_stance_corpus(args.corpus)
        if args.topic:
            records = [r for r in records if topic_matches(r.topic, args.topic)]
        counts = PairCounts(config.agree_pairs, config.disagree_pairs,
                            config.neither_pairs)
        pair_list = generate_pairs(records, counts, seed=config.seed)
    else:
        raise DataError("provide --pairs or --corpus")
    if getattr(args, "topic", None):
        pair_list = [p for p in pair_list if topic_matches(p.topic, args.topic)]
        if not pair_list:
            raise DataError(f"no pairs left for topic {args.topic!r}")
    return pair_list


def _embedding_table(args, vocab):
    if getattr(args, "embeddings", None):
        return load_embeddings(args.embeddings, vocab)
    print("note: no --embeddings given; using deterministic random vectors",
          file=sys.stderr)
    return random_embeddings(vocab, seed=0)


def cmd_pairgen(args) -> int:
    config = _load_config(args)
    records = load_stance_corpus(args.corpus)
    if args.topic:
        records = [r for r in records if topic_matches(r.topic, args.topic)]
        if not records:
            raise DataError(f"no corpus records for topic {args.topic!r}")
    counts = PairCounts(config.agree_pairs, config.disagree_pairs, config.neither_pairs)
    pair_list = generate_pairs(records, counts, seed=config.seed)
    write_pairs(args.out, pair_list)
    print(f"wrote {len(pair_list)} pairs to {args.out} "
          f"(agree={counts.agree} disagree={counts.disagree} neither={counts.neither})")
    return 0


def cmd_train(args) -> int:
    config = _load_config(args)
    pair_list = _load_pairs(args, config)
    vocab = build_vocab_from_pairs(pair_list, min_count=config.min_count)
    table = _embedding_table(args, vocab)
    train_pairs, val_pairs, test_pairs = split_dataset(pair_list, seed=config.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    outcome = train(config,
                    encode_pair_dataset(train_pairs, vocab, config),
                    encode_pair_dataset(val_pairs, vocab, config),
                    table.matrix,
                    metrics_path=out_dir / "metrics.jsonl",
                    log=print)
    test_eval = evaluate_macro_f1(outcome.model,
                                  encode_pair_dataset(test_pairs, vocab, config))
    save_checkpoint(out_dir / "model.ckpt", outcome.model, config, vocab)
    print(f"best epoch {outcome.metrics.best_epoch}: "
          f"val_macro_f1={outcome.metrics.best_val_macro_f1:.4f} "
          f"test_macro_f1={test_eval.macro_f1:.4f}")
    print(f"checkpoint: {out_dir / 'model.ckpt'}")
    return 0


def _print_eval(result) -> None:
    print(f"macro_f1={result.macro_f1:.4f} accuracy={result.accuracy:.4f}")
    for name, scores in result.per_class.items():
        print(f"  {name:<9} precision={scores['precision']:.4f} "
              f"recall={scores['recall']:.4f} f1={scores['f1']:.4f}")


def _stars(p: float) -> str:
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


def cmd_eval(args) -> int:
    if args.runs < 1 and not args.checkpoint:
        raise DataError("provide --checkpoint for a single evaluation or --runs N")
    if args.runs < 1:
        bundle = load_checkpoint(args.checkpoint)
        pair_list = _load_pairs(args, bundle.config)
        dataset = encode_pair_dataset(pair_list, bundle.vocab, bundle.config)
        _print_eval(evaluate_macro_f1(bundle.model, dataset))
        return 0

    # multi-run protocol, one table row per topic
    if args.checkpoint:
        bundle = load_checkpoint(args.checkpoint)
        config, vocab_source = bundle.config, bundle
    else:
        config, vocab_source = _load_config(args), None
    pair_list = _load_pairs(args, config)
    topics = sorted({p.topic for p in pair_list})
    model_name = config.architecture.upper() if config.architecture != ARCH_RCN else "RCN"
    header = f"{'Topic':<36} {'BiLSTM':<16} {model_name}" if args.baseline \
        else f"{'Topic':<36} {model_name}"
    print(header)
    for topic in topics:
        topic_pairs = [p for p in pair_list if p.topic == topic]
        if vocab_source is not None:
            vocab = vocab_source.vocab
            table = EmbeddingTable(vocab_source.model.embeddings)
        else:
            vocab = build_vocab_from_pairs(topic_pairs, min_count=config.min_count)
            table = _embedding_table(args, vocab)
        results = multi_run_protocol(config, topic_pairs, vocab, table, runs=args.runs)
        scores = [r.test.macro_f1 * 100 for r in results]
        cell = f"{np.mean(scores):.1f}±{np.std(scores, ddof=1):.1f}"
        short = TOPIC_CODES.get(topic, topic)
        if args.baseline:
            base_cfg = replace(config, architecture=ARCH_BILSTM)
            base = multi_run_protocol(base_cfg, topic_pairs, vocab, table, runs=args.runs)
            base_scores = [r.test.macro_f1 * 100 for r in base]
            ttest = multi_run_ttest(scores, base_scores)
            base_cell = f"{np.mean(base_scores):.1f}±{np.std(base_scores, ddof=1):.1f}"
            print(f"{short:<36} {base_cell:<16} {cell} {_stars(ttest.p)}")
        else:
            print(f"{short:<36} {cell}")
    if args.baseline:
        print("Two tailed t-test: ** p<0.01; * p<0.05")
    return 0


def cmd_visualize(args) -> int:
    bundle = load_checkpoint(args.checkpoint)
    pair_list = _load_pairs(args, bundle.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    limit = min(args.limit, len(pair_list))
    for i in range(limit):
        export_heatmap(bundle.model, bundle.vocab, pair_list[i],
                       out_dir / f"pair_{i:03d}.html")
    print(f"wrote {limit} heatmaps to {out_dir}")
    return 0


def cmd_reasons(args) -> int:
    if not args.topic:
        raise DataError("--topic is required for the reasons subcommand")
    bundle = load_checkpoint(args.checkpoint)
    pair_list = _load_pairs(args, bundle.config)
    ranking = top_reason_words(bundle.model, bundle.vocab, pair_list,
                               args.topic, top_n=args.top)
    content = ranking.to_lines()
    if args.out:
        Path(args.out).write_text(content, encoding="utf-8")
        print(f"wrote top {len(ranking.words)} reason words to {args.out}")
    else:
        print(content, end="")
    return 0


def cmd_gradcheck(args) -> int:
    err = desk_scale_grad_check(kappa=args.kappa, seed=args.seed or 0)
    ok = err < 1e-4
    print(f"max relative gradient error: {err:.3e} "
          f"({'PASS' if ok else 'FAIL'} at 1e-4)")
    return 0 if ok else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rcn",
        description="Stance (dis)agreement detection between utterance pairs")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, pairs=True, checkpoint=None):
        p.add_argument("--topic", help="topic filter (code like HC or full target)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--config", help="flat key=value config file")
        if pairs:
            p.add_argument("--pairs", help="pair file from pairgen (jsonl)")
            p.add_argument("--corpus", help="SemEval-style stance TSV")
        if checkpoint is not None:
            p.add_argument("--checkpoint", required=checkpoint,
                           help="trained model checkpoint")

    p = sub.add_parser("pairgen", help="generate labeled utterance pairs")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    common(p, pairs=False)
    p.set_defaults(func=cmd_pairgen)

    p = sub.add_parser("train", help="train a model and save a checkpoint")
    common(p)
    p.add_argument("--embeddings", help="GloVe 200-d text file")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint or run the multi-run protocol")
    common(p, checkpoint=False)
    p.add_argument("--embeddings")
    p.add_argument("--runs", type=int, default=0,
                   help="number of training runs for the mean±std protocol")
    p.add_argument("--baseline", action="store_true",
                   help="also train the BiLSTM baseline and report a t-test")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("visualize", help="export attention heatmaps as HTML")
    common(p, checkpoint=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--limit", type=int, default=10)
    p.set_defaults(func=cmd_visualize)

    p = sub.add_parser("reasons", help="rank reason words by attention weight")
    common(p, checkpoint=True)
    p.add_argument("--out")
    p.add_argument("--top", type=int, default=15)
    p.set_defaults(func=cmd_reasons)

    p = sub.add_parser("gradcheck", help="finite-difference check of the full graph")
    p.add_argument("--kappa", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except (ParseError, FormatError, GenerationError, DataError, CheckpointError,
            DegenerateInputError, TrainingError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
