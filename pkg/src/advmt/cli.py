"""Command-line entry points: train, score, eval, gradcheck."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import baselines, evalkit, plots
from .baselines import MetricError, WordEmbeddings
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import ConfigError, parse_config
from .corpus import CorpusError, TrainingTriple, Vocabulary, encode_sequence
from .evalkit import EvalDataError
from .multitask import combined_loss, score_pair, train
from .numerics import NumericsError, finite_difference_check

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

METRIC_NAMES = ("bleu1", "bleu2", "bleu3", "bleu4", "rouge_l", "gm", "advmt")


class UsageError(ValueError):
    pass


def cmd_train(args) -> int:
    cfg = parse_config(args.config)
    log_path = Path(args.log) if args.log else Path(args.output).with_suffix(".log.tsv")
    with open(log_path, "w", encoding="utf-8") as log_file:
        result = train(cfg, log_file=log_file)
    save_checkpoint(result.model, args.output)
    print(f"wrote checkpoint {args.output} "
          f"(best dev ranking accuracy {result.best_dev_accuracy:.4f} "
          f"at step {result.best_step})")
    print(f"wrote training log {log_path}")
    if args.figures:
        fig = plots.render_training_curves(log_path, Path(args.figures) / "training.png")
        print(f"wrote figure {fig}")
    return EXIT_OK


def _read_query_reply_rows(path):
    rows = []
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise CorpusError(f"cannot read input file {path}: {e}") from e
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) != 2:
            raise CorpusError(
                f"{path}:{lineno}: expected 2 tab-separated columns, got {len(cols)}")
        if not cols[0].split() or not cols[1].split():
            raise CorpusError(f"{path}:{lineno}: empty query or reply")
        rows.append((cols[0], cols[1]))
    if not rows:
        raise CorpusError(f"{path}: no input rows")
    return rows


def cmd_score(args) -> int:
    model = load_checkpoint(args.checkpoint)
    try:
        task = model.task_by_name(args.task)
    except KeyError as e:
        raise UsageError(str(e)) from e
    rows = _read_query_reply_rows(args.input)
    out_lines = []
    for query, reply in rows:
        q_ids = encode_sequence(query.split(), task.vocab)
        r_ids = encode_sequence(reply.split(), task.vocab)
        score = score_pair(model, task, q_ids, r_ids)
        out_lines.append(f"{query}\t{reply}\t{score:.6f}")
    Path(args.output).write_text("\n".join(out_lines) + "\n", encoding="utf-8")
    print(f"scored {len(rows)} rows -> {args.output}")
    return EXIT_OK


def compute_metric_columns(pairs, metrics, model=None, task=None,
                           embeddings=None, smooth=True):
    """Fill ``metric_scores`` on each ScoredPair for the requested metrics."""
    referenced = [m for m in metrics if m != "advmt"]
    if referenced and any(p.reference is None for p in pairs):
        missing = referenced[0]
        raise EvalDataError(
            f"metric {missing!r} needs the reference column, but some rows lack it")
    if "gm" in metrics and embeddings is None:
        if model is None or task is None:
            raise EvalDataError("greedy matching needs embeddings or a model task")
        embeddings = WordEmbeddings.from_model(model, task)
    for p in pairs:
        for m in metrics:
            if m.startswith("bleu"):
                p.metric_scores[m] = baselines.bleu(
                    p.generated, p.reference, max_n=int(m[-1]), smooth=smooth)
            elif m == "rouge_l":
                p.metric_scores[m] = baselines.rouge_l(p.generated, p.reference)
            elif m == "gm":
                p.metric_scores[m] = baselines.greedy_matching(
                    p.generated, p.reference, embeddings)
            elif m == "advmt":
                q_ids = encode_sequence(p.query, task.vocab)
                r_ids = encode_sequence(p.generated, task.vocab)
                p.metric_scores[m] = score_pair(model, task, q_ids, r_ids)
            else:
                raise UsageError(
                    f"unknown metric {m!r}; expected one of {METRIC_NAMES}")


def add_blend_column(pairs, strategy, referenced_metric="gm",
                     unreferenced_metric="advmt"):
    """Min-max normalize both columns over the set, then blend row-wise."""
    name = f"{unreferenced_metric}+{referenced_metric}:{strategy}"
    ref = evalkit.minmax_normalize([p.metric_scores[referenced_metric] for p in pairs])
    unref = evalkit.minmax_normalize([p.metric_scores[unreferenced_metric] for p in pairs])
    for p, a, b in zip(pairs, ref, unref):
        p.metric_scores[name] = evalkit.blend(a, b, strategy)
    return name


def cmd_eval(args) -> int:
    model = load_checkpoint(args.checkpoint) if args.checkpoint else None
    task = None
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    for m in metrics:
        if m not in METRIC_NAMES:
            raise UsageError(f"unknown metric {m!r}; expected one of {METRIC_NAMES}")
    if ("advmt" in metrics or "gm" in metrics) and model is None and not args.embeddings:
        raise UsageError("metrics 'advmt'/'gm' require --checkpoint")
    if model is not None:
        try:
            task = model.task_by_name(args.task)
        except KeyError as e:
            raise UsageError(str(e)) from e
    embeddings = WordEmbeddings.from_text_file(args.embeddings) if args.embeddings else None

    pairs = evalkit.read_eval_file(args.input)
    compute_metric_columns(pairs, metrics, model=model, task=task,
                           embeddings=embeddings, smooth=not args.no_smoothing)
    columns = list(metrics)
    if args.blend:
        if "gm" not in metrics or "advmt" not in metrics:
            raise UsageError("--blend requires both 'gm' and 'advmt' in --metrics")
        columns.append(add_blend_column(pairs, args.blend))

    report = evalkit.correlate(pairs, columns)
    for name, reason in report.errors.items():
        print(f"warning: metric {name}: {reason}", file=sys.stderr)
    evalkit.write_report(report, args.report)
    print(f"wrote report {args.report}")
    if args.figures:
        for path in plots.render_eval_figures(pairs, columns, report, args.figures):
            print(f"wrote figure {path}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    """Finite-difference check of the combined loss on a tiny model."""
    from .config import Config, TaskConfig

    rng = np.random.default_rng(args.seed)
    cfg = Config(d_e=args.d_e, d_h=args.d_h, d_m2=5, batch_size=2,
                 max_steps=1, eval_interval=1,
                 tasks=[TaskConfig("a", "-", 1), TaskConfig("b", "-", 1)])
    vocab_size = 10
    vocabs = [Vocabulary.from_tokens([f"t{i}" for i in range(vocab_size - 2)])
              for _ in range(2)]
    from .multitask import build_model
    model = build_model(cfg, vocabs, rng)

    def seq():
        return tuple(int(x) for x in rng.integers(2, vocab_size, size=rng.integers(2, 6)))

    triples = []
    for tid in range(2):
        pos = seq()
        neg = seq()
        while neg == pos:
            neg = seq()
        triples.append(TrainingTriple(seq(), pos, neg, tid))

    params = model.parameters()
    err = finite_difference_check(
        lambda: combined_loss(model, triples, cfg.margin), params, h=args.h)
    print(f"checked {sum(p.value.size for p in params)} coordinates; "
          f"max relative error {err:.3e}")
    if err >= args.tolerance:
        print(f"FAIL: exceeds tolerance {args.tolerance:g}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"PASS: within tolerance {args.tolerance:g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="advmt",
        description="Adversarial multi-task neural metric for dialogue evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--output", required=True, help="checkpoint path to write")
    p.add_argument("--log", help="training-log TSV path (default: next to checkpoint)")
    p.add_argument("--figures", help="directory for training-curve figures")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score query/reply TSV rows")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--task", required=True)
    p.add_argument("--input", required=True, help="TSV of query<TAB>reply")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="correlate metrics against human scores")
    p.add_argument("--checkpoint", help="needed for the advmt and gm metrics")
    p.add_argument("--task", help="task name inside the checkpoint")
    p.add_argument("--input", required=True,
                   help="TSV of query<TAB>generated<TAB>reference<TAB>human_score")
    p.add_argument("--metrics", default="bleu1,bleu2,bleu3,bleu4,rouge_l,gm,advmt")
    p.add_argument("--blend", choices=evalkit.BLEND_STRATEGIES,
                   help="also blend normalized advmt with gm")
    p.add_argument("--embeddings", help="external 'token v1 v2 ...' file for gm")
    p.add_argument("--no-smoothing", action="store_true",
                   help="disable add-one BLEU smoothing for n >= 2")
    p.add_argument("--report", required=True, help="correlation report TSV path")
    p.add_argument("--figures", help="directory for scatter/bar figures")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck",
                       help="finite-difference check of the combined loss")
    p.add_argument("--d-e", type=int, default=4)
    p.add_argument("--d-h", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--h", type=float, default=1e-5)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, CorpusError, EvalDataError, CheckpointError,
            MetricError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericsError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
