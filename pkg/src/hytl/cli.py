"""Command-line entry point: train, eval, progress REPL, attcat, tasks."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .env import dump_trajectory, task_library
from .harness import ConfigError, RunConfig, evaluate, load_run_checkpoint, train
from .interpret import attcat_scores, emit_heatmap
from .ltl import (
    FormulaTable,
    LtlError,
    parse,
    progress_step,
    infer_alphabet,
    to_text,
)


def _cmd_train(args) -> int:
    config = RunConfig.from_toml(args.config, seed=args.seed)
    result = train(config, args.out)
    print(
        f"task={config.task} seed={config.seed} env_steps={result.env_steps} "
        f"episodes={result.episodes} eval_success={result.final_eval_success:.2f}"
    )
    print(f"metrics: {result.metrics_path}")
    print(f"checkpoint: {result.checkpoint_path}")
    return 0


def _cmd_eval(args) -> int:
    ctx, meta = load_run_checkpoint(args.checkpoint)
    success, mean_return, results = evaluate(
        ctx, args.episodes, collect_traces=args.dump is not None
    )
    print(
        f"task={ctx.config.task} episodes={args.episodes} "
        f"success_rate={success:.3f} mean_return={mean_return:.4f}"
    )
    if args.dump is not None:
        import os

        os.makedirs(args.dump, exist_ok=True)
        for i, res in enumerate(results):
            dump_trajectory(os.path.join(args.dump, f"episode_{i:03d}.jsonl"), res.trace)
        print(f"trajectories: {args.dump}")
    return 0


def _cmd_progress(args) -> int:
    alphabet = infer_alphabet(args.formula)
    phi = parse(args.formula, alphabet)
    table = FormulaTable()
    fid = table.intern(phi)
    for line in sys.stdin:
        names = [part.strip() for part in line.split(",")]
        names = [n for n in names if n]
        try:
            sigma = alphabet.assignment(names)
        except LtlError as err:
            print(f"error: {err}", file=sys.stderr)
            return 1
        outcome = progress_step(table, sigma, fid)
        fid = outcome.next_id
        print(to_text(table.formula(fid)))
        sys.stdout.flush()
    return 0


def _cmd_attcat(args) -> int:
    ctx, meta = load_run_checkpoint(args.checkpoint)
    if ctx.trainer.encoder is None:
        print("error: checkpoint was trained with the encoder disabled", file=sys.stderr)
        return 1
    alphabet = ctx.task.alphabet
    phi = parse(args.formula, alphabet)
    if args.cls not in alphabet:
        print(
            f"error: class {args.cls!r} not a proposition of task {ctx.config.task}; "
            f"known: {list(alphabet.names)}",
            file=sys.stderr,
        )
        return 1
    class_id = alphabet.prop(args.cls).pid
    scores = attcat_scores(
        ctx.trainer.encoder, ctx.trainer.probe, phi, class_id, ctx.vocab
    )
    emit_heatmap(scores, args.out)
    order = np.argsort(scores.raw)[::-1]
    print(f"class={args.cls} tokens by impact:")
    for i in order:
        print(f"  {scores.tokens[i]:<16} {scores.raw[i]:+.6f}")
    print(f"heatmap: {args.out}")
    return 0


def _cmd_tasks(args) -> int:
    for task in task_library():
        print(f"{task.name:<14} horizon={task.horizon:<4} formula: {task.formula_text}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hytl",
        description="Temporal-logic-guided hybrid-policy RL on a tabletop world",
    )
    sub = parser.add_subparsers(dest="command")

    p_train = sub.add_parser("train", help="train a policy from a TOML config")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--seed", type=int, default=None, help="override config seed")
    p_train.add_argument("--out", required=True, help="output run directory")
    p_train.set_defaults(func=_cmd_train)

    p_eval = sub.add_parser("eval", help="deterministic evaluation of a checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--episodes", type=int, default=20)
    p_eval.add_argument("--dump", default=None, help="write trajectory JSONL here")
    p_eval.set_defaults(func=_cmd_eval)

    p_prog = sub.add_parser(
        "progress",
        help="progression REPL: reads comma-separated proposition names per line",
    )
    p_prog.add_argument("--formula", required=True)
    p_prog.set_defaults(func=_cmd_progress)

    p_att = sub.add_parser("attcat", help="per-token impact scores for a formula")
    p_att.add_argument("--checkpoint", required=True)
    p_att.add_argument("--formula", required=True)
    p_att.add_argument("--class", dest="cls", required=True, help="target proposition")
    p_att.add_argument("--out", required=True, help="heatmap CSV path")
    p_att.set_defaults(func=_cmd_attcat)

    p_tasks = sub.add_parser("tasks", help="list the task library")
    p_tasks.set_defaults(func=_cmd_tasks)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.func(args)
    except (LtlError, ConfigError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
