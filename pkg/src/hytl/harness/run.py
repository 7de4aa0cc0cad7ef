"""Outer training loop: explore, train, evaluate, checkpoint, emit metrics."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..env import run_scripted
from ..ltl import FormulaTable, Verdict, progress_step, shaped_reward, simplify
from .config import RunConfig
from .rollout import EVAL_SEED_BASE, RunContext, build_context, evaluate, run_episode

METRICS_HEADER = (
    "wall_ms,env_steps,episode,return,success,jq,jpk,jpp,jw,probe_ce,"
    "waypoints_reached,formula_id"
)
EVAL_HEADER = "env_steps,success_rate,mean_return,episodes"


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def scripted_oracle_return(ctx: RunContext, episodes: int = 20) -> float:
    """Mean shaped return of the scripted solution over the eval layouts.

    Serves as the per-task normalizer for learning curves. The scripted run
    has no waypoint plan, so only the subgoal bonus applies.
    """
    cfg = ctx.config
    totals = []
    for i in range(episodes):
        run = run_scripted(ctx.task, EVAL_SEED_BASE + i)
        table = FormulaTable()
        fid = table.intern(simplify(ctx.task.formula))
        total = 0.0
        for outcome in run.outcomes:
            step_out = progress_step(table, outcome.assignment, fid)
            r_env = outcome.r_env
            if (
                cfg.subgoal_bonus > 0
                and step_out.verdict is Verdict.ONGOING
                and step_out.next_id != fid
            ):
                r_env += cfg.subgoal_bonus
            total += shaped_reward(r_env, step_out, cfg.r_phi)
            fid = step_out.next_id
            if step_out.verdict is not Verdict.ONGOING:
                break
        totals.append(total)
    return float(np.mean(totals))


def save_run_checkpoint(ctx: RunContext, path, rng: np.random.Generator,
                        env_steps: int, episode: int) -> None:
    params = {}
    for store_name, store in ctx.stores().items():
        for name, tensor in store.items():
            params[f"{store_name}:{name}"] = tensor.data
    meta = {
        "config": ctx.config.to_dict(),
        "config_hash": ctx.config.config_hash(),
        "vocab": list(ctx.vocab.names),
        "vocab_max_len": ctx.vocab.max_len,
        "rng_state": rng.bit_generator.state if rng is not None else None,
        "env_steps": env_steps,
        "episode": episode,
    }
    ad.save_checkpoint(path, params, meta)


def load_run_checkpoint(path) -> tuple[RunContext, dict]:
    params, meta = ad.load_checkpoint(path)
    config = RunConfig.from_dict(meta["config"])
    ctx = build_context(config)
    for store_name, store in ctx.stores().items():
        prefix = f"{store_name}:"
        arrays = {
            name[len(prefix):]: arr
            for name, arr in params.items()
            if name.startswith(prefix)
        }
        store.load_arrays(arrays)
    return ctx, meta


@dataclass
class TrainResult:
    out_dir: str
    metrics_path: str
    eval_path: str
    checkpoint_path: str
    env_steps: int
    episodes: int
    final_eval_success: float
    ctx: RunContext


def train(config: RunConfig, out_dir) -> TrainResult:
    os.makedirs(out_dir, exist_ok=True)
    ctx = build_context(config)
    rng = np.random.default_rng([config.seed, 10])

    metrics_path = os.path.join(out_dir, "metrics.csv")
    eval_path = os.path.join(out_dir, "eval.csv")
    checkpoint_path = os.path.join(out_dir, "checkpoint.bin")

    env_steps = 0
    episode = 0
    wall_ms = 0  # simulated time: one micro-step of the world per millisecond
    losses = (float("nan"),) * 4
    last_jw = float("nan")
    next_eval = config.eval_interval
    final_success = 0.0
    stop = False

    with open(metrics_path, "w", encoding="utf-8") as mfh, open(
        eval_path, "w", encoding="utf-8"
    ) as efh:
        mfh.write(METRICS_HEADER + "\n")
        efh.write(EVAL_HEADER + "\n")
        while env_steps < config.total_env_steps and not stop:
            collected = 0
            for _ in range(config.episodes_per_iter):
                res = run_episode(
                    ctx, config.seed * 1_000_000 + episode, rng,
                    random_actions=env_steps < config.random_env_steps,
                )
                env_steps += res.steps
                collected += res.steps
                wall_ms += res.micro_steps
                episode += 1
                if not np.isnan(res.planner_loss):
                    last_jw = res.planner_loss
                row = [
                    str(wall_ms),
                    str(env_steps),
                    str(episode),
                    _fmt(res.episode_return),
                    str(int(res.success)),
                    _fmt(losses[0]),
                    _fmt(losses[1]),
                    _fmt(losses[2]),
                    _fmt(last_jw),
                    _fmt(losses[3]),
                    str(res.waypoints_reached),
                    str(res.final_fid),
                ]
                mfh.write(",".join(row) + "\n")

            ready = (
                len(ctx.trainer.replay) >= config.batch_size
                and env_steps >= config.warmup_env_steps
            )
            if ready:
                n_updates = max(1, round(config.updates_per_env_step * collected))
                reports = [
                    ctx.trainer.train_step(config.batch_size, rng)
                    for _ in range(n_updates)
                ]
                losses = tuple(
                    float(np.nanmean([r.as_tuple()[i] for r in reports]))
                    for i in range(4)
                )

            while env_steps >= next_eval:
                success, mean_return, _ = evaluate(ctx, config.eval_episodes)
                final_success = success
                efh.write(
                    f"{env_steps},{_fmt(success)},{_fmt(mean_return)},"
                    f"{config.eval_episodes}\n"
                )
                next_eval += config.eval_interval
                if 0 < config.early_stop_success <= success:
                    stop = True
                    break

    save_run_checkpoint(ctx, checkpoint_path, rng, env_steps, episode)
    meta = {
        "task": config.task,
        "seed": config.seed,
        "config_hash": config.config_hash(),
        "oracle_return": scripted_oracle_return(ctx),
        "env_steps": env_steps,
        "episodes": episode,
        "final_eval_success": final_success,
    }
    with open(os.path.join(out_dir, "run_meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    return TrainResult(
        str(out_dir), metrics_path, eval_path, checkpoint_path,
        env_steps, episode, final_success, ctx,
    )
