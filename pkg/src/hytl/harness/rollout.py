"""Episode rollout: observe, act, execute, progress, shape, record."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad
from ..env import HybridAction, PrimitiveKind, TabletopEnv, TaskSpec, outcome_to_dict
from ..interpret import ProbeHead
from ..ltl import (
    FormulaTable,
    TokenVocab,
    Verdict,
    progress_step,
    shaped_reward,
    simplify,
)
from ..nn import TransformerConfig, TransformerEncoder
from ..planner import PlannerConfig, WaypointPolicy, advance, planner_loss
from ..sac import ReplayBuffer, SacAgent, SacConfig, SacTrainer, TrainerFlags
from .config import RunConfig

EVAL_SEED_BASE = 10_000_000


def world_features(state, object_names) -> np.ndarray:
    parts = [state.gripper, [1.0 if state.gripper_open else 0.0]]
    for name in object_names:
        parts.append(state.objects[name])
    return np.concatenate(parts)


@dataclass
class RunContext:
    config: RunConfig
    task: TaskSpec
    env: TabletopEnv
    table: FormulaTable
    vocab: TokenVocab
    trainer: SacTrainer
    planner: WaypointPolicy | None
    task_fid: int
    feat_dim: int

    def stores(self) -> dict:
        out = dict(self.trainer.agent.stores())
        if self.trainer.encoder_store is not None:
            out["encoder"] = self.trainer.encoder_store
        if self.trainer.probe_store is not None:
            out["probe"] = self.trainer.probe_store
        if self.planner is not None:
            out["planner"] = self.planner.store
        return out


def build_context(config: RunConfig) -> RunContext:
    from ..env import task_by_name

    config.validate()
    task = task_by_name(config.task)
    env = TabletopEnv(task)
    table = FormulaTable()
    task_fid = table.intern(simplify(task.formula))
    vocab = TokenVocab.for_alphabet(task.alphabet, config.enc_max_len)

    feat_dim = 4 + 3 * len(task.objects)
    obs_dim = feat_dim + config.enc_dim + 6

    agent = SacAgent(
        SacConfig(
            obs_dim=obs_dim,
            gamma=config.gamma,
            tau=config.tau,
            lr=config.lr,
            alpha_k=config.alpha_k,
            alpha_p=config.alpha_p,
            twin_critics=config.twin_critics,
            autotune=config.autotune_temperatures,
            hidden=(config.hidden, config.hidden),
        ),
        np.random.default_rng([config.seed, 1]),
    )

    encoder = encoder_store = probe = probe_store = None
    if config.encoder_enabled:
        encoder_store = ad.ParamStore()
        encoder = TransformerEncoder(
            encoder_store,
            TransformerConfig(
                layers=config.enc_layers,
                dim=config.enc_dim,
                heads=config.enc_heads,
                mlp_hidden=config.enc_mlp_hidden,
                max_len=config.enc_max_len,
                vocab_size=len(vocab),
                pool=config.enc_pool,
            ),
            np.random.default_rng([config.seed, 2]),
        )
        probe_store = ad.ParamStore()
        probe = ProbeHead(
            probe_store, config.enc_dim, len(task.alphabet),
            np.random.default_rng([config.seed, 3]),
        )

    planner = None
    if config.waypoints_enabled:
        planner = WaypointPolicy(
            PlannerConfig(
                state_dim=feat_dim,
                hidden_dim=config.planner_hidden,
                n_waypoints=config.n_waypoints,
                eps_reach=config.eps_reach,
            ),
            np.random.default_rng([config.seed, 4]),
        )

    replay = ReplayBuffer(config.replay_capacity, feat_dim=feat_dim, param_dim=5)
    flags = TrainerFlags(
        encoder_enabled=config.encoder_enabled,
        waypoints_enabled=config.waypoints_enabled,
        train_encoder=config.encoder_enabled,
    )
    trainer = SacTrainer(
        agent, replay, table, vocab, encoder, encoder_store, probe, probe_store,
        flags, embed_dim=config.enc_dim,
    )
    return RunContext(config, task, env, table, vocab, trainer, planner, task_fid, feat_dim)


@dataclass
class EpisodeResult:
    episode_return: float
    success: bool
    steps: int
    micro_steps: int
    waypoints_reached: int
    final_fid: int
    planner_loss: float = float("nan")
    trace: list = field(default_factory=list)


def run_episode(
    ctx: RunContext,
    episode_seed: int,
    rng: np.random.Generator | None,
    deterministic: bool = False,
    push_replay: bool = True,
    update_planner: bool = True,
    collect_trace: bool = False,
    random_actions: bool = False,
) -> EpisodeResult:
    cfg = ctx.config
    env, table, trainer = ctx.env, ctx.table, ctx.trainer
    state = env.reset(episode_seed)
    fid = ctx.task_fid
    feats = world_features(state, ctx.task.object_names())
    emb_cache: dict[int, np.ndarray] = {}

    plan = None
    if ctx.planner is not None:
        if deterministic or not update_planner:
            with ad.no_grad():
                plan = ctx.planner.sample_plan(feats, rng=rng, deterministic=deterministic)
        else:
            plan = ctx.planner.sample_plan(feats, rng=rng, deterministic=deterministic)

    total = 0.0
    micro = 0
    wp_reached = 0
    success = False
    trace: list = []
    steps = 0
    done = False
    while not done and steps < ctx.task.horizon:
        w_active = plan.active_waypoint() if plan is not None else np.zeros(3)
        emb = emb_cache.get(fid)
        if emb is None:
            emb = trainer.embed_formula(fid)
            emb_cache[fid] = emb
        obs = trainer.observe_single(feats, fid, w_active, emb)
        if random_actions:
            k, x = trainer.agent.act_random(rng)
        else:
            k, x, _, _ = trainer.agent.act(obs, rng, deterministic=deterministic)
        action = HybridAction(PrimitiveKind(k), x)
        outcome = env.step(state, action)
        step_out = progress_step(table, outcome.assignment, fid)

        r_env = outcome.r_env
        if plan is not None:
            advanced = advance(plan, outcome.state.gripper, cfg.eps_reach)
            if advanced.active > plan.active:
                wp_reached += 1
                r_env += cfg.waypoint_bonus
            plan = advanced
        if (
            cfg.subgoal_bonus > 0
            and step_out.verdict is Verdict.ONGOING
            and step_out.next_id != fid
        ):
            r_env += cfg.subgoal_bonus
        reward = shaped_reward(r_env, step_out, cfg.r_phi)

        done = step_out.verdict is not Verdict.ONGOING
        steps += 1
        terminal = done or outcome.state.primitive_calls >= ctx.task.horizon
        next_feats = world_features(outcome.state, ctx.task.object_names())
        w_next = plan.active_waypoint() if plan is not None else np.zeros(3)
        if push_replay:
            trainer.replay.push(
                feats, fid, w_active, k, x, reward, next_feats,
                step_out.next_id, w_next, terminal,
            )
        if collect_trace:
            row = outcome_to_dict(ctx.task, action, outcome)
            row["formula"] = str(table.formula(step_out.next_id))
            row["reward"] = reward
            if plan is not None:
                row["active_waypoint"] = [round(float(v), 6) for v in w_next]
            trace.append(row)

        total += reward
        micro += outcome.micro_steps
        state = outcome.state
        feats = next_feats
        fid = step_out.next_id
        if done:
            success = step_out.verdict is Verdict.SATISFIED_NOW

    jw = float("nan")
    if plan is not None and update_planner and not deterministic:
        baseline = ctx.planner.baseline if cfg.planner_baseline else 0.0
        loss = planner_loss(plan, total, baseline)
        nodes = ad.backward(loss)
        ad.adam_step(ctx.planner.store, lr=cfg.planner_lr)
        ad.clear_graph(nodes)
        ctx.planner.update_baseline(total)
        jw = float(loss.data)

    return EpisodeResult(total, success, steps, micro, wp_reached, fid, jw, trace)


def evaluate(ctx: RunContext, episodes: int, collect_traces: bool = False):
    """Deterministic policy over a fixed, seed-independent layout set."""
    results = []
    for i in range(episodes):
        results.append(
            run_episode(
                ctx, EVAL_SEED_BASE + i, rng=None, deterministic=True,
                push_replay=False, update_planner=False, collect_trace=collect_traces,
            )
        )
    success = float(np.mean([r.success for r in results]))
    mean_return = float(np.mean([r.episode_return for r in results]))
    return success, mean_return, results
