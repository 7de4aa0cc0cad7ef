"""Waypoint planning policy: a residual GRU chain with Gaussian sampling.

One plan is drawn per episode from the initial state. Each waypoint is sampled
around a mean that deviates residually from the previous (sampled) waypoint,
clamped into the workspace; log-densities are taken pre-clamp. The policy is
updated episodically by a return-weighted score-function loss.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor
from .nn import GruCell, Mlp, MlpConfig

_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass
class PlannerConfig:
    state_dim: int
    hidden_dim: int = 32
    n_waypoints: int = 3
    waypoint_dim: int = 3
    eps_reach: float = 0.05
    sigma_floor: float = 1e-8
    sigma_bias_init: float = -1.0   # softplus(-1) ~ 0.31 initial spread
    baseline_decay: float = 0.99
    use_baseline: bool = True

    def __post_init__(self):
        if self.n_waypoints < 1:
            raise ValueError("a plan needs at least one waypoint")
        if self.eps_reach <= 0:
            raise ValueError("eps_reach must be positive")


@dataclass(frozen=True)
class WaypointPlan:
    """Sampled chain; `raw` is pre-clamp, `waypoints` is the clamped chain."""

    waypoints: np.ndarray
    raw: np.ndarray
    log_probs: tuple[Tensor, ...]
    active: int = 0

    @property
    def n(self) -> int:
        return self.waypoints.shape[0]

    @property
    def exhausted(self) -> bool:
        return self.active >= self.n

    def active_waypoint(self) -> np.ndarray:
        # Guidance holds the last waypoint once the chain is exhausted.
        return self.waypoints[min(self.active, self.n - 1)]


class WaypointPolicy:
    def __init__(self, config: PlannerConfig, rng: np.random.Generator):
        self.config = config
        self.store = ParamStore()
        self.trunk = Mlp(
            self.store, "plan/trunk", config.state_dim,
            MlpConfig([config.hidden_dim], out_act="tanh"), rng,
        )
        d = config.waypoint_dim
        self.w0_w = self.store.add(
            "plan/w0_w", rng.normal(scale=0.1, size=(config.hidden_dim, d))
        )
        self.w0_b = self.store.add("plan/w0_b", np.full(d, 0.5))
        self.sigma_w = self.store.add(
            "plan/sigma_w", rng.normal(scale=0.1, size=(config.hidden_dim, d))
        )
        self.sigma_b = self.store.add("plan/sigma_b", np.full(d, config.sigma_bias_init))
        self.gru = GruCell(self.store, "plan/gru", d, config.hidden_dim, rng, delta_dim=d)
        self.baseline = 0.0

    def _sigma(self, h: Tensor) -> Tensor:
        raw = ad.add(ad.matmul(h, self.sigma_w), self.sigma_b)
        return ad.add(ad.softplus(raw), ad.const(self.config.sigma_floor))

    def _gauss_logp(self, value: np.ndarray, mean: Tensor, sigma: Tensor) -> Tensor:
        z = ad.div(ad.sub(ad.const(value[None, :]), mean), sigma)
        per_dim = ad.add(
            ad.add(ad.scale(ad.square(z), 0.5), ad.log(sigma)),
            ad.const(_HALF_LOG_2PI),
        )
        return ad.neg(ad.sum_(per_dim))

    def _chain(self, s0_feats: np.ndarray, n: int, draw):
        """Shared chain walk; draw(i, mean, sigma) -> pre-clamp waypoint i."""
        cfg = self.config
        h = self.trunk(ad.const(np.asarray(s0_feats, dtype=np.float64)[None, :]))
        mean = ad.add(ad.matmul(h, self.w0_w), self.w0_b)
        sigma = self._sigma(h)
        raws = np.zeros((n, cfg.waypoint_dim))
        clamped = np.zeros_like(raws)
        log_probs = []
        for i in range(n):
            raws[i] = draw(i, mean.data[0], sigma.data[0])
            clamped[i] = np.clip(raws[i], 0.0, 1.0)
            log_probs.append(self._gauss_logp(raws[i], mean, sigma))
            if i + 1 < n:
                w_const = ad.const(clamped[i][None, :])
                delta, h = self.gru.step(w_const, h)
                mean = ad.add(w_const, delta)
                sigma = self._sigma(h)
        return WaypointPlan(clamped, raws, tuple(log_probs))

    def sample_plan(
        self,
        s0_feats: np.ndarray,
        n: int | None = None,
        rng: np.random.Generator | None = None,
        deterministic: bool = False,
    ) -> WaypointPlan:
        n = self.config.n_waypoints if n is None else n
        if deterministic:
            return self._chain(s0_feats, n, lambda i, m, s: m)
        return self._chain(
            s0_feats, n,
            lambda i, m, s: m + s * rng.standard_normal(self.config.waypoint_dim),
        )

    def plan_log_prob(self, s0_feats: np.ndarray, raw_waypoints: np.ndarray) -> WaypointPlan:
        """Teacher-forced chain over given pre-clamp samples (fresh graph)."""
        raw = np.asarray(raw_waypoints, dtype=np.float64)
        return self._chain(s0_feats, raw.shape[0], lambda i, m, s: raw[i])

    def update_baseline(self, episode_return: float) -> None:
        decay = self.config.baseline_decay
        self.baseline = decay * self.baseline + (1.0 - decay) * episode_return


def advance(plan: WaypointPlan, gripper_pos: np.ndarray, eps_reach: float) -> WaypointPlan:
    """Move to the next waypoint once the gripper is within eps of the active one."""
    if eps_reach <= 0:
        raise ValueError("eps_reach must be positive")
    if plan.exhausted:
        return plan
    dist = np.linalg.norm(np.asarray(gripper_pos) - plan.waypoints[plan.active])
    if dist < eps_reach:
        return replace(plan, active=plan.active + 1)
    return plan


def planner_loss(plan: WaypointPlan, episode_return: float, baseline: float) -> Tensor:
    """Score-function loss: -(sum of log-probs) * (return - baseline)."""
    total = plan.log_probs[0]
    for lp in plan.log_probs[1:]:
        total = ad.add(total, lp)
    return ad.scale(total, -(episode_return - baseline))
