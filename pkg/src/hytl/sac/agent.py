"""Hybrid soft actor-critic: categorical primitive head, tanh-Gaussian
parameter head, waypoint-conditioned twin critics with target copies.

Parameter dims beyond a primitive's arity are masked out of the squashed
sample, the log-density and therefore every gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad
from ..autodiff import ParamStore, Tensor
from ..nn import Mlp, MlpConfig
from .replay import EmptyBatch

_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)
_LOG_2 = np.log(2.0)


@dataclass
class SacConfig:
    obs_dim: int
    n_primitives: int = 5
    param_dim: int = 5
    arities: tuple[int, ...] = (3, 3, 5, 0, 4)
    hidden: tuple[int, ...] = (64, 64)
    gamma: float = 0.99
    tau: float = 0.005
    lr: float = 3e-4
    alpha_k: float = 0.1
    alpha_p: float = 0.1
    twin_critics: bool = True
    autotune: bool = False
    log_std_min: float = -5.0
    log_std_max: float = 2.0

    def __post_init__(self):
        if len(self.arities) != self.n_primitives:
            raise ValueError("one arity per primitive required")
        if max(self.arities) > self.param_dim:
            raise ValueError("arity cannot exceed the parameter dimension")
        if self.alpha_k <= 0 or self.alpha_p <= 0:
            raise ValueError("temperatures must be positive")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")


@dataclass
class SampledParams:
    x: Tensor        # (B, P) squashed, masked
    log_prob: Tensor  # (B, 1) masked per-arity log density


class SacAgent:
    def __init__(self, config: SacConfig, rng: np.random.Generator):
        self.config = config
        cfg = config
        self.masks = np.zeros((cfg.n_primitives, cfg.param_dim))
        for k, arity in enumerate(cfg.arities):
            self.masks[k, :arity] = 1.0

        hidden = list(cfg.hidden)
        self.pi_k_store = ParamStore()
        self.pi_k = Mlp(
            self.pi_k_store, "pi_k", cfg.obs_dim,
            MlpConfig(hidden + [cfg.n_primitives], hidden_act="relu"), rng,
        )
        self.pi_p_store = ParamStore()
        self.pi_p = Mlp(
            self.pi_p_store, "pi_p", cfg.obs_dim + cfg.n_primitives,
            MlpConfig(hidden + [2 * cfg.param_dim], hidden_act="relu"), rng,
        )
        q_in = cfg.obs_dim + cfg.n_primitives + cfg.param_dim
        self.critic_store = ParamStore()
        self.q1 = Mlp(self.critic_store, "q1", q_in, MlpConfig(hidden + [1], hidden_act="relu"), rng)
        self.q2 = (
            Mlp(self.critic_store, "q2", q_in, MlpConfig(hidden + [1], hidden_act="relu"), rng)
            if cfg.twin_critics
            else None
        )
        self.target_store = ParamStore()
        self.t1 = Mlp(self.target_store, "q1", q_in, MlpConfig(hidden + [1], hidden_act="relu"), rng)
        self.t2 = (
            Mlp(self.target_store, "q2", q_in, MlpConfig(hidden + [1], hidden_act="relu"), rng)
            if cfg.twin_critics
            else None
        )
        self.target_store.copy_values_from(self.critic_store)

        self.alpha_store = ParamStore()
        if cfg.autotune:
            self.log_alpha_k = self.alpha_store.add("log_alpha_k", np.log(cfg.alpha_k))
            self.log_alpha_p = self.alpha_store.add("log_alpha_p", np.log(cfg.alpha_p))
            self.target_entropy_k = 0.5 * np.log(cfg.n_primitives)
        else:
            self.log_alpha_k = self.log_alpha_p = None

    # -- temperatures -------------------------------------------------------

    @property
    def alpha_k(self) -> float:
        if self.log_alpha_k is not None:
            return float(np.exp(self.log_alpha_k.data))
        return self.config.alpha_k

    @property
    def alpha_p(self) -> float:
        if self.log_alpha_p is not None:
            return float(np.exp(self.log_alpha_p.data))
        return self.config.alpha_p

    # -- policy heads -------------------------------------------------------

    def one_hot(self, ks: np.ndarray) -> np.ndarray:
        out = np.zeros((len(ks), self.config.n_primitives))
        out[np.arange(len(ks)), ks] = 1.0
        return out

    def primitive_distribution(self, obs: Tensor) -> tuple[Tensor, Tensor]:
        """(log-probs, probs) of the categorical head, each (B, K)."""
        logits = self.pi_k(obs)
        logp = ad.log_softmax(logits, axis=-1)
        return logp, ad.exp(logp)

    def sample_params(self, obs: Tensor, onehot: np.ndarray,
                      eps: np.ndarray | None) -> SampledParams:
        """Reparameterized tanh-Gaussian draw conditioned on the primitive.

        eps=None takes the distribution mode (deterministic action).
        """
        cfg = self.config
        inp = ad.concat([obs, ad.const(onehot)], axis=1)
        out = self.pi_p(inp)
        mean = ad.slice_(out, (slice(None), slice(0, cfg.param_dim)))
        raw_std = ad.slice_(out, (slice(None), slice(cfg.param_dim, 2 * cfg.param_dim)))
        # smooth clamp keeps log-std inside [min, max] without gradient kinks
        half_span = 0.5 * (cfg.log_std_max - cfg.log_std_min)
        log_std = ad.add(
            ad.scale(ad.add(ad.tanh(raw_std), ad.const(1.0)), half_span),
            ad.const(cfg.log_std_min),
        )
        std = ad.exp(log_std)
        mask = ad.const(onehot @ self.masks)  # (B, P) arity mask
        if eps is None:
            eps = np.zeros_like(mean.data)
        eps_c = ad.const(eps)
        u = ad.add(mean, ad.mul(std, eps_c))
        x = ad.mul(ad.tanh(u), mask)
        # log N(u; mean, std) - log(1 - tanh(u)^2), dims beyond the arity dropped
        gauss = ad.neg(
            ad.add(
                ad.add(ad.scale(ad.square(eps_c), 0.5), log_std),
                ad.const(_HALF_LOG_2PI),
            )
        )
        squash = ad.scale(
            ad.sub(
                ad.const(np.full_like(eps, _LOG_2)),
                ad.add(u, ad.softplus(ad.scale(u, -2.0))),
            ),
            2.0,
        )
        per_dim = ad.mul(ad.sub(gauss, squash), mask)
        log_prob = ad.reshape(ad.sum_(per_dim, axis=1), (-1, 1))
        return SampledParams(x, log_prob)

    def act_random(self, rng: np.random.Generator) -> tuple[int, np.ndarray]:
        """Uniform exploration action (warmup phase)."""
        k = int(rng.integers(self.config.n_primitives))
        x = rng.uniform(-1.0, 1.0, size=self.config.param_dim) * self.masks[k]
        return k, x

    def act(self, obs_vec: np.ndarray, rng: np.random.Generator | None,
            deterministic: bool = False) -> tuple[int, np.ndarray, float, float]:
        """One action for rollout; returns (k, x, log pi_k, log pi_p)."""
        with ad.no_grad():
            obs = ad.const(np.asarray(obs_vec, dtype=np.float64)[None, :])
            logp_k, probs = self.primitive_distribution(obs)
            p = probs.data[0]
            if deterministic:
                k = int(np.argmax(p))
            else:
                k = int(np.searchsorted(np.cumsum(p), rng.uniform()))
                k = min(k, self.config.n_primitives - 1)
            onehot = self.one_hot(np.array([k]))
            eps = (
                None if deterministic
                else rng.standard_normal((1, self.config.param_dim))
            )
            sampled = self.sample_params(obs, onehot, eps)
        # squashed samples stay strictly inside (-1, 1); masked dims are 0
        x = np.clip(sampled.x.data[0], -1.0 + 1e-12, 1.0 - 1e-12)
        return k, x, float(logp_k.data[0, k]), float(sampled.log_prob.data[0, 0])

    # -- critics ------------------------------------------------------------

    def _q(self, net: Mlp, obs: Tensor, onehot: np.ndarray, x: Tensor) -> Tensor:
        return net(ad.concat([obs, ad.const(onehot), x], axis=1))

    def min_q(self, obs: Tensor, onehot: np.ndarray, x: Tensor,
              target: bool = False) -> Tensor:
        first = self.t1 if target else self.q1
        second = self.t2 if target else self.q2
        q = self._q(first, obs, onehot, x)
        if second is not None:
            q = ad.minimum(q, self._q(second, obs, onehot, x))
        return q

    def critic_targets(
        self,
        next_obs: Tensor,
        reward: np.ndarray,
        terminal: np.ndarray,
        rng: np.random.Generator | None = None,
        next_k: np.ndarray | None = None,
        next_eps: np.ndarray | None = None,
    ) -> np.ndarray:
        """Soft bootstrap targets; fresh (k', x') at the next observation.

        Targets are constants for the critic update, so no graph is built.
        """
        cfg = self.config
        with ad.no_grad():
            logp_k, probs = self.primitive_distribution(next_obs)
            if next_k is None:
                cum = np.cumsum(probs.data, axis=1)
                draws = rng.uniform(size=(len(reward), 1))
                next_k = np.minimum(
                    (draws > cum).sum(axis=1), cfg.n_primitives - 1
                ).astype(np.int64)
            onehot = self.one_hot(next_k)
            if next_eps is None:
                next_eps = rng.standard_normal((len(reward), cfg.param_dim))
            sampled = self.sample_params(next_obs, onehot, next_eps)
            q_next = self.min_q(next_obs, onehot, sampled.x, target=True).data[:, 0]
        logpk_taken = logp_k.data[np.arange(len(reward)), next_k]
        soft = q_next - self.alpha_k * logpk_taken - self.alpha_p * sampled.log_prob.data[:, 0]
        return reward + cfg.gamma * (1.0 - terminal) * soft

    def critic_loss_from_targets(self, obs: Tensor, k: np.ndarray, x: np.ndarray,
                                 targets: np.ndarray) -> Tensor:
        if len(k) == 0:
            raise EmptyBatch("critic loss needs a non-empty batch")
        onehot = self.one_hot(k)
        y = ad.const(targets[:, None])
        loss = ad.mean(ad.square(ad.sub(self._q(self.q1, obs, onehot, ad.const(x)), y)))
        if self.q2 is not None:
            loss = ad.add(
                loss,
                ad.mean(ad.square(ad.sub(self._q(self.q2, obs, onehot, ad.const(x)), y))),
            )
        return loss

    def critic_loss(self, obs: Tensor, next_obs: Tensor, k, x, reward, terminal,
                    rng=None, next_k=None, next_eps=None) -> Tensor:
        targets = self.critic_targets(next_obs, reward, terminal, rng, next_k, next_eps)
        return self.critic_loss_from_targets(obs, k, x, targets)

    # -- policy losses ------------------------------------------------------

    def primitive_loss(self, obs: Tensor, rng=None, eps_bank: np.ndarray | None = None,
                       q_fn=None, alpha: float | None = None) -> Tensor:
        """Exact expectation over all primitives (K is tiny).

        The default path tiles the batch K-fold so the parameter head and the
        critics run once; a per-primitive loop remains for injected analytic
        critics.
        """
        cfg = self.config
        batch = obs.data.shape[0]
        if batch == 0:
            raise EmptyBatch("primitive loss needs a non-empty batch")
        alpha = self.alpha_k if alpha is None else alpha
        n_k = cfg.n_primitives
        logp, probs = self.primitive_distribution(obs)
        if eps_bank is None:
            eps_bank = rng.standard_normal((n_k, batch, cfg.param_dim))

        if q_fn is not None:
            total = None
            for k in range(n_k):
                onehot = self.one_hot(np.full(batch, k))
                sampled = self.sample_params(obs, onehot, eps_bank[k])
                qk = q_fn(onehot, sampled.x)
                col = (slice(None), slice(k, k + 1))
                term = ad.mul(
                    ad.slice_(probs, col),
                    ad.sub(ad.scale(ad.slice_(logp, col), alpha), qk),
                )
                total = term if total is None else ad.add(total, term)
            return ad.mean(total)

        tiled = ad.gather(obs, np.tile(np.arange(batch), n_k))
        onehot = self.one_hot(np.repeat(np.arange(n_k), batch))
        sampled = self.sample_params(tiled, onehot, eps_bank.reshape(n_k * batch, -1))
        q_kb = ad.reshape(self.min_q(tiled, onehot, sampled.x), (n_k, batch))
        term = ad.mul(
            ad.transpose(probs),
            ad.sub(ad.scale(ad.transpose(logp), alpha), q_kb),
        )
        return ad.mean(ad.sum_(term, axis=0))

    def parameter_loss(self, obs: Tensor, rng=None, ks: np.ndarray | None = None,
                       eps: np.ndarray | None = None, q_fn=None,
                       alpha: float | None = None) -> Tensor:
        cfg = self.config
        batch = obs.data.shape[0]
        if batch == 0:
            raise EmptyBatch("parameter loss needs a non-empty batch")
        if ks is None:
            with ad.no_grad():
                _, probs = self.primitive_distribution(obs)
            cum = np.cumsum(probs.data, axis=1)
            ks = np.minimum(
                (rng.uniform(size=(batch, 1)) > cum).sum(axis=1), cfg.n_primitives - 1
            ).astype(np.int64)
        onehot = self.one_hot(ks)
        if eps is None:
            eps = rng.standard_normal((batch, cfg.param_dim))
        sampled = self.sample_params(obs, onehot, eps)
        if q_fn is None:
            q_fn = lambda oh, x: self.min_q(obs, oh, x)
        q = q_fn(onehot, sampled.x)
        alpha = self.alpha_p if alpha is None else alpha
        return ad.mean(ad.sub(ad.scale(sampled.log_prob, alpha), q))

    def temperature_loss(self, obs: Tensor, rng: np.random.Generator) -> Tensor:
        """log-alpha losses pushing entropies toward their targets."""
        cfg = self.config
        logp, probs = self.primitive_distribution(obs)
        h_k = float(-(probs.data * logp.data).sum(axis=1).mean())
        cum = np.cumsum(probs.data, axis=1)
        ks = np.minimum(
            (rng.uniform(size=(cum.shape[0], 1)) > cum).sum(axis=1),
            cfg.n_primitives - 1,
        ).astype(np.int64)
        sampled = self.sample_params(
            obs, self.one_hot(ks), rng.standard_normal((len(ks), cfg.param_dim))
        )
        h_p = float(-sampled.log_prob.data.mean())
        target_p = -float(np.mean([cfg.arities[k] for k in ks]))
        loss_k = ad.scale(self.log_alpha_k, h_k - self.target_entropy_k)
        loss_p = ad.scale(self.log_alpha_p, h_p - target_p)
        return ad.add(loss_k, loss_p)

    def soft_update_targets(self, tau: float | None = None) -> None:
        ad.soft_update(self.target_store, self.critic_store,
                       self.config.tau if tau is None else tau)

    # -- checkpointing ------------------------------------------------------

    def stores(self) -> dict[str, ParamStore]:
        out = {
            "pi_k": self.pi_k_store,
            "pi_p": self.pi_p_store,
            "critic": self.critic_store,
            "target": self.target_store,
        }
        if self.config.autotune:
            out["alpha"] = self.alpha_store
        return out
