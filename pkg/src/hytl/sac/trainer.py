"""One training step: critic, primitive, parameter and probe updates, with the
task encoder receiving accumulated gradient from the configured losses.

Each loss gets its own backward sweep; intermediate grads are cleared between
sweeps so the shared embedding subgraph can be reused without double counting.
The encoder takes one Adam step per train step from the harvested sum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad
from ..autodiff import ParamStore, Tensor
from ..interpret import ProbeHead, next_subgoal_id, probe_loss
from ..ltl import FormulaTable, TokenVocab, tokenize
from ..nn import TransformerEncoder
from .agent import SacAgent
from .replay import ReplayBatch, ReplayBuffer


@dataclass
class LossReport:
    jq: float = float("nan")
    jpk: float = float("nan")
    jpp: float = float("nan")
    probe_ce: float = float("nan")

    def as_tuple(self):
        return (self.jq, self.jpk, self.jpp, self.probe_ce)


@dataclass
class TrainerFlags:
    encoder_enabled: bool = True
    waypoints_enabled: bool = True
    train_encoder: bool = True
    # which losses back-propagate into the encoder
    encoder_grad_sources: tuple[str, ...] = ("q", "pik", "pip")
    probe_to_encoder: bool = False


class SacTrainer:
    def __init__(
        self,
        agent: SacAgent,
        replay: ReplayBuffer,
        table: FormulaTable,
        vocab: TokenVocab,
        encoder: TransformerEncoder | None,
        encoder_store: ParamStore | None,
        probe: ProbeHead | None,
        probe_store: ParamStore | None,
        flags: TrainerFlags,
        embed_dim: int,
    ):
        self.agent = agent
        self.replay = replay
        self.table = table
        self.vocab = vocab
        self.encoder = encoder
        self.encoder_store = encoder_store
        self.probe = probe
        self.probe_store = probe_store
        self.flags = flags
        self.embed_dim = embed_dim
        self._token_cache: dict[int, list[int]] = {}

    # -- observation assembly ------------------------------------------------

    def tokens_for(self, fid: int) -> list[int]:
        ids = self._token_cache.get(fid)
        if ids is None:
            ids = tokenize(self.table.formula(fid), self.vocab)
            self._token_cache[fid] = ids
        return ids

    def embed_formula(self, fid: int) -> np.ndarray:
        """Detached embedding for rollout observations."""
        if not self.flags.encoder_enabled:
            return np.zeros(self.embed_dim)
        with ad.no_grad():
            return self.encoder.encode(self.tokens_for(fid)).pooled.data.copy()

    def _phi_rows(self, fids: np.ndarray) -> tuple[Tensor | None, dict[int, int]]:
        distinct = sorted(set(int(f) for f in fids))
        index = {fid: i for i, fid in enumerate(distinct)}
        if not self.flags.encoder_enabled:
            return None, index
        rows = [
            ad.reshape(self.encoder.encode(self.tokens_for(fid)).pooled, (1, -1))
            for fid in distinct
        ]
        return ad.concat(rows, axis=0), index

    def _observe(self, feats: np.ndarray, fids: np.ndarray, waypoints: np.ndarray,
                 phi_mat: Tensor | None, index: dict[int, int]) -> Tensor:
        batch = feats.shape[0]
        if phi_mat is not None:
            emb = ad.gather(phi_mat, np.array([index[int(f)] for f in fids]))
        else:
            emb = ad.const(np.zeros((batch, self.embed_dim)))
        if self.flags.waypoints_enabled:
            w = waypoints
            offset = waypoints - feats[:, :3]
        else:
            w = np.zeros((batch, 3))
            offset = np.zeros((batch, 3))
        return ad.concat([ad.const(feats), emb, ad.const(w), ad.const(offset)], axis=1)

    def observe_single(self, feats: np.ndarray, fid: int, waypoint: np.ndarray,
                       emb: np.ndarray) -> np.ndarray:
        """Numpy observation vector for rollouts, given a detached embedding."""
        if self.flags.waypoints_enabled:
            w = waypoint
            offset = waypoint - feats[:3]
        else:
            w = np.zeros(3)
            offset = np.zeros(3)
        phi = emb if self.flags.encoder_enabled else np.zeros(self.embed_dim)
        return np.concatenate([feats, phi, w, offset])

    # -- probe targets --------------------------------------------------------

    def _probe_examples(self, fids: np.ndarray) -> tuple[list[int], np.ndarray]:
        rows, targets = [], []
        for fid in sorted(set(int(f) for f in fids)):
            target = next_subgoal_id(self.table, fid, self.vocab.n_props)
            if target is not None:
                rows.append(fid)
                targets.append(target)
        return rows, np.array(targets, dtype=np.int64)

    # -- the train step -------------------------------------------------------

    def _harvest_encoder(self, accum: dict[str, np.ndarray]) -> None:
        for name, p in self.encoder_store.items():
            if p.grad is not None:
                if name in accum:
                    accum[name] = accum[name] + p.grad
                else:
                    accum[name] = p.grad.copy()

    def train_step(self, batch_size: int, rng: np.random.Generator) -> LossReport:
        batch = self.replay.sample(batch_size, rng)
        agent, flags = self.agent, self.flags
        lr = agent.config.lr
        enc_accum: dict[str, np.ndarray] = {}
        report = LossReport()

        phi_mat, index = self._phi_rows(np.concatenate([batch.fid, batch.next_fid]))
        obs = self._observe(batch.feats, batch.fid, batch.waypoint, phi_mat, index)
        next_obs = self._observe(
            batch.next_feats, batch.next_fid, batch.next_waypoint, phi_mat, index
        )

        # critic step (targets detached; the progressed formula embeds via next_obs)
        targets = agent.critic_targets(next_obs, batch.reward, batch.terminal, rng)
        jq = agent.critic_loss_from_targets(obs, batch.k, batch.x, targets)
        nodes = ad.backward(jq)
        ad.adam_step(agent.critic_store, lr=lr)
        if flags.encoder_enabled and "q" in flags.encoder_grad_sources:
            self._harvest_encoder(enc_accum)
        ad.clear_graph(nodes)
        report.jq = float(jq.data)

        # primitive head step (critic weights frozen: their grads are discarded)
        jpk = agent.primitive_loss(obs, rng=rng)
        nodes = ad.backward(jpk)
        ad.adam_step(agent.pi_k_store, lr=lr)
        if flags.encoder_enabled and "pik" in flags.encoder_grad_sources:
            self._harvest_encoder(enc_accum)
        ad.clear_graph(nodes)
        agent.critic_store.zero_grads()
        report.jpk = float(jpk.data)

        # parameter head step
        jpp = agent.parameter_loss(obs, rng=rng)
        nodes = ad.backward(jpp)
        ad.adam_step(agent.pi_p_store, lr=lr)
        if flags.encoder_enabled and "pip" in flags.encoder_grad_sources:
            self._harvest_encoder(enc_accum)
        ad.clear_graph(nodes)
        agent.critic_store.zero_grads()
        agent.pi_k_store.zero_grads()
        report.jpp = float(jpp.data)

        # probe step on the distinct non-terminal formulas in the batch
        if self.probe is not None and flags.encoder_enabled:
            fids, probe_targets = self._probe_examples(
                np.concatenate([batch.fid, batch.next_fid])
            )
            if len(fids) > 0:
                rows = ad.gather(phi_mat, np.array([index[f] for f in fids]))
                ce = probe_loss(self.probe.logits(rows), probe_targets)
                nodes = ad.backward(ce)
                ad.adam_step(self.probe_store, lr=lr)
                if flags.probe_to_encoder:
                    self._harvest_encoder(enc_accum)
                ad.clear_graph(nodes)
                report.probe_ce = float(ce.data)

        # one encoder step from the accumulated gradient
        if flags.encoder_enabled and flags.train_encoder and enc_accum:
            self.encoder_store.zero_grads()
            self.encoder_store.set_grads(enc_accum)
            ad.adam_step(self.encoder_store, lr=lr)

        # temperature auto-tuning, when enabled
        if agent.config.autotune:
            t_loss = agent.temperature_loss(obs, rng)
            nodes = ad.backward(t_loss)
            ad.adam_step(agent.alpha_store, lr=lr)
            ad.clear_graph(nodes)

        agent.soft_update_targets()
        return report
