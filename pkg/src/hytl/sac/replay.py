"""Replay storage for TL-PAMDP transitions.

Observations are stored as raw world features plus formula ids and active
waypoints; the task embedding is re-computed at training time from the
formula id so the critic always sees the current encoder.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ReplayUnderfilled(Exception):
    pass


class EmptyBatch(Exception):
    pass


@dataclass
class ReplayBatch:
    feats: np.ndarray        # (B, F) world features
    fid: np.ndarray          # (B,) formula id at action time
    waypoint: np.ndarray     # (B, 3) active waypoint at action time
    k: np.ndarray            # (B,) primitive index
    x: np.ndarray            # (B, P) squashed parameters (masked dims zero)
    reward: np.ndarray       # (B,) shaped reward
    next_feats: np.ndarray   # (B, F)
    next_fid: np.ndarray     # (B,) progressed formula id
    next_waypoint: np.ndarray  # (B, 3)
    terminal: np.ndarray     # (B,) float 0/1

    def __len__(self) -> int:
        return self.feats.shape[0]


class ReplayBuffer:
    def __init__(self, capacity: int, feat_dim: int, param_dim: int):
        self.capacity = capacity
        self.size = 0
        self._next = 0
        self.feats = np.zeros((capacity, feat_dim))
        self.fid = np.zeros(capacity, dtype=np.int64)
        self.waypoint = np.zeros((capacity, 3))
        self.k = np.zeros(capacity, dtype=np.int64)
        self.x = np.zeros((capacity, param_dim))
        self.reward = np.zeros(capacity)
        self.next_feats = np.zeros((capacity, feat_dim))
        self.next_fid = np.zeros(capacity, dtype=np.int64)
        self.next_waypoint = np.zeros((capacity, 3))
        self.terminal = np.zeros(capacity)

    def __len__(self) -> int:
        return self.size

    def push(self, feats, fid, waypoint, k, x, reward, next_feats, next_fid,
             next_waypoint, terminal) -> None:
        i = self._next
        self.feats[i] = feats
        self.fid[i] = fid
        self.waypoint[i] = waypoint
        self.k[i] = k
        self.x[i] = x
        self.reward[i] = reward
        self.next_feats[i] = next_feats
        self.next_fid[i] = next_fid
        self.next_waypoint[i] = next_waypoint
        self.terminal[i] = float(terminal)
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> ReplayBatch:
        if self.size < batch_size:
            raise ReplayUnderfilled(f"replay holds {self.size} < batch {batch_size}")
        idx = rng.integers(0, self.size, size=batch_size)
        return ReplayBatch(
            feats=self.feats[idx].copy(),
            fid=self.fid[idx].copy(),
            waypoint=self.waypoint[idx].copy(),
            k=self.k[idx].copy(),
            x=self.x[idx].copy(),
            reward=self.reward[idx].copy(),
            next_feats=self.next_feats[idx].copy(),
            next_fid=self.next_fid[idx].copy(),
            next_waypoint=self.next_waypoint[idx].copy(),
            terminal=self.terminal[idx].copy(),
        )
