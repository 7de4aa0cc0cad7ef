"""Analytic tabletop world: state, parameterized behavior primitives, kinematics.

All coordinates live in [0,1]^3. Primitives are deterministic macro-actions;
each consumes a bounded number of micro-steps of at most MICRO_STEP gripper
displacement. A held object is rigidly attached to the gripper.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np


class EnvError(Exception):
    pass


class ArityMismatch(EnvError):
    pass


class LayoutInfeasible(EnvError):
    pass


class PrimitiveKind(IntEnum):
    REACH = 0
    GRASP = 1
    PUSH = 2
    RELEASE = 3
    ATOMIC = 4


ARITY = {
    PrimitiveKind.REACH: 3,
    PrimitiveKind.GRASP: 3,
    PrimitiveKind.PUSH: 5,
    PrimitiveKind.RELEASE: 0,
    PrimitiveKind.ATOMIC: 4,
}
P_MAX = 5
K_PRIMITIVES = len(ARITY)

MICRO_STEP = 0.05     # max gripper displacement per micro-step
REACH_TOL = 0.01      # reach stops inside this radius
REACH_MICRO_CAP = 20
GRASP_EPS = 0.03      # attach radius when closing
PUSH_CONTACT = 0.04   # drag radius during the push translation
PUSH_MAX = 0.2        # max translation magnitude per axis
ATOMIC_MAX = 0.05     # atomic displacement is clamped to this norm
# Worst case micro-steps per primitive call (push: reach + translation).
MICRO_CAP = REACH_MICRO_CAP + int(np.ceil(PUSH_MAX * np.sqrt(2) / MICRO_STEP))


@dataclass(frozen=True)
class HybridAction:
    kind: PrimitiveKind
    params: np.ndarray  # length P_MAX; only the first ARITY[kind] entries matter

    @staticmethod
    def make(kind: PrimitiveKind, *used_params: float) -> "HybridAction":
        if len(used_params) != ARITY[kind]:
            raise ArityMismatch(
                f"{kind.name} takes {ARITY[kind]} parameters, got {len(used_params)}"
            )
        params = np.zeros(P_MAX)
        params[: len(used_params)] = used_params
        return HybridAction(kind, params)


@dataclass
class WorldState:
    gripper: np.ndarray
    gripper_open: bool
    held: str | None
    objects: dict[str, np.ndarray]
    half_extents: dict[str, float]
    spawn: dict[str, np.ndarray]
    graspable: dict[str, bool]
    movable: dict[str, bool]
    micro_steps: int = 0
    primitive_calls: int = 0

    def copy(self) -> "WorldState":
        return WorldState(
            gripper=self.gripper.copy(),
            gripper_open=self.gripper_open,
            held=self.held,
            objects={k: v.copy() for k, v in self.objects.items()},
            half_extents=dict(self.half_extents),
            spawn={k: v.copy() for k, v in self.spawn.items()},
            graspable=dict(self.graspable),
            movable=dict(self.movable),
            micro_steps=self.micro_steps,
            primitive_calls=self.primitive_calls,
        )


def _clamp(p: np.ndarray) -> np.ndarray:
    return np.clip(p, 0.0, 1.0)


def _attach_held(state: WorldState) -> None:
    if state.held is not None:
        state.objects[state.held] = state.gripper.copy()


def _move_toward(state: WorldState, target: np.ndarray, cap: int) -> int:
    steps = 0
    for _ in range(cap):
        delta = target - state.gripper
        dist = float(np.linalg.norm(delta))
        if dist < REACH_TOL:
            break
        state.gripper = _clamp(state.gripper + delta / dist * min(MICRO_STEP, dist))
        _attach_held(state)
        steps += 1
    return steps


def _try_attach(state: WorldState) -> None:
    if state.held is not None:
        return
    best_name, best_dist = None, GRASP_EPS
    for name, pos in state.objects.items():
        if not state.graspable[name]:
            continue
        dist = float(np.linalg.norm(pos - state.gripper))
        if dist <= best_dist:
            best_name, best_dist = name, dist
    if best_name is not None:
        state.held = best_name
        state.objects[best_name] = state.gripper.copy()


def _drop_held(state: WorldState) -> None:
    if state.held is None:
        return
    pos = state.objects[state.held]
    pos[2] = state.half_extents[state.held]  # resting height
    state.held = None


def _translate(state: WorldState, dx: float, dy: float) -> int:
    move = np.array([dx, dy, 0.0])
    total = float(np.linalg.norm(move))
    if total < 1e-12:
        return 0
    unit = move / total
    steps = 0
    remaining = total
    while remaining > 1e-9:
        step = min(MICRO_STEP, remaining)
        mv = unit * step
        grip_before = state.gripper.copy()
        for name, pos in state.objects.items():
            if name == state.held or not state.movable[name]:
                continue
            if float(np.linalg.norm(pos - grip_before)) <= PUSH_CONTACT:
                state.objects[name] = _clamp(pos + mv)
        state.gripper = _clamp(state.gripper + mv)
        _attach_held(state)
        remaining -= step
        steps += 1
    return steps


def _param_target(params: np.ndarray) -> np.ndarray:
    return (params[:3] + 1.0) / 2.0  # affine [-1,1] -> [0,1] per axis


def execute(state: WorldState, action: HybridAction) -> tuple[WorldState, int]:
    """Run one primitive; returns the successor state and micro-steps consumed."""
    params = np.asarray(action.params, dtype=np.float64)
    if params.shape != (P_MAX,):
        raise ArityMismatch(
            f"parameter vector must have length {P_MAX}, got shape {params.shape}"
        )
    if not isinstance(action.kind, PrimitiveKind):
        raise ArityMismatch(f"unknown primitive {action.kind!r}")
    p = np.clip(params, -1.0, 1.0)
    s = state.copy()
    kind = action.kind

    if kind == PrimitiveKind.REACH:
        steps = _move_toward(s, _param_target(p), REACH_MICRO_CAP)
    elif kind == PrimitiveKind.GRASP:
        steps = _move_toward(s, _param_target(p), REACH_MICRO_CAP) + 1
        s.gripper_open = False
        _try_attach(s)
    elif kind == PrimitiveKind.PUSH:
        steps = _move_toward(s, _param_target(p), REACH_MICRO_CAP)
        steps += _translate(s, p[3] * PUSH_MAX, p[4] * PUSH_MAX)
    elif kind == PrimitiveKind.RELEASE:
        s.gripper_open = True
        steps = 0
        if s.held is not None:
            _drop_held(s)
            steps = 1
    else:  # ATOMIC
        delta = p[:3] * ATOMIC_MAX
        norm = float(np.linalg.norm(delta))
        if norm > ATOMIC_MAX:
            delta *= ATOMIC_MAX / norm
        s.gripper = _clamp(s.gripper + delta)
        _attach_held(s)
        close = p[3] >= 0.0
        if close and s.gripper_open:
            s.gripper_open = False
            _try_attach(s)
        elif not close and not s.gripper_open:
            s.gripper_open = True
            _drop_held(s)
        steps = 1

    s.micro_steps += steps
    s.primitive_calls += 1
    return s, steps
