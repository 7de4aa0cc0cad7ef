"""Hand-coded primitive sequences that solve each library task.

Used as the solvability oracle in CI and as the per-task return normalizer:
each stage computes its action from the current state, so layouts sampled by
any seed are handled.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .sim import StepOutcome, TabletopEnv
from .tasks import TaskSpec
from .world import HybridAction, PrimitiveKind, PUSH_MAX, WorldState

Stage = Callable[[WorldState], HybridAction]


def _to_params(pos: np.ndarray) -> tuple[float, float, float]:
    return tuple(2.0 * np.asarray(pos, dtype=float) - 1.0)


def _reach(pos) -> HybridAction:
    return HybridAction.make(PrimitiveKind.REACH, *_to_params(pos))


def _grasp(pos) -> HybridAction:
    return HybridAction.make(PrimitiveKind.GRASP, *_to_params(pos))


def _push(approach, dx, dy) -> HybridAction:
    return HybridAction.make(
        PrimitiveKind.PUSH, *_to_params(approach), dx / PUSH_MAX, dy / PUSH_MAX
    )


def _above(state: WorldState, target: str, subject: str, extra: float = 0.0) -> np.ndarray:
    pos = state.objects[target].copy()
    pos[2] += state.half_extents[target] + state.half_extents[subject] + extra
    return pos


def scripted_stages(task: TaskSpec) -> list[Stage]:
    name = task.name
    if name == "ReachPoint":
        return [lambda s: _reach(s.objects["goal"])]
    if name == "TwoStage":
        return [
            lambda s: _reach(s.objects["marker_a"]),
            lambda s: _reach(s.objects["marker_b"]),
        ]
    if name == "Stack":
        return [
            lambda s: _grasp(s.objects["cubeA"]),
            lambda s: _reach(_above(s, "cubeB", "cubeA")),
        ]
    if name == "NutAssembly":
        return [
            lambda s: _grasp(s.objects["nut"]),
            lambda s: _reach(_above(s, "peg", "nut")),
        ]
    if name == "Cleanup":
        def push_jello(s: WorldState) -> HybridAction:
            # Push toward the emptier x side so the clamp cannot eat displacement.
            direction = 1.0 if s.objects["jello"][0] <= 0.7 else -1.0
            return _push(s.objects["jello"], direction * PUSH_MAX, 0.0)

        return [
            push_jello,
            lambda s: _grasp(s.objects["spam"]),
            lambda s: _reach(
                np.array([s.objects["bin"][0], s.objects["bin"][1], 0.3])
            ),
        ]
    if name == "PegInsertion":
        return [
            lambda s: _grasp(s.objects["peg"]),
            lambda s: _reach(
                np.array([s.objects["hole"][0], s.objects["hole"][1], 0.3])
            ),
            lambda s: _reach(
                np.array([s.objects["hole"][0], s.objects["hole"][1], 0.03])
            ),
        ]
    raise KeyError(f"no scripted policy for task {name!r}")


@dataclass
class ScriptedRun:
    actions: list[HybridAction]
    outcomes: list[StepOutcome]
    final_state: WorldState


def run_scripted(task: TaskSpec, seed: int) -> ScriptedRun:
    env = TabletopEnv(task)
    state = env.reset(seed)
    actions, outcomes = [], []
    for stage in scripted_stages(task):
        action = stage(state)
        outcome = env.step(state, action)
        actions.append(action)
        outcomes.append(outcome)
        state = outcome.state
    return ScriptedRun(actions, outcomes, state)
