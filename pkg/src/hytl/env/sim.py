"""Environment facade: reset/step over a task, plus trajectory serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..ltl import Assignment
from .tasks import TaskSpec
from .world import HybridAction, WorldState, execute


@dataclass(frozen=True)
class StepOutcome:
    state: WorldState
    r_env: float
    micro_steps: int
    assignment: Assignment


class TabletopEnv:
    """Stateless stepping: states are values, the env only binds the task."""

    def __init__(self, task: TaskSpec):
        self.task = task

    def reset(self, seed: int) -> WorldState:
        return self.task.reset(seed)

    def step(self, state: WorldState, action: HybridAction) -> StepOutcome:
        next_state, micro = execute(state, action)
        return StepOutcome(
            state=next_state,
            r_env=-self.task.action_cost,
            micro_steps=micro,
            assignment=self.task.label(next_state),
        )

    def label(self, state: WorldState) -> Assignment:
        return self.task.label(state)


def outcome_to_dict(task: TaskSpec, action: HybridAction, outcome: StepOutcome) -> dict:
    state = outcome.state
    return {
        "primitive": action.kind.name.lower(),
        "params": [round(float(x), 6) for x in action.params],
        "gripper": [round(float(x), 6) for x in state.gripper],
        "gripper_open": state.gripper_open,
        "held": state.held,
        "objects": {
            name: [round(float(x), 6) for x in pos]
            for name, pos in state.objects.items()
        },
        "r_env": outcome.r_env,
        "micro_steps": outcome.micro_steps,
        "assignment": list(outcome.assignment.names(task.alphabet)),
    }


def dump_trajectory(path, rows: list[dict]) -> None:
    """One JSON document per line, one primitive call per row."""
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
