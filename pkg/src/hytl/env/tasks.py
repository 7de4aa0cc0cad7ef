"""Task specifications: object layouts, labeling predicates, the task library."""

from __future__ import annotations

import json
import zlib
from dataclasses import asdict, dataclass
from functools import cached_property

import numpy as np

from ..ltl import Alphabet, Assignment, Formula, parse
from .world import LayoutInfeasible, WorldState


@dataclass(frozen=True)
class ObjectSpec:
    name: str
    half_extent: float
    spawn_box: tuple[tuple[float, float], tuple[float, float], tuple[float, float]]
    graspable: bool = True
    movable: bool = True


@dataclass(frozen=True)
class Predicate:
    """One proposition as a geometric test over the world state."""

    prop: str
    kind: str           # gripper_near | holding | held_near_xy | near_xy |
                        # stacked_on | displaced | inserted
    subject: str = ""
    target: str = ""
    threshold: float = 0.05
    z_tol: float = 0.02
    z_below: float = 1.0

    def holds(self, state: WorldState) -> bool:
        if self.kind == "gripper_near":
            return _dist(state.gripper, state.objects[self.target]) < self.threshold
        if self.kind == "holding":
            return state.held == self.subject
        if self.kind == "held_near_xy":
            return (
                state.held == self.subject
                and _dist_xy(state.objects[self.subject], state.objects[self.target])
                < self.threshold
            )
        if self.kind == "near_xy":
            return (
                _dist_xy(state.objects[self.subject], state.objects[self.target])
                < self.threshold
            )
        if self.kind == "stacked_on":
            subject = state.objects[self.subject]
            target = state.objects[self.target]
            rest_z = (
                target[2]
                + state.half_extents[self.target]
                + state.half_extents[self.subject]
            )
            return (
                _dist_xy(subject, target) < self.threshold
                and abs(subject[2] - rest_z) < self.z_tol
            )
        if self.kind == "displaced":
            return (
                _dist(state.objects[self.subject], state.spawn[self.subject])
                >= self.threshold
            )
        if self.kind == "inserted":
            subject = state.objects[self.subject]
            return (
                _dist_xy(subject, state.objects[self.target]) < self.threshold
                and subject[2] < self.z_below
            )
        raise ValueError(f"unknown predicate kind {self.kind!r}")


def _dist(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b))


def _dist_xy(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a[:2] - b[:2]))


GRIPPER_HOME = np.array([0.5, 0.5, 0.8])


@dataclass(frozen=True)
class TaskSpec:
    name: str
    objects: tuple[ObjectSpec, ...]
    predicates: tuple[Predicate, ...]
    formula_text: str
    horizon: int = 25
    action_cost: float = 0.01
    min_separation: float = 0.1

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")

    @cached_property
    def alphabet(self) -> Alphabet:
        return Alphabet(tuple(p.prop for p in self.predicates))

    @cached_property
    def formula(self) -> Formula:
        return parse(self.formula_text, self.alphabet)

    def object_names(self) -> tuple[str, ...]:
        return tuple(o.name for o in self.objects)

    def reset(self, seed: int) -> WorldState:
        """Rejection-sample an initial layout; deterministic in (task, seed)."""
        rng = np.random.default_rng([seed, zlib.crc32(self.name.encode())])
        for _ in range(100):
            positions = {
                o.name: np.array([rng.uniform(lo, hi) for lo, hi in o.spawn_box])
                for o in self.objects
            }
            names = list(positions)
            ok = all(
                _dist(positions[a], positions[b]) >= self.min_separation
                for i, a in enumerate(names)
                for b in names[i + 1 :]
            )
            if ok:
                return WorldState(
                    gripper=GRIPPER_HOME.copy(),
                    gripper_open=True,
                    held=None,
                    objects=positions,
                    half_extents={o.name: o.half_extent for o in self.objects},
                    spawn={k: v.copy() for k, v in positions.items()},
                    graspable={o.name: o.graspable for o in self.objects},
                    movable={o.name: o.movable for o in self.objects},
                )
        raise LayoutInfeasible(
            f"no layout with pairwise separation {self.min_separation} "
            f"found for {self.name} after 100 attempts"
        )

    def label(self, state: WorldState) -> Assignment:
        return self.alphabet.assignment(
            p.prop for p in self.predicates if p.holds(state)
        )

    def to_json(self) -> str:
        doc = {
            "name": self.name,
            "objects": [asdict(o) for o in self.objects],
            "predicates": [asdict(p) for p in self.predicates],
            "formula": self.formula_text,
            "horizon": self.horizon,
            "action_cost": self.action_cost,
            "min_separation": self.min_separation,
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TaskSpec":
        doc = json.loads(text)
        return cls(
            name=doc["name"],
            objects=tuple(
                ObjectSpec(
                    name=o["name"],
                    half_extent=o["half_extent"],
                    spawn_box=tuple(tuple(r) for r in o["spawn_box"]),
                    graspable=o["graspable"],
                    movable=o["movable"],
                )
                for o in doc["objects"]
            ),
            predicates=tuple(Predicate(**p) for p in doc["predicates"]),
            formula_text=doc["formula"],
            horizon=doc["horizon"],
            action_cost=doc["action_cost"],
            min_separation=doc["min_separation"],
        )


def _box(x, y, z):
    return (tuple(x), tuple(y), tuple(z))


def task_library() -> list[TaskSpec]:
    """Six tasks: two diagnostics plus four staged manipulation analogues."""
    reach_point = TaskSpec(
        name="ReachPoint",
        objects=(
            ObjectSpec("goal", 0.02, _box((0.2, 0.8), (0.2, 0.8), (0.2, 0.6)),
                       graspable=False, movable=False),
        ),
        predicates=(Predicate("reached", "gripper_near", target="goal", threshold=0.1),),
        formula_text="F reached",
    )
    two_stage = TaskSpec(
        name="TwoStage",
        objects=(
            ObjectSpec("marker_a", 0.02, _box((0.15, 0.45), (0.2, 0.8), (0.2, 0.6)),
                       graspable=False, movable=False),
            ObjectSpec("marker_b", 0.02, _box((0.55, 0.85), (0.2, 0.8), (0.2, 0.6)),
                       graspable=False, movable=False),
        ),
        predicates=(
            Predicate("zone_a", "gripper_near", target="marker_a", threshold=0.1),
            Predicate("zone_b", "gripper_near", target="marker_b", threshold=0.1),
        ),
        formula_text="F (zone_a & F zone_b)",
    )
    stack = TaskSpec(
        name="Stack",
        objects=(
            ObjectSpec("cubeA", 0.02, _box((0.2, 0.45), (0.2, 0.8), (0.02, 0.02))),
            ObjectSpec("cubeB", 0.03, _box((0.55, 0.8), (0.2, 0.8), (0.03, 0.03))),
        ),
        predicates=(
            Predicate("cubeA_grasped", "holding", subject="cubeA"),
            Predicate("cubeA_on_cubeB", "stacked_on", subject="cubeA", target="cubeB",
                      threshold=0.03, z_tol=0.02),
        ),
        formula_text="F (cubeA_grasped & F cubeA_on_cubeB)",
    )
    nut_assembly = TaskSpec(
        name="NutAssembly",
        objects=(
            ObjectSpec("nut", 0.02, _box((0.2, 0.45), (0.2, 0.8), (0.02, 0.02))),
            ObjectSpec("peg", 0.04, _box((0.55, 0.8), (0.2, 0.8), (0.04, 0.04)),
                       graspable=False, movable=False),
        ),
        predicates=(
            Predicate("nut_grasped", "holding", subject="nut"),
            Predicate("nut_on_peg", "stacked_on", subject="nut", target="peg",
                      threshold=0.03, z_tol=0.03),
        ),
        formula_text="F (nut_grasped & F nut_on_peg)",
    )
    cleanup = TaskSpec(
        name="Cleanup",
        objects=(
            ObjectSpec("jello", 0.02, _box((0.2, 0.5), (0.2, 0.5), (0.02, 0.02))),
            ObjectSpec("spam", 0.02, _box((0.2, 0.5), (0.55, 0.8), (0.02, 0.02))),
            ObjectSpec("bin", 0.05, _box((0.6, 0.85), (0.55, 0.85), (0.05, 0.05)),
                       graspable=False, movable=False),
        ),
        predicates=(
            Predicate("jello_pushed", "displaced", subject="jello", threshold=0.1),
            Predicate("spam_grasped", "holding", subject="spam"),
            Predicate("spam_in_bin", "near_xy", subject="spam", target="bin",
                      threshold=0.06),
        ),
        formula_text="F (jello_pushed & F (spam_grasped & F spam_in_bin))",
    )
    peg_insertion = TaskSpec(
        name="PegInsertion",
        objects=(
            ObjectSpec("peg", 0.02, _box((0.2, 0.45), (0.2, 0.8), (0.02, 0.02))),
            ObjectSpec("hole", 0.0, _box((0.55, 0.8), (0.2, 0.8), (0.0, 0.0)),
                       graspable=False, movable=False),
        ),
        predicates=(
            Predicate("peg_grasped", "holding", subject="peg"),
            Predicate("hole_reached", "held_near_xy", subject="peg", target="hole",
                      threshold=0.05),
            Predicate("peg_inserted", "inserted", subject="peg", target="hole",
                      threshold=0.03, z_below=0.05),
        ),
        formula_text="F (peg_grasped & F (hole_reached & F peg_inserted))",
    )
    return [reach_point, two_stage, stack, nut_assembly, cleanup, peg_insertion]


def task_by_name(name: str) -> TaskSpec:
    for task in task_library():
        if task.name == name:
            return task
    raise KeyError(f"unknown task {name!r}; known: {[t.name for t in task_library()]}")
