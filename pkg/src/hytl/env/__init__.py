from .scripted import ScriptedRun, run_scripted, scripted_stages
from .sim import StepOutcome, TabletopEnv, dump_trajectory, outcome_to_dict
from .tasks import GRIPPER_HOME, ObjectSpec, Predicate, TaskSpec, task_by_name, task_library
from .world import (
    ARITY,
    ArityMismatch,
    ATOMIC_MAX,
    EnvError,
    GRASP_EPS,
    HybridAction,
    K_PRIMITIVES,
    LayoutInfeasible,
    MICRO_CAP,
    MICRO_STEP,
    P_MAX,
    PUSH_CONTACT,
    PUSH_MAX,
    PrimitiveKind,
    REACH_MICRO_CAP,
    REACH_TOL,
    WorldState,
    execute,
)

__all__ = [
    "ARITY",
    "ATOMIC_MAX",
    "ArityMismatch",
    "EnvError",
    "GRASP_EPS",
    "GRIPPER_HOME",
    "HybridAction",
    "K_PRIMITIVES",
    "LayoutInfeasible",
    "MICRO_CAP",
    "MICRO_STEP",
    "ObjectSpec",
    "P_MAX",
    "PUSH_CONTACT",
    "PUSH_MAX",
    "Predicate",
    "PrimitiveKind",
    "REACH_MICRO_CAP",
    "REACH_TOL",
    "ScriptedRun",
    "StepOutcome",
    "TabletopEnv",
    "TaskSpec",
    "WorldState",
    "dump_trajectory",
    "execute",
    "outcome_to_dict",
    "run_scripted",
    "scripted_stages",
    "task_by_name",
    "task_library",
]
