from .config import ConfigError, RunConfig
from .rollout import (
    EVAL_SEED_BASE,
    EpisodeResult,
    RunContext,
    build_context,
    evaluate,
    run_episode,
    world_features,
)
from .run import (
    EVAL_HEADER,
    METRICS_HEADER,
    TrainResult,
    load_run_checkpoint,
    save_run_checkpoint,
    scripted_oracle_return,
    train,
)

__all__ = [
    "ConfigError",
    "EVAL_HEADER",
    "EVAL_SEED_BASE",
    "EpisodeResult",
    "METRICS_HEADER",
    "RunConfig",
    "RunContext",
    "TrainResult",
    "build_context",
    "evaluate",
    "load_run_checkpoint",
    "run_episode",
    "save_run_checkpoint",
    "scripted_oracle_return",
    "train",
    "world_features",
]
