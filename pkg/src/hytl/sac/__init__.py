from .agent import SacAgent, SacConfig, SampledParams
from .replay import EmptyBatch, ReplayBatch, ReplayBuffer, ReplayUnderfilled
from .trainer import LossReport, SacTrainer, TrainerFlags

__all__ = [
    "EmptyBatch",
    "LossReport",
    "ReplayBatch",
    "ReplayBuffer",
    "ReplayUnderfilled",
    "SacAgent",
    "SacConfig",
    "SacTrainer",
    "SampledParams",
    "TrainerFlags",
]
