"""Continual-learning strategies, looked up by name through :data:`STRATEGIES`."""

from .base import STRATEGIES, Finetune, Strategy, build_strategy, register_strategy, strategy_params
from .cwr import CWRStar
from .memory import GDumb, Replay, ReservoirBuffer
from .projection import OWM, RAWM, RWM, owm_update, remove_conflict, rotate_to_orthogonal
from .regularization import EWC, SI, LwF, distillation

STRATEGY_NAMES = ("finetune", "replay", "ewc", "si", "owm", "gdumb", "cwrstar", "lwf", "rawm", "rwm")

__all__ = [
    "STRATEGIES", "STRATEGY_NAMES", "Strategy", "build_strategy", "register_strategy", "strategy_params",
    "Finetune", "Replay", "EWC", "SI", "OWM", "GDumb", "CWRStar", "LwF", "RAWM", "RWM",
    "ReservoirBuffer", "owm_update", "remove_conflict", "rotate_to_orthogonal", "distillation",
]
