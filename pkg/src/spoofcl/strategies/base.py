"""Strategy hook interface and registry.

A strategy is a set of callbacks the training loop invokes at fixed
points (see :mod:`spoofcl.training`). Every hook has an identity
default, so a subclass overriding nothing trains exactly like
sequential fine-tuning. New methods plug in by subclassing
:class:`Strategy` and decorating with :func:`register_strategy`.
"""

import copy
import hashlib
import inspect
import pickle

import numpy as np

from ..errors import StrategyError

STRATEGIES = {}


def register_strategy(name: str):
    def deco(cls):
        if name in STRATEGIES and STRATEGIES[name] is not cls:
            raise StrategyError(f"strategy {name!r} already registered")
        cls.name = name
        STRATEGIES[name] = cls
        return cls
    return deco


def strategy_params(name: str) -> dict:
    """Constructor parameters and their defaults for a registered strategy."""
    if name not in STRATEGIES:
        raise StrategyError(f"unknown strategy: {name}")
    sig = inspect.signature(STRATEGIES[name].__init__)
    return {p.name: p.default for p in list(sig.parameters.values())[1:]
            if p.kind not in (p.VAR_POSITIONAL, p.VAR_KEYWORD)}


def build_strategy(name: str, **params):
    if name not in STRATEGIES:
        raise StrategyError(f"unknown strategy: {name}")
    allowed = strategy_params(name)
    for key in params:
        if key not in allowed:
            raise StrategyError(f"strategy {name!r} has no parameter {key!r}")
    return STRATEGIES[name](**params)


class Strategy:
    name = "base"

    def setup(self, init_model, rng: np.random.Generator, train_cfg=None):
        """Called once before the first task with the freshly initialised model."""
        self.rng = rng
        self.train_cfg = train_cfg
        self.tasks_seen = 0

    def on_task_start(self, model, task):
        return model

    def training_data(self, task):
        return task.train_arrays()

    def transform_batch(self, batch):
        return batch

    def transform_loss(self, loss, grads, model, batch):
        return loss, grads

    def transform_grads(self, grads, batch, model):
        return grads

    def after_update(self, old_model, new_model, grads):
        pass

    def on_task_end(self, model, task):
        self.tasks_seen += 1
        return model

    def state_dict(self) -> dict:
        state = {}
        for key, value in vars(self).items():
            if isinstance(value, np.random.Generator):
                value = value.bit_generator.state
            elif key == "train_cfg":
                continue
            state[key] = copy.deepcopy(value)
        return state

    def state_digest(self) -> str:
        blob = pickle.dumps(sorted(self.state_dict().items(), key=lambda kv: kv[0]), protocol=4)
        return hashlib.sha256(blob).hexdigest()


@register_strategy("finetune")
class Finetune(Strategy):
    """Plain sequential training; all hooks are identities."""


def check_positive(name, value):
    if not value > 0:
        raise StrategyError(f"{name} must be positive, got {value}")
