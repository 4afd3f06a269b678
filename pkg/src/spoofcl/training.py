"""Mini-batch SGD loop shared by the benchmark runner and committee experts.

The loop drives a strategy's hooks in a fixed order per step::

    transform_batch -> loss_and_grads -> transform_loss
        -> transform_grads -> apply_update -> after_update

bracketed per task by ``on_task_start`` / ``training_data`` and
``on_task_end``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ModelError
from .nn import OptimizerState, apply_update, loss_and_grads, make_batch


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.01
    momentum: float = 0.9
    batch_size: int = 64
    epochs: int = 20

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1:
            raise ModelError("batch_size and epochs must be positive")
        OptimizerState(self.lr, self.momentum)


def iterate_batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def fit(model, features, labels, cfg: TrainConfig, rng, strategy=None):
    """Train ``model`` on one dataset; returns the trained model.

    A fresh momentum buffer is used, i.e. optimizer state does not carry
    over between calls.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    opt = OptimizerState(cfg.lr, cfg.momentum)
    for _ in range(cfg.epochs):
        for idx in iterate_batches(len(y), cfg.batch_size, rng):
            batch = make_batch(x[idx], y[idx])
            if strategy is not None:
                batch = strategy.transform_batch(batch)
            loss, grads = loss_and_grads(model, batch)
            base_grads = grads
            if strategy is not None:
                loss, grads = strategy.transform_loss(loss, grads, model, batch)
                grads = strategy.transform_grads(grads, batch, model)
            new_model, opt = apply_update(model, grads, opt)
            if not new_model.is_finite():
                raise ModelError("non-finite parameters after update")
            if strategy is not None:
                strategy.after_update(model, new_model, base_grads)
            model = new_model
    return model


def train_task(model, task, strategy, cfg: TrainConfig, rng):
    """Run one task of the sequence under ``strategy``; returns the model
    snapshot the task should be evaluated with."""
    model = strategy.on_task_start(model, task)
    x, y = strategy.training_data(task)
    model = fit(model, x, y, cfg, rng, strategy)
    return strategy.on_task_end(model, task)
