"""Loss-level strategies: EWC, SI and LwF."""

import numpy as np

from ..nn import backward, fisher_diagonal, forward, forward_cache, log_softmax, make_batch, softmax
from ..errors import StrategyError
from .base import Strategy, check_positive, register_strategy


@register_strategy("ewc")
class EWC(Strategy):
    """Quadratic anchor penalty weighted by a per-task diagonal Fisher.

    penalty = lambda/2 * sum_tasks sum_i F_i (theta_i - theta*_i)^2
    """

    def __init__(self, lam: float = 100.0, fisher_batches: int = 10, fisher_batch_size: int = 64):
        check_positive("lambda", lam)
        check_positive("fisher_batches", fisher_batches)
        check_positive("fisher_batch_size", fisher_batch_size)
        self.lam = float(lam)
        self.fisher_batches = int(fisher_batches)
        self.fisher_batch_size = int(fisher_batch_size)
        self.anchors = []
        self.fishers = []

    def estimate_fisher(self, model, x, y) -> np.ndarray:
        total = np.zeros_like(model.flat)
        size = min(self.fisher_batch_size, len(y))
        for _ in range(self.fisher_batches):
            idx = self.rng.choice(len(y), size=size, replace=False)
            total += fisher_diagonal(model, make_batch(x[idx], y[idx])).flat
        return total / self.fisher_batches

    def on_task_end(self, model, task):
        x, y = task.train_arrays()
        self.fishers.append(self.estimate_fisher(model, x, y))
        self.anchors.append(model.flat.copy())
        return super().on_task_end(model, task)

    def penalty(self, flat):
        value, grad = 0.0, np.zeros_like(flat)
        for anchor, fisher in zip(self.anchors, self.fishers):
            diff = flat - anchor
            value += 0.5 * self.lam * float(np.dot(fisher, diff * diff))
            grad += self.lam * fisher * diff
        return value, grad

    def transform_loss(self, loss, grads, model, batch):
        if not self.anchors:
            return loss, grads
        value, grad = self.penalty(model.flat)
        return loss + value, grads.with_flat(grads.flat + grad)


@register_strategy("si")
class SI(Strategy):
    """Synaptic intelligence: path-integral importance with a quadratic anchor.

    During a task, ``path += -g * delta_theta`` per step, with ``g`` the
    task-loss gradient. At task end,
    ``omega += max(path / (total_delta^2 + xi), 0)`` and the anchor moves
    to the current parameters. penalty = c * sum_i omega_i (theta_i - theta*_i)^2.
    """

    def __init__(self, c: float = 0.1, xi: float = 0.1):
        check_positive("c", c)
        check_positive("xi", xi)
        self.c = float(c)
        self.xi = float(xi)
        self.omega = None
        self.anchor = None
        self.path = None
        self.start = None

    def setup(self, init_model, rng, train_cfg=None):
        super().setup(init_model, rng, train_cfg)
        self.omega = np.zeros_like(init_model.flat)

    def on_task_start(self, model, task):
        self.path = np.zeros_like(model.flat)
        self.start = model.flat.copy()
        return model

    def after_update(self, old_model, new_model, grads):
        self.path -= grads.flat * (new_model.flat - old_model.flat)

    def consolidate(self, flat):
        delta = flat - self.start
        self.omega = self.omega + np.maximum(self.path / (delta * delta + self.xi), 0.0)
        self.anchor = flat.copy()

    def on_task_end(self, model, task):
        self.consolidate(model.flat)
        return super().on_task_end(model, task)

    def penalty(self, flat):
        diff = flat - self.anchor
        return self.c * float(np.dot(self.omega, diff * diff)), 2.0 * self.c * self.omega * diff

    def transform_loss(self, loss, grads, model, batch):
        if self.anchor is None:
            return loss, grads
        value, grad = self.penalty(model.flat)
        return loss + value, grads.with_flat(grads.flat + grad)


def distillation(student_logits, teacher_logits, temperature: float, weight: float):
    """``weight * T^2 * KL(softmax(teacher/T) || softmax(student/T))``, batch-mean.

    Returns (value, d value / d student_logits).
    """
    t = temperature
    q_t = softmax(teacher_logits, t)
    log_qt = log_softmax(teacher_logits, t)
    log_qs = log_softmax(student_logits, t)
    n = student_logits.shape[0]
    kl = float(np.sum(q_t * (log_qt - log_qs)) / n)
    dlogits = weight * t * (np.exp(log_qs) - q_t) / n
    return weight * t * t * kl, dlogits


@register_strategy("lwf")
class LwF(Strategy):
    """Distil the model as it stood at the start of the task into the student.

    No teacher exists during the first task, so task 1 trains as plain
    fine-tuning.
    """

    def __init__(self, temperature: float = 2.0, weight: float = 1.0):
        check_positive("temperature", temperature)
        if weight < 0:
            raise StrategyError(f"weight must be nonnegative, got {weight}")
        self.temperature = float(temperature)
        self.weight = float(weight)
        self.teacher = None

    def on_task_start(self, model, task):
        self.teacher = model.copy() if self.tasks_seen > 0 else None
        return model

    def penalty(self, model, features):
        logits, inputs = forward_cache(model, features)
        value, dlogits = distillation(logits, forward(self.teacher, features), self.temperature, self.weight)
        return value, backward(model, inputs, dlogits).flat

    def transform_loss(self, loss, grads, model, batch):
        if self.teacher is None or self.weight == 0.0:
            return loss, grads
        value, grad = self.penalty(model, batch.features)
        return loss + value, grads.with_flat(grads.flat + grad)
