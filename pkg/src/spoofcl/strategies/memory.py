"""Data-level strategies: experience replay and GDumb."""

import numpy as np

from ..errors import StrategyError
from ..nn import BONAFIDE, SPOOF, Batch
from .base import Strategy, register_strategy


class ReservoirBuffer:
    """Fixed-capacity uniform sample of everything offered (Algorithm R)."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise StrategyError(f"buffer capacity must be positive, got {capacity}")
        self.capacity = int(capacity)
        self.features = None
        self.labels = np.zeros(0, dtype=np.int64)
        self.seen = 0

    def __len__(self):
        return len(self.labels)

    def offer(self, x, y, rng):
        x = np.asarray(x, dtype=np.float64)
        if self.features is None:
            self.features = np.zeros((0, x.shape[1]))
        feats, labels = list(self.features), list(self.labels)
        for row, label in zip(x, y):
            if len(labels) < self.capacity:
                feats.append(row)
                labels.append(int(label))
            else:
                j = int(rng.integers(self.seen + 1))
                if j < self.capacity:
                    feats[j] = row
                    labels[j] = int(label)
            self.seen += 1
        self.features = np.array(feats).reshape(len(labels), x.shape[1])
        self.labels = np.array(labels, dtype=np.int64)


@register_strategy("replay")
class Replay(Strategy):
    """Store a uniform subset of each finished task; mix it into later batches.

    Each training batch of size B gets ``round(mix * B)`` buffered samples
    (at least one, at most the buffer size) appended, drawn without
    replacement.
    """

    def __init__(self, capacity_per_task: int = 200, mix: float = 0.5):
        if capacity_per_task < 1:
            raise StrategyError(f"capacity_per_task must be positive, got {capacity_per_task}")
        if not 0.0 < mix <= 1.0:
            raise StrategyError(f"mix must lie in (0, 1], got {mix}")
        self.capacity_per_task = int(capacity_per_task)
        self.mix = float(mix)
        self.buffer_x = None
        self.buffer_y = np.zeros(0, dtype=np.int64)

    @property
    def capacity(self) -> int:
        return self.capacity_per_task * self.tasks_seen

    def on_task_end(self, model, task):
        x, y = task.train_arrays()
        k = min(self.capacity_per_task, len(y))
        idx = np.sort(self.rng.choice(len(y), size=k, replace=False))
        if self.buffer_x is None:
            self.buffer_x = x[idx].copy()
        else:
            self.buffer_x = np.concatenate([self.buffer_x, x[idx]])
        self.buffer_y = np.concatenate([self.buffer_y, y[idx]])
        return super().on_task_end(model, task)

    def transform_batch(self, batch):
        n_buf = len(self.buffer_y)
        if n_buf == 0:
            return batch
        m = min(n_buf, max(1, int(round(self.mix * len(batch.labels)))))
        idx = self.rng.choice(n_buf, size=m, replace=False)
        return Batch(np.concatenate([batch.features, self.buffer_x[idx]]),
                     np.concatenate([batch.labels, self.buffer_y[idx]]))


@register_strategy("gdumb")
class GDumb(Strategy):
    """Greedy class- and task-balanced memory; retrain from scratch on it.

    Each class gets ``capacity // 2`` slots. A new sample enters a free
    slot, or else evicts a random sample of the task holding the most
    slots in that class, provided that task holds at least two more than
    the incoming task does. At every task start the model is reset to
    the initial parameters and trained on the memory only.
    """

    def __init__(self, capacity: int = 1000):
        if capacity < 2:
            raise StrategyError(f"GDumb capacity must be at least 2, got {capacity}")
        self.capacity = int(capacity)
        # per class: list of (task_id, features)
        self.memory = {BONAFIDE: [], SPOOF: []}

    def setup(self, init_model, rng, train_cfg=None):
        super().setup(init_model, rng, train_cfg)
        self.init_model = init_model.copy()

    def class_counts(self):
        return {c: len(m) for c, m in self.memory.items()}

    def task_counts(self, cls):
        counts = {}
        for tid, _ in self.memory[cls]:
            counts[tid] = counts.get(tid, 0) + 1
        return counts

    def insert(self, task_id, features, label):
        slots = self.memory[label]
        if len(slots) < self.capacity // 2:
            slots.append((task_id, features))
            return True
        counts = self.task_counts(label)
        mine = counts.get(task_id, 0)
        # largest holder, oldest task on ties
        victim = min((t for t in counts if t != task_id), key=lambda t: (-counts[t], t), default=None)
        if victim is None or counts[victim] < mine + 2:
            return False
        positions = [i for i, (tid, _) in enumerate(slots) if tid == victim]
        j = positions[int(self.rng.integers(len(positions)))]
        slots[j] = (task_id, features)
        return True

    def observe(self, task):
        """Offer the task's samples alternating between classes."""
        x, y = task.train_arrays()
        order = {c: self.rng.permutation(np.flatnonzero(y == c)) for c in (BONAFIDE, SPOOF)}
        for k in range(max(len(v) for v in order.values())):
            for c in (BONAFIDE, SPOOF):
                if k < len(order[c]):
                    i = order[c][k]
                    self.insert(task.spec.task_id, x[i], c)

    def on_task_start(self, model, task):
        self.observe(task)
        return self.init_model.copy()

    def training_data(self, task):
        x, y = [], []
        for c in (BONAFIDE, SPOOF):
            for _, feats in self.memory[c]:
                x.append(feats)
                y.append(c)
        return np.array(x), np.array(y, dtype=np.int64)
