"""Weight-level strategy: CWR* (consolidated output-layer weights)."""

import numpy as np

from ..nn import BONAFIDE, SPOOF
from .base import Strategy, register_strategy


@register_strategy("cwrstar")
class CWRStar(Strategy):
    """Frozen feature extractor plus a consolidated classification head.

    Task 1 trains the whole network and plays the role of pretraining;
    afterwards layers 1-4 are frozen. Each later task trains a temporary
    head initialised from the consolidated one. At task end each class
    row of the temporary head is folded into the consolidated head as a
    running mean weighted by per-class sample counts, and the returned
    snapshot carries the consolidated head.
    """

    def __init__(self):
        self.cw_weight = None
        self.cw_bias = None
        self.past_counts = np.zeros(2)

    def merge(self, head_weight, head_bias, counts):
        counts = np.asarray(counts, dtype=np.float64)
        if self.cw_weight is None:
            self.cw_weight = np.array(head_weight, dtype=np.float64)
            self.cw_bias = np.array(head_bias, dtype=np.float64)
        else:
            total = self.past_counts + counts
            self.cw_weight = ((self.cw_weight * self.past_counts[:, None] + head_weight * counts[:, None])
                              / total[:, None])
            self.cw_bias = (self.cw_bias * self.past_counts + head_bias * counts) / total
        self.past_counts = self.past_counts + counts

    def _with_consolidated_head(self, model):
        out = model.copy()
        out.weights[-1][...] = self.cw_weight
        out.biases[-1][...] = self.cw_bias
        return out

    def on_task_start(self, model, task):
        if self.cw_weight is None:
            return model
        return self._with_consolidated_head(model)

    def transform_grads(self, grads, batch, model):
        if self.tasks_seen == 0:
            return grads
        out = grads.zeros_like()
        out.weights[-1][...] = grads.weights[-1]
        out.biases[-1][...] = grads.biases[-1]
        return out

    def on_task_end(self, model, task):
        _, y = task.train_arrays()
        counts = [np.sum(y == BONAFIDE), np.sum(y == SPOOF)]
        self.merge(model.weights[-1], model.biases[-1], counts)
        super().on_task_end(model, task)
        return self._with_consolidated_head(model)
