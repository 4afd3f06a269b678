"""Gradient-level strategies: OWM, RAWM and RWM.

RAWM and RWM here are reconstructions from one-line contracts, not
ports of the original methods. Both keep a reservoir of past-task
training samples, compute the old-task gradient ``g_old`` on it each
step, and only act when the new gradient conflicts with it
(``<g, g_old> < 0``):

* RAWM removes a fraction ``s`` of the conflicting component,
  ``g - s * <g, u> u`` with ``u = g_old / |g_old|``, where
  ``s = clip(base_strength + kappa * |r - r_ref|, 0, 1)`` grows with the
  mismatch between the batch's bonafide ratio ``r`` and the buffer's
  ratio ``r_ref``.
* RWM rotates ``g`` inside span{g, g_old} until it is exactly
  perpendicular to ``g_old``, keeping ``|g|``.

Both operate on the whole flattened parameter vector.
"""

import numpy as np

from ..nn import BONAFIDE, forward_cache, loss_and_grads, make_batch
from .base import Strategy, check_positive, register_strategy
from .memory import ReservoirBuffer


def owm_update(P: np.ndarray, x: np.ndarray, alpha: float) -> np.ndarray:
    """Recursive least-squares step ``P - P x x^T P / (alpha + x^T P x)``."""
    k = P @ x
    return P - np.outer(k, k) / (alpha + float(x @ k))


@register_strategy("owm")
class OWM(Strategy):
    """Orthogonal weight modification.

    Each layer keeps a projector ``P`` over its input space, starting at
    the identity. Per batch, ``P`` absorbs the batch-mean layer input,
    then the layer's weight gradient ``G`` (stored ``[out x in]``) is
    replaced by ``G @ P``. Bias gradients pass through.
    """

    def __init__(self, alpha: float = 1e-3):
        check_positive("alpha", alpha)
        self.alpha = float(alpha)
        self.projectors = None

    def setup(self, init_model, rng, train_cfg=None):
        super().setup(init_model, rng, train_cfg)
        self.projectors = [np.eye(i) for _, i in init_model.shapes]

    def update(self, layer_inputs):
        for k, a in enumerate(layer_inputs):
            self.projectors[k] = owm_update(self.projectors[k], np.asarray(a).mean(axis=0), self.alpha)

    def project(self, grads):
        out = grads.copy()
        for k, P in enumerate(self.projectors):
            out.weights[k][...] = grads.weights[k] @ P
        return out

    def transform_grads(self, grads, batch, model):
        _, inputs = forward_cache(model, batch.features)
        self.update(inputs)
        return self.project(grads)


def remove_conflict(g: np.ndarray, g_old: np.ndarray, strength: float) -> np.ndarray:
    """RAWM correction; ``g`` is returned untouched unless ``<g, g_old> < 0``."""
    dot = float(g @ g_old)
    norm2 = float(g_old @ g_old)
    if dot >= 0 or norm2 == 0.0:
        return g
    return g - strength * (dot / norm2) * g_old


def rotate_to_orthogonal(g: np.ndarray, g_old: np.ndarray) -> np.ndarray:
    """RWM rotation; ``g`` is returned untouched unless its angle to ``g_old`` exceeds pi/2.

    If ``g`` is anti-parallel to ``g_old`` the perpendicular direction is
    the coordinate axis least aligned with ``g_old`` (lowest index on
    ties), orthogonalised against ``g_old``.
    """
    norm_old = float(np.linalg.norm(g_old))
    norm_g = float(np.linalg.norm(g))
    if norm_old == 0.0 or norm_g == 0.0 or float(g @ g_old) >= 0:
        return g
    u = g_old / norm_old
    perp = g - float(g @ u) * u
    pnorm = float(np.linalg.norm(perp))
    if pnorm <= 1e-12 * norm_g:
        perp = np.zeros_like(g)
        perp[int(np.argmin(np.abs(u)))] = 1.0
        perp -= float(perp @ u) * u
        pnorm = float(np.linalg.norm(perp))
    return perp * (norm_g / pnorm)


class _ReferenceGradient(Strategy):
    def __init__(self, reference_capacity: int = 128):
        check_positive("reference_capacity", reference_capacity)
        self.reference_capacity = int(reference_capacity)
        self.reference = ReservoirBuffer(reference_capacity)

    def on_task_end(self, model, task):
        x, y = task.train_arrays()
        self.reference.offer(x, y, self.rng)
        return super().on_task_end(model, task)

    def old_gradient(self, model) -> np.ndarray:
        batch = make_batch(self.reference.features, self.reference.labels)
        return loss_and_grads(model, batch)[1].flat

    def modify(self, g, g_old, batch):
        raise NotImplementedError

    def transform_grads(self, grads, batch, model):
        if len(self.reference) == 0:
            return grads
        g_old = self.old_gradient(model)
        new = self.modify(grads.flat, g_old, batch)
        return grads if new is grads.flat else grads.with_flat(new)


@register_strategy("rawm")
class RAWM(_ReferenceGradient):
    def __init__(self, reference_capacity: int = 128, kappa: float = 1.0, base_strength: float = 0.5):
        super().__init__(reference_capacity)
        check_positive("kappa", kappa)
        self.kappa = float(kappa)
        self.base_strength = float(base_strength)

    def strength(self, batch) -> float:
        r = float(np.mean(batch.labels == BONAFIDE))
        r_ref = float(np.mean(self.reference.labels == BONAFIDE))
        return float(np.clip(self.base_strength + self.kappa * abs(r - r_ref), 0.0, 1.0))

    def modify(self, g, g_old, batch):
        return remove_conflict(g, g_old, self.strength(batch))


@register_strategy("rwm")
class RWM(_ReferenceGradient):
    def modify(self, g, g_old, batch):
        return rotate_to_orthogonal(g, g_old)
