"""Fixed five-layer rectifier classifier with hand-written backprop.

Parameters for all layers live in one contiguous float64 vector; the
per-layer weights and biases are views into it. This keeps
regularisers (which work on the whole vector) and the backward pass
(which works per layer) on the same storage.
"""

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import ModelError

N_LAYERS = 5
N_CLASSES = 2
BONAFIDE, SPOOF = 0, 1


class ModelParams:
    """Weights ``[out x in]`` and biases ``[out]`` of each layer.

    Also used as the gradient container, since gradients must be
    shape-congruent with the model that produced them.
    """

    __slots__ = ("shapes", "flat", "weights", "biases")

    def __init__(self, shapes, flat=None):
        self.shapes = tuple((int(o), int(i)) for o, i in shapes)
        size = sum(o * i + o for o, i in self.shapes)
        if flat is None:
            flat = np.zeros(size, dtype=np.float64)
        else:
            flat = np.ascontiguousarray(flat, dtype=np.float64)
            if flat.shape != (size,):
                raise ModelError(f"flat vector has shape {flat.shape}, expected ({size},)")
        self.flat = flat
        self.weights = []
        self.biases = []
        pos = 0
        for o, i in self.shapes:
            self.weights.append(flat[pos:pos + o * i].reshape(o, i))
            pos += o * i
            self.biases.append(flat[pos:pos + o])
            pos += o

    @property
    def input_dim(self) -> int:
        return self.shapes[0][1]

    @property
    def output_dim(self) -> int:
        return self.shapes[-1][0]

    @property
    def num_params(self) -> int:
        return self.flat.size

    def layer_slices(self):
        """(weight_slice, bias_slice) into ``flat`` for each layer."""
        out, pos = [], 0
        for o, i in self.shapes:
            w = slice(pos, pos + o * i)
            pos += o * i
            b = slice(pos, pos + o)
            pos += o
            out.append((w, b))
        return out

    def __reduce__(self):
        # rebuild the per-layer views on unpickle / deepcopy
        return (ModelParams, (self.shapes, self.flat))

    def copy(self) -> "ModelParams":
        return ModelParams(self.shapes, self.flat.copy())

    def zeros_like(self) -> "ModelParams":
        return ModelParams(self.shapes)

    def with_flat(self, flat) -> "ModelParams":
        return ModelParams(self.shapes, flat)

    def congruent(self, other: "ModelParams") -> bool:
        return self.shapes == other.shapes

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.flat)))

    def tobytes(self) -> bytes:
        return self.flat.tobytes()

    def __eq__(self, other):
        if not isinstance(other, ModelParams):
            return NotImplemented
        return self.shapes == other.shapes and np.array_equal(self.flat, other.flat)

    def __repr__(self):
        dims = [self.shapes[0][1]] + [o for o, _ in self.shapes]
        return f"ModelParams({'->'.join(map(str, dims))})"


Gradients = ModelParams


class Batch(NamedTuple):
    features: np.ndarray
    labels: np.ndarray


def make_batch(features, labels) -> Batch:
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ModelError(f"batch features must be a non-empty [N x d] matrix, got shape {x.shape}")
    if y.shape != (x.shape[0],):
        raise ModelError(f"labels shape {y.shape} does not match {x.shape[0]} samples")
    if not np.all((y == 0) | (y == 1)):
        raise ModelError("labels must be 0 (bonafide) or 1 (spoof)")
    return Batch(x, y.astype(np.int64))


def init_model(input_dim: int, hidden_width: int = 128, seed: int = 0) -> ModelParams:
    """Glorot-uniform weights and zero biases from a PCG64 stream.

    Layer ``l`` draws from U(-a, a) with ``a = sqrt(6 / (fan_in + fan_out))``,
    layers drawn in order, so (seed, dims) fixes every bit.
    """
    if int(input_dim) < 1 or int(hidden_width) < 1:
        raise ModelError(f"dimensions must be positive, got input_dim={input_dim}, hidden_width={hidden_width}")
    dims = [int(input_dim)] + [int(hidden_width)] * (N_LAYERS - 1) + [N_CLASSES]
    shapes = [(dims[k + 1], dims[k]) for k in range(N_LAYERS)]
    model = ModelParams(shapes)
    rng = np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))
    for w in model.weights:
        o, i = w.shape
        bound = np.sqrt(6.0 / (i + o))
        w[...] = rng.uniform(-bound, bound, size=(o, i))
    return model


def _check_features(model: ModelParams, features) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise ModelError(f"feature dimension {x.shape[-1]} does not match model input {model.input_dim}")
    return x


def forward(model: ModelParams, features) -> np.ndarray:
    """Logits ``[N x 2]``."""
    h = _check_features(model, features)
    last = len(model.weights) - 1
    for k, (w, b) in enumerate(zip(model.weights, model.biases)):
        h = h @ w.T + b
        if k < last:
            h = np.maximum(h, 0.0)
    return h


def forward_cache(model: ModelParams, features):
    """Logits plus the input activation of every layer (for backprop and OWM)."""
    h = _check_features(model, features)
    inputs = []
    last = len(model.weights) - 1
    for k, (w, b) in enumerate(zip(model.weights, model.biases)):
        inputs.append(h)
        h = h @ w.T + b
        if k < last:
            h = np.maximum(h, 0.0)
    return h, inputs


def backward(model: ModelParams, inputs, dlogits, squared: bool = False) -> ModelParams:
    """Backpropagate ``dlogits`` through the cached layer inputs.

    With ``squared=True`` returns the mean over rows of the squared
    per-row gradients instead, assuming ``dlogits`` rows carry the 1/N
    factor of a mean loss (used for the empirical Fisher).
    """
    grads = model.zeros_like()
    delta = np.asarray(dlogits, dtype=np.float64)
    n = delta.shape[0]
    for k in range(len(model.weights) - 1, -1, -1):
        a = inputs[k]
        if squared:
            grads.weights[k][...] = n * ((delta ** 2).T @ (a ** 2))
            grads.biases[k][...] = n * (delta ** 2).sum(axis=0)
        else:
            grads.weights[k][...] = delta.T @ a
            grads.biases[k][...] = delta.sum(axis=0)
        if k > 0:
            # relu'(z) > 0 exactly where the next layer's input is positive
            delta = (delta @ model.weights[k]) * (a > 0)
    return grads


def softmax(logits, temperature: float = 1.0) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64) / temperature
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits, temperature: float = 1.0) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64) / temperature
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def cross_entropy(logits, labels) -> float:
    logp = log_softmax(logits)
    return float(-logp[np.arange(len(labels)), labels].mean())


def batch_loss(model: ModelParams, batch: Batch) -> float:
    if batch.features.shape[0] == 0:
        raise ModelError("empty batch")
    return cross_entropy(forward(model, batch.features), batch.labels)


def loss_and_grads(model: ModelParams, batch: Batch):
    """Mean softmax cross-entropy and its exact gradient."""
    x, y = batch
    n = x.shape[0]
    if n == 0:
        raise ModelError("empty batch")
    logits, inputs = forward_cache(model, x)
    logp = log_softmax(logits)
    loss = float(-logp[np.arange(n), y].mean())
    dlogits = np.exp(logp)
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    return loss, backward(model, inputs, dlogits)


def fisher_diagonal(model: ModelParams, batch: Batch) -> ModelParams:
    """Mean squared per-sample loss gradient over the batch."""
    x, y = batch
    n = x.shape[0]
    logits, inputs = forward_cache(model, x)
    dlogits = softmax(logits)
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    return backward(model, inputs, dlogits, squared=True)


@dataclass
class OptimizerState:
    lr: float = 0.01
    momentum: float = 0.9
    buffer: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if not self.lr > 0:
            raise ModelError(f"learning rate must be positive, got {self.lr}")
        if not 0.0 <= self.momentum < 1.0:
            raise ModelError(f"momentum must lie in [0, 1), got {self.momentum}")


def apply_update(model: ModelParams, grads: ModelParams, opt: OptimizerState):
    """One SGD-with-momentum step: ``v = mu*v + g; theta -= lr*v``.

    Returns fresh (model, optimizer state); inputs are not modified.
    """
    if not model.congruent(grads):
        raise ModelError(f"gradient shapes {grads.shapes} do not match model {model.shapes}")
    if not grads.is_finite():
        raise ModelError("non-finite gradient entries")
    buf = opt.buffer
    if buf is None:
        buf = np.zeros_like(model.flat)
    elif buf.shape != model.flat.shape:
        raise ModelError("momentum buffer is not shape-congruent with the model")
    buf = opt.momentum * buf + grads.flat
    new = model.with_flat(model.flat - opt.lr * buf)
    return new, OptimizerState(opt.lr, opt.momentum, buf)


# denominators below this switch the check to absolute error
FD_ABS_FLOOR = 1e-4


def finite_diff_check(model: ModelParams, batch: Batch, step: float = 1e-5, grads=None) -> float:
    """Max relative error between analytic and central-difference gradients.

    Per parameter the error is ``|a - n| / max(|a|, |n|, FD_ABS_FLOOR)``;
    pass ``grads`` to check a gradient other than the analytic one.
    """
    if not step > 0:
        raise ModelError(f"step must be positive, got {step}")
    if grads is None:
        _, grads = loss_and_grads(model, batch)
    probe = model.copy()
    numeric = np.empty_like(model.flat)
    for j in range(model.num_params):
        orig = probe.flat[j]
        probe.flat[j] = orig + step
        up = batch_loss(probe, batch)
        probe.flat[j] = orig - step
        down = batch_loss(probe, batch)
        probe.flat[j] = orig
        numeric[j] = (up - down) / (2.0 * step)
    a = grads.flat
    denom = np.maximum(np.maximum(np.abs(a), np.abs(numeric)), FD_ABS_FLOOR)
    return float(np.max(np.abs(a - numeric) / denom))


def kink_margin(model: ModelParams, features) -> float:
    """Smallest |pre-activation| over the ReLU layers for ``features``.

    Central differences are only meaningful when every ReLU input stays
    on one side of zero across the probe step.
    """
    _, inputs = forward_cache(model, features)
    return float(min(np.min(np.abs(a @ W.T + b))
                     for a, W, b in zip(inputs[:-1], model.weights[:-1], model.biases[:-1])))


def gradcheck_suite(trials: int = 200, seed: int = 0, step: float = 1e-5, max_dim: int = 5, max_n: int = 8):
    """Worst finite-difference error over ``trials`` random small models and batches.

    Cases with a ReLU input within ``100 * step`` of its kink are redrawn.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    done = 0
    while done < trials:
        d, h, n = (int(v) for v in rng.integers(1, [max_dim + 1, max_dim + 1, max_n + 1]))
        model = init_model(d, h, int(rng.integers(2 ** 32)))
        model.flat[:] += 0.1 * rng.standard_normal(model.num_params)
        batch = make_batch(rng.standard_normal((n, d)), rng.integers(0, 2, size=n))
        if kink_margin(model, batch.features) < 100 * step:
            continue
        worst = max(worst, finite_diff_check(model, batch, step))
        done += 1
    return worst
