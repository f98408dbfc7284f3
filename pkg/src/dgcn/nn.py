"""Dense two/three-layer graph convolution model with hand-written gradients.

The model is::

    H_0 = X
    H_{k+1} = dropout(ReLU(A_hat H_k W_k))          k < L - 1
    Z = softmax(A_hat H_{L-1} W_{L-1})

``A_hat`` is any symmetric propagation matrix (ndarray or scipy sparse); the
engine holds no graph logic. Loss is the summed cross-entropy over a labeled
node mask.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import NumericError, ShapeError, ValidationError

PROB_FLOOR = 1e-12
CHECKPOINT_MAGIC = "dgcn-params v1"


def _readonly(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ModelParams:
    """Weight stack ``W(0) .. W(L-1)``; arrays are read-only."""

    layers: tuple

    def __post_init__(self):
        layers = tuple(_readonly(w) for w in self.layers)
        if len(layers) not in (2, 3):
            raise ValidationError(f"model depth must be 2 or 3, got {len(layers)}")
        for k, w in enumerate(layers):
            if w.ndim != 2:
                raise ShapeError(f"layer {k}: weight must be 2-D")
            if not np.all(np.isfinite(w)):
                raise NumericError(f"layer {k}: non-finite weight")
        for k in range(len(layers) - 1):
            if layers[k].shape[1] != layers[k + 1].shape[0]:
                raise ShapeError(
                    f"layer {k} output width {layers[k].shape[1]} != layer {k + 1} input width {layers[k + 1].shape[0]}"
                )
        object.__setattr__(self, "layers", layers)

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.layers[0].shape[0],) + tuple(w.shape[1] for w in self.layers)

    @property
    def depth(self) -> int:
        return len(self.layers)

    def __eq__(self, other):
        if not isinstance(other, ModelParams):
            return NotImplemented
        return len(self.layers) == len(other.layers) and all(
            np.array_equal(a, b) for a, b in zip(self.layers, other.layers)
        )

    __hash__ = None


def glorot_init(rows: int, cols: int, seed) -> np.ndarray:
    """Uniform Glorot/Xavier init in ``+-sqrt(6 / (rows + cols))``.

    ``seed`` is an int or a ``numpy.random.Generator``.
    """
    if rows < 1 or cols < 1:
        raise ValidationError("glorot_init needs rows, cols >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    bound = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-bound, bound, size=(rows, cols))


def init_params(dims: Sequence[int], seed) -> ModelParams:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return ModelParams(tuple(glorot_init(dims[k], dims[k + 1], rng) for k in range(len(dims) - 1)))


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class ForwardCache:
    a_hat: object
    x: object
    params: ModelParams
    inputs: list  # H_k fed into layer k (after dropout)
    pre: list  # A_hat H_k W_k for hidden layers
    masks: list  # dropout scale masks (None when inactive)
    probs: np.ndarray
    n: int = field(default=0)


def forward(a_hat, x, params: ModelParams, dropout_rate: float = 0.0, rng_seed=None, training: bool = False):
    """Run the model; returns ``(probs, cache)``.

    Inverted dropout with rate ``dropout_rate`` hits each hidden activation when
    ``training`` is true. ``rng_seed`` (int or Generator) drives the masks.
    """
    if not 0.0 <= dropout_rate < 1.0:
        raise ValidationError("dropout_rate must lie in [0, 1)")
    n = x.shape[0]
    if a_hat.shape != (n, n):
        raise ShapeError(f"propagation matrix shape {a_hat.shape} does not match {n} nodes")
    if x.shape[1] != params.dims[0]:
        raise ShapeError(f"layer 0: input width {x.shape[1]} != weight rows {params.dims[0]}")
    use_dropout = training and dropout_rate > 0.0
    rng = None
    if use_dropout:
        rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)

    h = x
    inputs, pre, masks = [], [], []
    last = params.depth - 1
    for k, w in enumerate(params.layers):
        inputs.append(h)
        z = np.asarray(a_hat @ (h @ w))
        if k == last:
            logits = z
            break
        pre.append(z)
        h = np.maximum(z, 0.0)
        mask = None
        if use_dropout:
            keep = rng.random(h.shape) >= dropout_rate
            mask = keep / (1.0 - dropout_rate)
            h = h * mask
        masks.append(mask)

    probs = softmax(logits)
    return probs, ForwardCache(a_hat, x, params, inputs, pre, masks, probs, n)


def _check_targets(labels, mask, n):
    labels = np.asarray(labels, dtype=np.int64)
    mask = np.asarray(mask)
    if mask.dtype == bool:
        if mask.shape != (n,):
            raise ValidationError("boolean mask length does not match node count")
        mask = np.flatnonzero(mask)
    mask = mask.astype(np.int64)
    if labels.shape != (n,):
        raise ValidationError(f"labels length {labels.shape} does not match {n} nodes")
    if mask.size == 0:
        raise ValidationError("mask selects no nodes")
    if np.any(labels[mask] < 0):
        raise ValidationError("masked node without a label")
    return labels, mask


def masked_cross_entropy(probs, labels, mask) -> float:
    """``-sum_{l in mask} ln probs[l, labels[l]]``; probabilities floored at 1e-12."""
    labels, mask = _check_targets(labels, mask, probs.shape[0])
    p = probs[mask, labels[mask]]
    return float(-np.log(np.maximum(p, PROB_FLOOR)).sum())


def backward(cache: ForwardCache, labels, mask) -> tuple:
    """Gradients of :func:`masked_cross_entropy` w.r.t. each weight matrix."""
    if not isinstance(cache, ForwardCache) or cache.probs is None:
        raise ValidationError("backward needs a cache returned by forward")
    labels, mask = _check_targets(labels, mask, cache.n)
    params = cache.params
    if len(cache.inputs) != params.depth or len(cache.pre) != params.depth - 1:
        raise ValidationError("cache does not match its parameters")

    # softmax + cross-entropy fused: d loss / d logits = probs - onehot on masked rows;
    # rows whose true-class probability sits under the clamp have a flat loss
    live = mask[cache.probs[mask, labels[mask]] >= PROB_FLOOR]
    g = np.zeros_like(cache.probs)
    g[live] = cache.probs[live]
    g[live, labels[live]] -= 1.0

    a_t = cache.a_hat.T
    grads = [None] * params.depth
    for k in range(params.depth - 1, -1, -1):
        gm = np.asarray(a_t @ g)  # gradient w.r.t. H_k W_k
        grads[k] = np.asarray(cache.inputs[k].T @ gm)
        if k == 0:
            break
        g = gm @ params.layers[k].T
        if cache.masks[k - 1] is not None:
            g = g * cache.masks[k - 1]
        g = g * (cache.pre[k - 1] > 0)
    return tuple(grads)


# ------------------------------------------------------------------ optimizers


def _decay_terms(weight_decay, depth):
    if np.isscalar(weight_decay):
        return [float(weight_decay)] * depth
    wd = [float(x) for x in weight_decay]
    if len(wd) != depth:
        raise ShapeError("per-layer weight decay length does not match depth")
    return wd


def _effective_grads(params, grads, weight_decay):
    if len(grads) != params.depth:
        raise ShapeError("gradient count does not match parameter count")
    out = []
    for k, (w, g, wd) in enumerate(zip(params.layers, grads, _decay_terms(weight_decay, params.depth))):
        g = np.asarray(g, dtype=np.float64)
        if g.shape != w.shape:
            raise ShapeError(f"layer {k}: gradient shape {g.shape} != weight shape {w.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"layer {k}: non-finite gradient")
        out.append(g + wd * w if wd else g)
    return out


def sgd_step(params: ModelParams, grads, lr: float, weight_decay=0.0, state=None):
    """Plain gradient descent; ``weight_decay`` is a scalar or one value per layer."""
    if lr < 0:
        raise ValidationError("learning rate must be non-negative")
    eff = _effective_grads(params, grads, weight_decay)
    new = ModelParams(tuple(w - lr * g for w, g in zip(params.layers, eff)))
    return new, state


@dataclass(frozen=True)
class AdamState:
    step: int
    m: tuple
    v: tuple


def adam_init(params: ModelParams) -> AdamState:
    zeros = tuple(np.zeros_like(w) for w in params.layers)
    return AdamState(0, zeros, zeros)


def adam_step(
    params: ModelParams,
    grads,
    lr: float,
    weight_decay=0.0,
    state: AdamState | None = None,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
):
    """One Adam update with bias-corrected moments. Returns ``(params, state)``."""
    if lr < 0:
        raise ValidationError("learning rate must be non-negative")
    eff = _effective_grads(params, grads, weight_decay)
    if state is None:
        state = adam_init(params)
    t = state.step + 1
    ms, vs, layers = [], [], []
    for w, g, m, v in zip(params.layers, eff, state.m, state.v):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1**t)
        v_hat = v / (1 - beta2**t)
        layers.append(w - lr * m_hat / (np.sqrt(v_hat) + eps))
        ms.append(m)
        vs.append(v)
    return ModelParams(tuple(layers)), AdamState(t, tuple(ms), tuple(vs))


# ----------------------------------------------------------------- checkpoints


def save_params(params: ModelParams, path) -> None:
    """Text checkpoint: magic line, layer count, then per layer shape + values."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(CHECKPOINT_MAGIC + "\n")
        fh.write(f"{params.depth}\n")
        for w in params.layers:
            fh.write(f"{w.shape[0]} {w.shape[1]}\n")
            for row in w:
                fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def load_params(path) -> ModelParams:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise ValidationError(f"{path}: not a {CHECKPOINT_MAGIC!r} checkpoint")
    depth = int(lines[1])
    pos = 2
    layers = []
    for _ in range(depth):
        r, c = (int(t) for t in lines[pos].split())
        pos += 1
        w = np.array([[float(t) for t in lines[pos + i].split()] for i in range(r)], dtype=np.float64)
        if w.shape != (r, c):
            raise ShapeError(f"{path}: layer shape mismatch")
        layers.append(w)
        pos += r
    return ModelParams(tuple(layers))
