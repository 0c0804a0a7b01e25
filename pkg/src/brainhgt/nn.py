"""Parameter initialisation and the Adam optimiser."""

from dataclasses import dataclass, field

import numpy as np

from .errors import BadShape, RankDeficient, ShapeMismatch


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def xavier_uniform_init(shape, seed):
    """Glorot-uniform draw on ``[-a, a]`` with ``a = sqrt(6 / (fan_in + fan_out))``."""
    shape = tuple(int(s) for s in shape)
    if len(shape) < 2:
        raise BadShape(f"xavier init needs >= 2 dims, got {shape}")
    receptive = int(np.prod(shape[2:])) if len(shape) > 2 else 1
    fan_in, fan_out = shape[1] * receptive, shape[0] * receptive
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return _rng(seed).uniform(-bound, bound, size=shape)


def gram_schmidt(c, tol=1e-10):
    """Orthonormalise the rows of ``c`` in order (modified Gram-Schmidt)."""
    c = np.array(c, dtype=np.float64, copy=True)
    if c.ndim != 2:
        raise BadShape("gram_schmidt expects a 2-D matrix")
    k, d = c.shape
    if k > d:
        raise RankDeficient(d)
    for i in range(k):
        v = c[i]
        for j in range(i):
            v -= (c[j] @ v) * c[j]
        norm = np.linalg.norm(v)
        if norm < tol:
            raise RankDeficient(i)
        c[i] = v / norm
    return c


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-4
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, grads, state):
    """One bias-corrected Adam update, in place on ``params``.

    ``params`` and ``grads`` map names to arrays.  Weight decay enters as
    ``weight_decay * theta`` added to the gradient.  Returns ``state``.
    """
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p)
        if g.shape != p.shape:
            raise ShapeMismatch(f"{name}: grad {g.shape} vs param {p.shape}")
        if state.weight_decay:
            g = g + state.weight_decay * p
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return state
