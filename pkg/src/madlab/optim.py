"""First-order optimization and the gradient test harness."""

from dataclasses import dataclass, field

import numpy as np

from .autodiff import backward


@dataclass
class AdamState:
    """Bias-corrected Adam. `m`/`v` mirror the parameter list shapes."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def init(cls, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        return cls(
            lr=lr, beta1=beta1, beta2=beta2, eps=eps, step=0,
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
        )


def adam_step(params, grads, state):
    """One Adam update. Returns (new params, new state); inputs untouched."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("adam_step: params/grads/state length mismatch")
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"adam_step: shape mismatch {p.shape} vs {g.shape}")
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        p = p - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        new_params.append(p)
        new_m.append(m)
        new_v.append(v)
    return new_params, AdamState(
        lr=state.lr, beta1=b1, beta2=b2, eps=state.eps, step=t, m=new_m, v=new_v
    )


def sgd_step(params, grads, lr):
    """Plain gradient descent, available as the editing optimizer."""
    return [p - lr * g for p, g in zip(params, grads)]


def finite_diff_check(f, params, h=1e-5):
    """Max relative error between reverse-mode and central-difference gradients.

    `f` maps a list of param Tensors to a scalar Tensor and must be
    deterministic. Error per coordinate is
    |autodiff - central| / max(|central|, 1e-8).
    """
    from .autodiff import param as make_param

    if h <= 0:
        raise ValueError("finite_diff_check: h must be positive")
    leaves = [make_param(np.array(p, dtype=np.float64)) for p in params]
    grads = backward(f(leaves))
    worst = 0.0
    for leaf in leaves:
        g = np.zeros_like(leaf.data) if leaf not in grads else np.asarray(grads[leaf])
        flat = leaf.data.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            hi = float(f(leaves).data)
            flat[i] = orig - h
            lo = float(f(leaves).data)
            flat[i] = orig
            central = (hi - lo) / (2.0 * h)
            err = abs(gflat[i] - central) / max(abs(central), 1e-8)
            worst = max(worst, err)
    return worst
