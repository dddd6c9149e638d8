from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, grads, state):
    """Bias-corrected Adam update.

    Returns a new parameter dict; moment buffers in ``state`` are replaced and
    the step counter goes up by one.
    """
    if set(grads) != set(params):
        missing = sorted(set(params) ^ set(grads))
        raise KeyError(f"gradient keys do not match parameters: {missing}")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1 ** t
    correction2 = 1.0 - b2 ** t
    updated = {}
    for key, p in params.items():
        g = grads[key]
        if g.shape != p.shape:
            raise ValueError(f"gradient for {key} has shape {g.shape}, parameter {p.shape}")
        dt = p.dtype.type
        m = state.m.get(key)
        v = state.v.get(key)
        if m is None:
            m = np.zeros_like(p)
            v = np.zeros_like(p)
        m = dt(b1) * m + dt(1 - b1) * g
        v = dt(b2) * v + dt(1 - b2) * (g * g)
        state.m[key] = m
        state.v[key] = v
        m_hat = m / dt(correction1)
        v_hat = v / dt(correction2)
        updated[key] = p - dt(state.lr) * m_hat / (np.sqrt(v_hat) + dt(state.epsilon))
    return updated
