"""Central finite-difference check of the analytic backward pass."""
import copy
from dataclasses import dataclass

import numpy as np

from . import functional as F
from .network import BatchNorm, MaxPool2D, ReLU, network_backward, network_forward


@dataclass
class GradCheckResult:
    """Outcome of :func:`gradient_check`.

    ``max_relative_error`` is the worst per-tensor error
    ``|a - n| / max(|a|, |n|, floor)`` taken over 2-norms of the probed
    entries of one tensor. ``max_entry_error`` is the worst single-entry
    ratio; it is dominated by truncation noise on near-zero entries and is
    only reported for diagnosis.
    """

    max_relative_error: float
    worst_param: str
    checked: int
    skipped: int
    max_entry_error: float = 0.0

    def passed(self, threshold=1e-5):
        return self.checked > 0 and self.max_relative_error < threshold


def _kink_signature(spec, tape):
    parts = []
    for layer, cache in zip(spec.layers, tape.caches):
        if isinstance(layer, ReLU):
            parts.append(cache)
        elif isinstance(layer, MaxPool2D):
            parts.append(cache[0])
    return parts


def _same_branch(a, b):
    return all(np.array_equal(x, y) for x, y in zip(a, b))


def relative_error(analytic, numeric, floor=1e-6):
    analytic = np.atleast_1d(np.asarray(analytic, dtype=np.float64))
    numeric = np.atleast_1d(np.asarray(numeric, dtype=np.float64))
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), floor)
    return float(np.linalg.norm(analytic - numeric) / scale)


def gradient_check(spec, params, x, y, h=1e-4, state=None, per_tensor=12, seed=0,
                   grad_scale=1.0, floor=1e-6, max_refine=3, loss_fn=None):
    """Compare analytic and central-difference gradients in float64.

    A random subsample of ``per_tensor`` entries of every parameter tensor is
    probed. When a +h/-h pair lands on different sides of a ReLU or max-pool
    decision the function is not smooth over the probe interval, so the step
    is shrunk tenfold (up to ``max_refine`` times) and the entry is skipped
    if it still straddles a kink. ``grad_scale`` multiplies the analytic
    gradients and exists for negative-control runs. ``loss_fn(logits, y)``
    must return ``(loss, grad_logits)`` and defaults to softmax
    cross-entropy.
    """
    loss_fn = loss_fn or F.softmax_cross_entropy
    params = {k: np.asarray(v, dtype=np.float64).copy() for k, v in params.items()}
    x = np.asarray(x, dtype=np.float64)
    base_state = copy.deepcopy(state) if state is not None else None
    if base_state is not None:
        for s in base_state.values():
            s.running_mean = s.running_mean.astype(np.float64)
            s.running_var = s.running_var.astype(np.float64)
    has_bn = any(isinstance(layer, BatchNorm) for layer in spec.layers)
    if has_bn and base_state is None:
        raise ValueError("network has batch norm layers; pass state")

    def run(p):
        st = copy.deepcopy(base_state)
        logits, tape = network_forward(spec, p, x, mode="train", state=st,
                                       rng=np.random.default_rng(seed + 7919))
        loss, grad = loss_fn(logits, y)
        return loss, grad, tape

    _, grad_logits, tape = run(params)
    analytic = network_backward(spec, params, tape, grad_logits)

    rng = np.random.default_rng(seed)
    worst, worst_key, worst_entry, checked, skipped = 0.0, "", 0.0, 0, 0
    for key, p in params.items():
        flat = p.reshape(-1)
        picks = rng.choice(flat.size, size=min(per_tensor, flat.size), replace=False)
        probed_a, probed_n = [], []
        for idx in picks:
            original = flat[idx]
            step = h
            numeric = None
            for _ in range(max_refine + 1):
                flat[idx] = original + step
                lp, _, tp = run(params)
                flat[idx] = original - step
                lm, _, tm = run(params)
                flat[idx] = original
                if _same_branch(_kink_signature(spec, tp), _kink_signature(spec, tm)):
                    numeric = (lp - lm) / (2 * step)
                    break
                step /= 10
            if numeric is None:
                skipped += 1
                continue
            a = grad_scale * analytic[key].reshape(-1)[idx]
            probed_a.append(a)
            probed_n.append(numeric)
            worst_entry = max(worst_entry, relative_error(a, numeric, floor))
            checked += 1
        if probed_a:
            err = relative_error(probed_a, probed_n, floor)
            if err > worst:
                worst, worst_key = err, key
    return GradCheckResult(float(worst), worst_key, checked, skipped, float(worst_entry))
