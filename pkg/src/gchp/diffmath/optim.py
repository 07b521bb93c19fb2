"""Adam and a central finite-difference gradient checker."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from gchp.diffmath.tensor import GradientTape, Tensor, value


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class AdamState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    config: AdamConfig = AdamConfig(),
) -> tuple[dict, AdamState]:
    """One bias-corrected Adam update; returns new parameter arrays and state."""
    t = state.step + 1
    bc1 = 1.0 - config.beta1**t
    bc2 = 1.0 - config.beta2**t
    new_params, new_m, new_v = {}, {}, {}
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
        m = config.beta1 * state.m.get(name, 0.0) + (1.0 - config.beta1) * g
        v = config.beta2 * state.v.get(name, 0.0) + (1.0 - config.beta2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        new_params[name] = p - config.lr * m_hat / (np.sqrt(v_hat) + config.eps)
        new_m[name], new_v[name] = m, v
    return new_params, AdamState(t, new_m, new_v)


def sgd_step(params, grads, lr: float):
    return {k: p - lr * grads[k] for k, p in params.items()}


def gradients(fn: Callable[[dict], Tensor], params: Mapping[str, np.ndarray]) -> tuple[float, dict]:
    """Value and tape gradients of ``fn`` at ``params``."""
    tensors = {k: Tensor(v, name=k) for k, v in params.items()}
    with GradientTape() as tape:
        loss = fn(tensors)
    gs = tape.gradient(loss, list(tensors.values()))
    return loss.item(), dict(zip(tensors, gs))


def finite_difference_gradients(
    fn: Callable[[dict], object], params: Mapping[str, np.ndarray], step: float = 1e-5
) -> dict:
    """Central differences; ``fn`` is evaluated on plain arrays, never on a tape."""
    base = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    out = {}
    for name, arr in base.items():
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = float(np.asarray(value(fn({k: Tensor(v) for k, v in base.items()}))))
            flat[i] = orig - step
            down = float(np.asarray(value(fn({k: Tensor(v) for k, v in base.items()}))))
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * step)
        out[name] = g
    return out


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-10) -> float:
    """Max abs deviation scaled by the tensor's largest gradient magnitude."""
    scale = max(np.max(np.abs(analytic), initial=0.0), np.max(np.abs(numeric), initial=0.0), floor)
    return float(np.max(np.abs(analytic - numeric), initial=0.0) / scale)


def check_gradients(fn, params, step: float = 1e-5) -> dict[str, float]:
    """Per-tensor relative error between tape gradients and central differences."""
    _, analytic = gradients(fn, params)
    numeric = finite_difference_gradients(fn, params, step)
    return {k: relative_error(analytic[k], numeric[k]) for k in params}
