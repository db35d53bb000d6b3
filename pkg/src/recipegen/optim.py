"""Adam with decoupled weight decay, linear warmup, and gradient checking."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .autodiff import Tensor, no_grad


@dataclass
class OptimizerConfig:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 0.01
    warmup_epochs: int = 5
    eps: float = 1e-8

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("betas must lie in [0, 1)")


def warmup_lr(config: OptimizerConfig, epoch: int) -> float:
    """Linear warmup over the first ``warmup_epochs`` epochs, then constant.

    Epoch ``e`` (0-based) uses ``lr * (e + 1) / warmup_epochs`` while
    ``e + 1 <= warmup_epochs``; epoch 0 of 5 therefore runs at lr / 5.
    """
    if config.warmup_epochs <= 0:
        return config.lr
    return config.lr * min(1.0, (epoch + 1) / config.warmup_epochs)


class Adam:
    """Standard Adam on a named parameter dict, decay decoupled from the
    moment-scaled update."""

    def __init__(self, params: dict[str, Tensor], config: OptimizerConfig):
        self.params = params
        self.config = config
        self.step_count = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self, epoch: int = 0, grad_scale: float = 1.0) -> None:
        cfg = self.config
        self.step_count += 1
        t = self.step_count
        lr = warmup_lr(cfg, epoch)
        bias1 = 1.0 - cfg.beta1**t
        bias2 = 1.0 - cfg.beta2**t
        for name, p in self.params.items():
            if p.grad is None:
                continue
            g = p.grad * grad_scale
            self.m[name] = cfg.beta1 * self.m[name] + (1.0 - cfg.beta1) * g
            self.v[name] = cfg.beta2 * self.v[name] + (1.0 - cfg.beta2) * g * g
            m_hat = self.m[name] / bias1
            v_hat = self.v[name] / bias2
            update = m_hat / (np.sqrt(v_hat) + cfg.eps)
            if cfg.weight_decay:
                update = update + cfg.weight_decay * p.data
            p.data = p.data - lr * update

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {"step_count": np.asarray(self.step_count)}
        for k in self.params:
            out[f"m.{k}"] = self.m[k]
            out[f"v.{k}"] = self.v[k]
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        self.step_count = int(arrays["step_count"])
        for k in self.params:
            self.m[k] = np.array(arrays[f"m.{k}"])
            self.v[k] = np.array(arrays[f"v.{k}"])


def grad_check(
    f: Callable[[], Tensor],
    params: Sequence[Tensor] | dict[str, Tensor],
    eps: float = 1e-5,
    max_coords_per_param: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Compare analytic gradients of the scalar ``f()`` against central finite
    differences at the current parameter values.

    Returns the max relative error ``|a - n| / max(|a| + |n|, 1e-3)`` over the
    checked coordinates.  ``max_coords_per_param`` subsamples coordinates of
    large tensors (deterministically when ``rng`` is seeded); parameters must
    be float64 for the differences to resolve.
    """
    if isinstance(params, dict):
        params = list(params.values())
    rng = rng or np.random.default_rng(0)

    for p in params:
        p.grad = None
    out = f()
    out.backward()
    analytic = [None if p.grad is None else p.grad.copy() for p in params]

    worst = 0.0
    for p, a in zip(params, analytic):
        flat = p.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords_per_param is not None and flat.size > max_coords_per_param:
            coords = np.sort(rng.choice(flat.size, size=max_coords_per_param, replace=False))
        a_flat = np.zeros(flat.size) if a is None else a.reshape(-1)
        for c in coords:
            orig = flat[c]
            step = eps * max(1.0, abs(orig))
            with no_grad():
                flat[c] = orig + step
                hi = f().item()
                flat[c] = orig - step
                lo = f().item()
                flat[c] = orig
            numeric = (hi - lo) / (2.0 * step)
            err = abs(a_flat[c] - numeric) / max(abs(a_flat[c]) + abs(numeric), 1e-3)
            worst = max(worst, err)
    return worst
