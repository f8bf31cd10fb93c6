from dataclasses import dataclass, field

import numpy as np

from src.infra.errors import NonFiniteError


@dataclass
class OptimizerState:
    """Adam moments and hyper-parameters for one network."""
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    decay: dict[str, float] = field(default_factory=dict)   # param name -> L2 coefficient
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: dict, lr: float, groups: dict[str, str] | None = None,
                   group_decay: dict[str, float] | None = None, **kwargs) -> "OptimizerState":
        group_decay = group_decay or {}
        decay = {name: group_decay.get((groups or {}).get(name, ""), 0.0) for name in params}
        return cls(
            lr=lr,
            decay=decay,
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
            **kwargs,
        )


def adam_step(params: dict, grads: dict, opt: OptimizerState):
    """One bias-corrected Adam update; returns (new params, new optimizer state)."""
    step = opt.step + 1
    new_params, new_m, new_v = {}, {}, {}
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p)
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient in layer {name.split('.')[0]} ({name})")
        if opt.decay.get(name):
            g = g + opt.decay[name] * p
        m = opt.beta1 * opt.m[name] + (1.0 - opt.beta1) * g
        v = opt.beta2 * opt.v[name] + (1.0 - opt.beta2) * g * g
        m_hat = m / (1.0 - opt.beta1 ** step)
        v_hat = v / (1.0 - opt.beta2 ** step)
        new_params[name] = p - opt.lr * m_hat / (np.sqrt(v_hat) + opt.eps)
        new_m[name], new_v[name] = m, v
    new_opt = OptimizerState(opt.lr, opt.beta1, opt.beta2, opt.eps, dict(opt.decay), step, new_m, new_v)
    return new_params, new_opt
