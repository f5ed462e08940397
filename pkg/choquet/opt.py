"""
Adam 优化器与投影更新

AdamState 是值类型：adam_step 返回新的状态与新的参数，不修改输入。
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from choquet.exceptions import ShapeError
from choquet.net import MaxoutNet, Params

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: Params, lr: float, betas: Tuple[float, float] = (0.9, 0.999), eps: float = 1e-8) -> "AdamState":
        """为给定参数结构创建零矩估计"""
        zeros = {key: np.zeros_like(value) for key, value in params.items()}
        return cls(
            lr=lr,
            beta1=betas[0],
            beta2=betas[1],
            eps=eps,
            t=0,
            m=zeros,
            v={key: np.zeros_like(value) for key, value in params.items()},
        )


def _check_structure(state: AdamState, params: Params, grads: Params):
    if set(params) != set(grads):
        raise ShapeError(f"gradient keys {sorted(grads)} do not match parameter keys {sorted(params)}")
    for key, value in params.items():
        if grads[key].shape != value.shape:
            raise ShapeError(f"gradient {key} has shape {grads[key].shape}, expected {value.shape}")
        if key in state.m and state.m[key].shape != value.shape:
            raise ShapeError(f"optimizer moment {key} has shape {state.m[key].shape}, expected {value.shape}")


def adam_step(state: AdamState, params: Params, grads: Params) -> Tuple[AdamState, Params]:
    """
    一步 Adam 下降:
        m ← β1 m + (1-β1) g
        v ← β2 v + (1-β2) g²
        θ ← θ - lr · m̂ / (√v̂ + ε)
    """
    _check_structure(state, params, grads)
    t = state.t + 1
    bias1 = 1.0 - state.beta1 ** t
    bias2 = 1.0 - state.beta2 ** t
    new_m, new_v, new_params = {}, {}, {}
    for key, theta in params.items():
        g = grads[key]
        m_prev = state.m.get(key, np.zeros_like(theta))
        v_prev = state.v.get(key, np.zeros_like(theta))
        m = state.beta1 * m_prev + (1.0 - state.beta1) * g
        v = state.beta2 * v_prev + (1.0 - state.beta2) * g * g
        m_hat = m / bias1
        v_hat = v / bias2
        new_params[key] = theta - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        new_m[key] = m
        new_v[key] = v
    new_state = AdamState(
        lr=state.lr, beta1=state.beta1, beta2=state.beta2, eps=state.eps, t=t, m=new_m, v=new_v
    )
    return new_state, new_params


def projected_update(net: MaxoutNet, state: AdamState, grads: Params) -> Tuple[MaxoutNet, AdamState]:
    """adam_step 之后按网络的约束模式投影，返回的网络总是可行的"""
    new_state, params = adam_step(state, net.params, grads)
    return net.with_params(params).project(), new_state


def clamp_scalar(z: float, lo: float, hi: float) -> float:
    if lo > hi:
        raise ValueError(f"clamp bounds out of order: lo={lo} > hi={hi}")
    return float(min(max(z, lo), hi))
