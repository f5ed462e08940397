"""
代理 VDC / CT 距离估计

VDC(μ₊‖μ₋) = sup_u E_{μ₋}[u] - E_{μ₊}[u]，u 取遍输入凸 maxout 网络 (ICMN)。
内层最大化使用投影 Adam 上升；零函数属于每个约束类，因此估计值总是非负。
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from choquet.exceptions import ProfileError, ShapeError
from choquet.measures import EmpiricalMeasure, moments
from choquet.models import CriticConfig, ProfileMode
from choquet.net import MaxoutNet, add_grads, make_rng
from choquet.opt import AdamState, projected_update
from config import settings

logger = logging.getLogger(__name__)


def _check_dims(plus: EmpiricalMeasure, minus: EmpiricalMeasure):
    if plus.dim != minus.dim:
        raise ShapeError(f"dimension mismatch: plus has d={plus.dim}, minus has d={minus.dim}")


def vdc_loss(critic: MaxoutNet, plus: EmpiricalMeasure, minus: EmpiricalMeasure) -> float:
    """E_minus[u] - E_plus[u]，即 VDC 内层目标"""
    _check_dims(plus, minus)
    return float(minus.weights @ critic(minus.points) - plus.weights @ critic(plus.points))


def critic_ascent_step(
    critic: MaxoutNet,
    state: AdamState,
    plus_points: np.ndarray,
    plus_weights: np.ndarray,
    minus_points: np.ndarray,
    minus_weights: np.ndarray,
    reg: float = 0.0,
) -> Tuple[MaxoutNet, AdamState, float, float]:
    """
    对 J = E₋[u] - E₊[u] - reg·(E₊[u²] + E₋[u²]) 做一步投影 Adam 上升。

    返回 (新网络, 新优化器状态, 上升前的批目标, 上升前的正则项)。
    """
    u_plus, trace_plus = critic.forward_batch(plus_points)
    u_minus, trace_minus = critic.forward_batch(minus_points)
    objective = float(minus_weights @ u_minus - plus_weights @ u_plus)
    regularizer = float(plus_weights @ (u_plus * u_plus) + minus_weights @ (u_minus * u_minus))
    # 下降方向为 -J 的梯度
    up_plus = plus_weights * (1.0 + 2.0 * reg * u_plus)
    up_minus = minus_weights * (-1.0 + 2.0 * reg * u_minus)
    grads_plus, _ = critic.backward(trace_plus, up_plus)
    grads_minus, _ = critic.backward(trace_minus, up_minus)
    critic, state = projected_update(critic, state, add_grads(grads_plus, grads_minus))
    return critic, state, objective, regularizer


@dataclass
class VdcEstimate:
    value: float
    critic: MaxoutNet
    # 每步的 (step, objective, regularizer)
    records: List[dict] = field(default_factory=list)

    @property
    def trace(self) -> pd.DataFrame:
        return pd.DataFrame(self.records, columns=["step", "objective", "regularizer"])

    def to_csv(self, path: str):
        self.trace.to_csv(path, index=False)


@dataclass
class CtEstimate:
    value: float
    # VDC(plus‖minus) 与 VDC(minus‖plus) 两次估计
    forward: VdcEstimate
    backward: VdcEstimate

    @property
    def critics(self) -> Tuple[MaxoutNet, MaxoutNet]:
        return self.forward.critic, self.backward.critic


def _batch(measure: EmpiricalMeasure, size: Optional[int], rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    if size is None:
        return measure.points, measure.weights
    idx = rng.choice(measure.size, size=size, replace=True, p=measure.weights)
    return measure.points[idx], np.full(size, 1.0 / size)


def affine_candidate(plus: EmpiricalMeasure, minus: EmpiricalMeasure, cfg: CriticConfig) -> Optional[MaxoutNet]:
    """
    hard(C) 类中最好的线性评估函数 u(x) = <c, x>：c 沿 E₋x - E₊x 方向、‖c‖ = C，
    递减模式下方向先截断到非正象限。soft 模式没有范数球，返回 None。
    """
    if not cfg.profile.is_hard:
        return None
    gap = minus.weights @ minus.points - plus.weights @ plus.points
    if cfg.profile.mode == ProfileMode.INPUT_CONVEX_DECREASING:
        gap = np.minimum(gap, 0.0)
    norm = float(np.linalg.norm(gap))
    if norm == 0.0:
        return None
    return MaxoutNet.affine(cfg.shape, cfg.profile, cfg.profile.radius * gap / norm)


def _ascend(
    plus: EmpiricalMeasure,
    minus: EmpiricalMeasure,
    eval_plus: EmpiricalMeasure,
    eval_minus: EmpiricalMeasure,
    critic: MaxoutNet,
    cfg: CriticConfig,
    batch_rng: np.random.Generator,
) -> Tuple[float, MaxoutNet, List[dict]]:
    """单次投影 Adam 上升，返回评估集上见过的最好值（可能为负）、对应网络与逐步记录"""
    state = AdamState.for_params(critic.params, cfg.lr)
    reg = cfg.profile.penalty
    best_value, best_critic = vdc_loss(critic, eval_plus, eval_minus), critic
    records = []
    for step in range(1, cfg.inner_steps + 1):
        plus_pts, plus_w = _batch(plus, cfg.batch_size, batch_rng)
        minus_pts, minus_w = _batch(minus, cfg.batch_size, batch_rng)
        critic, state, objective, regularizer = critic_ascent_step(
            critic, state, plus_pts, plus_w, minus_pts, minus_w, reg
        )
        records.append({"step": step, "objective": objective, "regularizer": regularizer})
        if step % cfg.eval_every == 0 or step == cfg.inner_steps:
            value = vdc_loss(critic, eval_plus, eval_minus)
            if value > best_value:
                best_value, best_critic = value, critic
    return best_value, best_critic, records


def estimate_vdc(
    plus: EmpiricalMeasure,
    minus: EmpiricalMeasure,
    cfg: CriticConfig,
    warm_start: Optional[MaxoutNet] = None,
    trace_path: Optional[str] = None,
) -> VdcEstimate:
    """
    代理 VDC(plus‖minus) 估计

    运行 cfg.restarts 次、每次 cfg.inner_steps 步的投影 Adam 上升；每 eval_every 步在固定评估集上计算
    不含正则项的目标，返回见过的最好值及对应网络。候选集中始终包含零网络，hard 模式下还包含最好的
    线性评估函数，所以返回值不小于 0，两测度相同时恰为 0。warm_start 只用于第一次上升。
    返回的 records 属于产生最好网络的那次上升（最好值来自固定候选时取第一次）。
    """
    _check_dims(plus, minus)
    if not cfg.profile.is_convex:
        raise ProfileError(f"critic profile must be input convex, got {cfg.profile.mode.value}")
    if cfg.shape.input_dim != plus.dim:
        raise ShapeError(f"critic input width {cfg.shape.input_dim} does not match measure dimension {plus.dim}")

    init_seq, batch_seq, eval_seq, *restart_seqs = np.random.SeedSequence(cfg.seed).spawn(2 + cfg.restarts)
    if cfg.eval_size is None:
        eval_plus, eval_minus = plus, minus
    else:
        eval_rng = make_rng(eval_seq)
        eval_plus, eval_minus = plus.subsample(cfg.eval_size, eval_rng), minus.subsample(cfg.eval_size, eval_rng)

    best_value = 0.0
    best_critic = MaxoutNet.zeros(cfg.shape, cfg.profile)
    affine = affine_candidate(plus, minus, cfg)
    if affine is not None:
        affine_value = vdc_loss(affine, eval_plus, eval_minus)
        if affine_value > best_value:
            best_value, best_critic = affine_value, affine

    best_records: List[dict] = []
    for restart in range(cfg.restarts):
        if restart == 0:
            critic = warm_start.copy() if warm_start is not None else MaxoutNet.init(cfg.shape, cfg.profile, init_seq)
            batch_rng = make_rng(batch_seq)
        else:
            net_seq, rng_seq = restart_seqs[restart - 1].spawn(2)
            critic = MaxoutNet.init(cfg.shape, cfg.profile, net_seq)
            batch_rng = make_rng(rng_seq)
        value, trained, records = _ascend(plus, minus, eval_plus, eval_minus, critic, cfg, batch_rng)
        if restart == 0:
            best_records = records
        if value > best_value:
            best_value, best_critic, best_records = value, trained, records
        logger.debug(f"Restart {restart + 1}/{cfg.restarts}: best evaluation objective {value:.6f}")

    if best_value == 0.0 and max(r["objective"] for r in best_records) > 0:
        logger.warning("Zero critic beat every trained critic on the evaluation set")
    logger.debug(f"VDC estimate {best_value:.6f} after {cfg.restarts}x{cfg.inner_steps} steps (d={plus.dim})")

    estimate = VdcEstimate(best_value, best_critic, best_records)
    if trace_path:
        estimate.to_csv(trace_path)
    return estimate


def estimate_ct(plus: EmpiricalMeasure, minus: EmpiricalMeasure, cfg: CriticConfig) -> CtEstimate:
    """
    代理 CT 距离：VDC(plus‖minus) + VDC(minus‖plus)，两个方向使用相同的种子，
    因此交换参数得到相同的值。非确定性模式下两个方向在线程池中并行。
    """
    _check_dims(plus, minus)
    if settings.deterministic:
        forward = estimate_vdc(plus, minus, cfg)
        backward = estimate_vdc(minus, plus, cfg)
    else:
        with ThreadPoolExecutor(max_workers=2) as executor:
            forward_job = executor.submit(estimate_vdc, plus, minus, cfg)
            backward_job = executor.submit(estimate_vdc, minus, plus, cfg)
            forward, backward = forward_job.result(), backward_job.result()
    return CtEstimate(d_ct_from_vdc(forward.value, backward.value), forward, backward)


def d_ct_from_vdc(vdc_pm: float, vdc_mp: float) -> float:
    return vdc_pm + vdc_mp


def d_ct_discrepancy(vdc: float, plus: EmpiricalMeasure, minus: EmpiricalMeasure) -> float:
    """D_CT(plus‖minus) = VDC(plus‖minus) + ½(E₊‖x‖² - E₋‖x‖²)"""
    _check_dims(plus, minus)
    _, second_plus = moments(plus)
    _, second_minus = moments(minus)
    return vdc + 0.5 * (second_plus - second_minus)


def gradient_pushforward(critic: MaxoutNet, measure: EmpiricalMeasure) -> EmpiricalMeasure:
    """(∇u)_# μ：点替换为 ∇u(x_i)，权重不变"""
    if critic.input_dim != measure.dim:
        raise ShapeError(f"critic input width {critic.input_dim} does not match measure dimension {measure.dim}")
    grads = critic.input_gradient(measure.points)
    return EmpiricalMeasure.from_points(grads, measure.weights)
