"""
二阶随机占优约束下的组合优化

ξ ~ U[0,1]，基准组合 G_1 为阶梯函数，待优化组合 G(ξ; z) = zξ，1 ≤ z ≤ 2。
把约束松弛为惩罚项后得到 min-max 问题：

    min_z  -E[zξ] + λ · VDC_{递减 ICMN}(ν‖μ_z),   ν = L(G_1(ξ)), μ_z = L(zξ)

评估网络在递减凸网络集合上做投影上升，z 做 Adam 下降并截断到 [z_low, z_high]。
"""
import logging
from dataclasses import dataclass

import numpy as np

from choquet.estimators import critic_ascent_step, estimate_vdc
from choquet.measures import EmpiricalMeasure, Sampler, benchmark_staircase
from choquet.models import ConstraintProfile, CriticConfig, LipschitzKind, PortfolioConfig, ProfileMode
from choquet.net import MaxoutNet
from choquet.opt import AdamState, adam_step, clamp_scalar
from choquet.train.log import TrainLog

logger = logging.getLogger(__name__)


@dataclass
class PortfolioOutcome:
    z_final: float
    log: TrainLog
    critic: MaxoutNet
    # 新抽取的评估批上的平均收益
    mean_return: float
    benchmark_mean: float
    # z_final 处重新估计的 VDC(ν‖μ_z)
    penalty: float


def _critic_profile(cfg: PortfolioConfig) -> ConstraintProfile:
    return ConstraintProfile(
        mode=ProfileMode.INPUT_CONVEX_DECREASING,
        lipschitz=LipschitzKind.SOFT,
        reg=cfg.critic_reg,
    )


def train_portfolio(cfg: PortfolioConfig, penalty_steps: int = 300) -> PortfolioOutcome:
    critic_seq, train_seq, eval_seq = np.random.SeedSequence(cfg.seed).spawn(3)
    sampler = Sampler.portfolio(train_seq)
    critic = MaxoutNet.init(cfg.critic_shape, _critic_profile(cfg), critic_seq)
    critic_state = AdamState.for_params(critic.params, cfg.lr_critic)
    z_params = {"z": np.array([cfg.z_init])}
    z_state = AdamState.for_params(z_params, cfg.lr_z)
    z = clamp_scalar(cfg.z_init, cfg.z_low, cfg.z_high)
    reg = cfg.critic_reg

    log = TrainLog(["step", "z", "expected_return", "penalty", "regularizer", "loss"])
    for step in range(1, cfg.steps + 1):
        xi = sampler.draw(cfg.batch)
        weights = np.full(cfg.batch, 1.0 / cfg.batch)
        benchmark = benchmark_staircase(xi)
        for _ in range(cfg.critic_steps):
            # VDC(ν‖μ_z)：plus 为基准 ν，minus 为 μ_z
            critic, critic_state, penalty, regularizer = critic_ascent_step(
                critic, critic_state, benchmark, weights, z * xi, weights, reg
            )

        # d/dz [-E zξ + λ E u(zξ)] = E[ξ (λ u'(zξ) - 1)]
        slopes = critic.input_gradient(z * xi)[:, 0]
        grad_z = float(np.mean(xi[:, 0] * (cfg.lam * slopes - 1.0)))
        z_state, z_params = adam_step(z_state, {"z": np.array([z])}, {"z": np.array([grad_z])})
        z = clamp_scalar(float(z_params["z"][0]), cfg.z_low, cfg.z_high)

        expected_return = float(np.mean(z * xi))
        log.append(
            step=step,
            z=z,
            expected_return=expected_return,
            penalty=penalty,
            regularizer=regularizer,
            loss=-expected_return + cfg.lam * penalty,
        )
        if step % cfg.log_every == 0:
            logger.info(f"Step {step}/{cfg.steps}: z={z:.4f}, return={expected_return:.4f}, penalty={penalty:.5f}")

    eval_sampler = Sampler.portfolio(eval_seq)
    xi = eval_sampler.draw(cfg.eval_batch)
    mean_return = float(np.mean(z * xi))
    benchmark_points = benchmark_staircase(xi)
    benchmark_mean = float(np.mean(benchmark_points))

    penalty_cfg = CriticConfig(
        shape=cfg.critic_shape,
        profile=ConstraintProfile(mode=ProfileMode.INPUT_CONVEX_DECREASING, lipschitz=LipschitzKind.HARD),
        lr=5e-3,
        inner_steps=penalty_steps,
        seed=cfg.seed,
    )
    final_penalty = estimate_vdc(
        EmpiricalMeasure.from_points(benchmark_points),
        EmpiricalMeasure.from_points(z * xi),
        penalty_cfg,
    ).value
    logger.info(
        f"Portfolio finished: z={z:.4f}, mean return={mean_return:.4f}, "
        f"benchmark mean={benchmark_mean:.4f}, penalty={final_penalty:.5f}"
    )
    return PortfolioOutcome(
        z_final=z,
        log=log,
        critic=critic,
        mean_return=mean_return,
        benchmark_mean=benchmark_mean,
        penalty=final_penalty,
    )
