"""
二维生成模型训练

- train_wgan:           WGAN（判别器范数投影 clip 或梯度惩罚 penalty）
- train_dominance_gan:  WGAN + λ·VDC(g_#μ₀‖(g₀)_#μ₀)，Choquet 评估网络为 ICMN
- train_ct_gan:         以代理 CT 距离为损失，两个 ICMN 评估网络

随机流按 SeedSequence.spawn 的固定顺序分配，λ = 0 的占优训练与同种子的 WGAN 训练轨迹逐位相同。
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from choquet.estimators import critic_ascent_step
from choquet.exceptions import ShapeError
from choquet.measures import Sampler
from choquet.models import GanConfig, GpMode, TargetKind
from choquet.net import MaxoutNet, ResidualMaxoutGenerator, add_grads, make_rng, scale_grads
from choquet.opt import AdamState, adam_step, projected_update
from choquet.train.log import TrainLog

logger = logging.getLogger(__name__)


@dataclass
class GanOutcome:
    generator: ResidualMaxoutGenerator
    log: TrainLog
    # 训练结束时的判别器 / 评估网络
    critics: Tuple[MaxoutNet, ...] = field(default_factory=tuple)


def init_generator(cfg: GanConfig, seed) -> ResidualMaxoutGenerator:
    return ResidualMaxoutGenerator.init(cfg.latent_dim, cfg.gen_hidden, cfg.gen_depth, cfg.gen_kernel, cfg.data_dim, seed)


def make_target(cfg: GanConfig) -> Sampler:
    """按配置构造目标采样器，随机流取 SeedSequence(cfg.seed) 的第 6 个子序列"""
    seed = np.random.SeedSequence(cfg.seed).spawn(6)[5]
    if cfg.target == TargetKind.EIGHT_GAUSSIANS:
        return Sampler.eight_gaussians(seed)
    if cfg.target == TargetKind.POINT_CLOUD:
        return Sampler.point_cloud(cfg.target_path, seed)
    return Sampler.swiss_roll(seed)


def _uniform(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def _disc_step(
    disc: MaxoutNet,
    state: AdamState,
    real: np.ndarray,
    fake: np.ndarray,
    cfg: GanConfig,
    interp_rng: np.random.Generator,
) -> Tuple[MaxoutNet, AdamState, float, float]:
    """判别器上升 E_real f - E_fake f - λ_GP·GP，返回 (网络, 状态, Wasserstein 估计, GP)"""
    n = real.shape[0]
    f_real, trace_real = disc.forward_batch(real)
    f_fake, trace_fake = disc.forward_batch(fake)
    wasserstein = float(np.mean(f_real) - np.mean(f_fake))
    grads_real, _ = disc.backward(trace_real, -_uniform(n))
    grads_fake, _ = disc.backward(trace_fake, _uniform(fake.shape[0]))
    grads = add_grads(grads_real, grads_fake)
    gp = 0.0
    if cfg.gp_mode == GpMode.PENALTY:
        t = interp_rng.uniform(size=(n, 1))
        mixed = t * fake + (1.0 - t) * real
        gp, gp_grads = disc.input_gradient_penalty(mixed)
        grads = add_grads(grads, scale_grads(gp_grads, cfg.lam_gp))
    disc, state = projected_update(disc, state, grads)
    return disc, state, wasserstein, gp


def _adversarial_loop(
    target: Sampler,
    cfg: GanConfig,
    baseline: Optional[ResidualMaxoutGenerator] = None,
) -> GanOutcome:
    """
    WGAN 主循环；给出 baseline 时同时训练 Choquet 评估网络 u，
    生成器损失为 -E f(g(Y)) + λ·(E u(g₀(Y)) - E u(g(Y)))，λ = 0 时不加入 VDC 梯度。
    """
    gen_seq, disc_seq, latent_seq, interp_seq, choquet_seq = np.random.SeedSequence(cfg.seed).spawn(5)
    generator = init_generator(cfg, gen_seq)
    disc = MaxoutNet.init(cfg.disc_shape, cfg.disc_profile, disc_seq)
    latent = Sampler.gaussian(cfg.latent_dim, seed=latent_seq)
    interp_rng = make_rng(interp_seq)

    gen_state = AdamState.for_params(generator.params, cfg.lr_gen)
    disc_state = AdamState.for_params(disc.params, cfg.lr_disc)
    choquet = None
    if baseline is not None:
        choquet = MaxoutNet.init(cfg.critic_shape, cfg.critic_profile, choquet_seq)
        choquet_state = AdamState.for_params(choquet.params, cfg.lr_critic)
    reg = cfg.critic_profile.penalty
    weights = _uniform(cfg.batch)

    log = TrainLog(["step", "wasserstein", "gp", "vdc_batch", "vdc", "vdc_reg", "gen_loss"])
    for epoch in range(1, cfg.epochs + 1):
        wasserstein = gp = vdc_batch = vdc = vdc_reg = 0.0
        for _ in range(cfg.critic_epochs):
            z = latent.draw(cfg.batch)
            real = target.draw(cfg.batch)
            fake = generator(z)
            disc, disc_state, wasserstein, gp = _disc_step(disc, disc_state, real, fake, cfg, interp_rng)
            if choquet is not None:
                # VDC(g‖g₀)：plus 为生成样本，minus 为基线样本
                choquet, choquet_state, vdc_batch, vdc_reg = critic_ascent_step(
                    choquet, choquet_state, fake, weights, baseline(z), weights, reg
                )
                # vdc_batch 为批目标原值；零函数可行，VDC 估计取 max(vdc_batch, 0)
                vdc = max(vdc_batch, 0.0)

        z = latent.draw(cfg.batch)
        fake, gen_trace = generator.forward(z)
        f_fake, disc_trace = disc.forward_batch(fake)
        _, upstream = disc.backward(disc_trace, -weights)
        gen_loss = -float(np.mean(f_fake))
        if choquet is not None and cfg.lam > 0:
            u_fake, choquet_trace = choquet.forward_batch(fake)
            _, u_grad = choquet.backward(choquet_trace, -cfg.lam * weights)
            upstream = upstream + u_grad
            gen_loss += cfg.lam * float(np.mean(choquet(baseline(z))) - np.mean(u_fake))
        gen_grads = generator.backward(gen_trace, upstream)
        gen_state, params = adam_step(gen_state, generator.params, gen_grads)
        generator = generator.with_params(params)

        log.append(
            step=epoch, wasserstein=wasserstein, gp=gp, vdc_batch=vdc_batch, vdc=vdc, vdc_reg=vdc_reg, gen_loss=gen_loss
        )
        if epoch % cfg.log_every == 0:
            logger.info(f"Epoch {epoch}/{cfg.epochs}: W={wasserstein:.4f}, gp={gp:.4f}, vdc={vdc:.5f}, gen_loss={gen_loss:.4f}")

    critics = (disc,) if choquet is None else (disc, choquet)
    return GanOutcome(generator=generator, log=log, critics=critics)


def train_wgan(target: Sampler, cfg: GanConfig) -> GanOutcome:
    """普通 WGAN；也用于训练基线生成器 g₀"""
    return _adversarial_loop(target, cfg)


def train_dominance_gan(target: Sampler, baseline: ResidualMaxoutGenerator, cfg: GanConfig) -> GanOutcome:
    if baseline.latent_dim != cfg.latent_dim or baseline.output_dim != cfg.data_dim:
        raise ShapeError(
            f"baseline maps R^{baseline.latent_dim} -> R^{baseline.output_dim}, "
            f"expected R^{cfg.latent_dim} -> R^{cfg.data_dim}"
        )
    return _adversarial_loop(target, cfg, baseline)


def train_ct_gan(target: Sampler, cfg: GanConfig) -> GanOutcome:
    """
    以代理 CT 距离训练生成器：u₁ 上升 VDC(g‖ν)，u₂ 上升 VDC(ν‖g)，
    生成器下降两者之和在新批次上的值。
    """
    gen_seq, first_seq, second_seq, latent_seq = np.random.SeedSequence(cfg.seed).spawn(4)
    generator = init_generator(cfg, gen_seq)
    first = MaxoutNet.init(cfg.critic_shape, cfg.critic_profile, first_seq)
    second = MaxoutNet.init(cfg.critic_shape, cfg.critic_profile, second_seq)
    latent = Sampler.gaussian(cfg.latent_dim, seed=latent_seq)

    gen_state = AdamState.for_params(generator.params, cfg.lr_gen)
    first_state = AdamState.for_params(first.params, cfg.lr_critic)
    second_state = AdamState.for_params(second.params, cfg.lr_critic)
    reg = cfg.critic_profile.penalty
    weights = _uniform(cfg.batch)

    log = TrainLog(["step", "vdc_gen_target", "vdc_target_gen", "ct"])
    for epoch in range(1, cfg.epochs + 1):
        for _ in range(cfg.critic_epochs):
            fake = generator(latent.draw(cfg.batch))
            real = target.draw(cfg.batch)
            first, first_state, _, _ = critic_ascent_step(first, first_state, fake, weights, real, weights, reg)
            second, second_state, _, _ = critic_ascent_step(second, second_state, real, weights, fake, weights, reg)

        fake, gen_trace = generator.forward(latent.draw(cfg.batch))
        real = target.draw(cfg.batch)
        u1_fake, trace1 = first.forward_batch(fake)
        u2_fake, trace2 = second.forward_batch(fake)
        vdc_gen_target = float(np.mean(first(real)) - np.mean(u1_fake))
        vdc_target_gen = float(np.mean(u2_fake) - np.mean(second(real)))
        # ∂ct/∂g_n = (-∇u₁ + ∇u₂)/n
        _, grad1 = first.backward(trace1, -weights)
        _, grad2 = second.backward(trace2, weights)
        gen_grads = generator.backward(gen_trace, grad1 + grad2)
        gen_state, params = adam_step(gen_state, generator.params, gen_grads)
        generator = generator.with_params(params)

        ct = vdc_gen_target + vdc_target_gen
        log.append(step=epoch, vdc_gen_target=vdc_gen_target, vdc_target_gen=vdc_target_gen, ct=ct)
        if epoch % cfg.log_every == 0:
            logger.info(f"Epoch {epoch}/{cfg.epochs}: ct={ct:.5f} ({vdc_gen_target:.5f} + {vdc_target_gen:.5f})")

    return GanOutcome(generator=generator, log=log, critics=(first, second))
