"""
代理 CT 距离的经验收敛速率

μ 为 [-1,1]^d 上的均匀分布，用 N 个样本的 μ_N 代替总体；对每个 n 计算 d_CT(μ_N, μ_n) 在多次试验上的均值，
并拟合 log-log 斜率（理论值 -1/2）。各次试验的种子由 SeedSequence.spawn 得到，在线程池中并行。
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import pandas as pd

from choquet.estimators import estimate_ct
from choquet.measures import Sampler, sample_batch
from choquet.models import ConstraintProfile, CriticConfig, LipschitzKind, RatesConfig
from config import settings

logger = logging.getLogger(__name__)


@dataclass
class RateResult:
    # 列: n, mean, median, std
    table: pd.DataFrame
    slope: float
    # 列: n, trial, estimate
    raw: pd.DataFrame


def fit_loglog_slope(n_values, estimates) -> float:
    """log(estimate) 对 log(n) 的最小二乘斜率；非正的估计截断到 1e-12"""
    x = np.log(np.asarray(n_values, dtype=float))
    y = np.log(np.maximum(np.asarray(estimates, dtype=float), 1e-12))
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def rate_experiment(cfg: RatesConfig) -> RateResult:
    reference_seq, *trial_seqs = np.random.SeedSequence(cfg.seed).spawn(1 + len(cfg.n_grid) * cfg.trials)
    box = np.ones(cfg.dim)
    reference = sample_batch(Sampler.uniform(-box, box, reference_seq), cfg.reference_size)
    critic_cfg = CriticConfig(
        shape=cfg.shape,
        profile=ConstraintProfile(lipschitz=LipschitzKind.HARD),
        lr=cfg.lr,
        inner_steps=cfg.inner_steps,
        batch_size=cfg.batch_size,
        eval_every=cfg.eval_every,
        seed=cfg.seed,
    )
    jobs = [(n, trial) for n in cfg.n_grid for trial in range(cfg.trials)]

    def run(job_index: int) -> float:
        n, trial = jobs[job_index]
        sample = sample_batch(Sampler.uniform(-box, box, trial_seqs[job_index]), n)
        value = estimate_ct(reference, sample, critic_cfg).value
        logger.debug(f"n={n} trial={trial}: d_CT estimate {value:.5f}")
        return value

    workers = 1 if settings.deterministic else settings.max_workers
    with ThreadPoolExecutor(max_workers=workers) as executor:
        values = list(executor.map(run, range(len(jobs))))

    raw = pd.DataFrame({"n": [n for n, _ in jobs], "trial": [t for _, t in jobs], "estimate": values})
    table = raw.groupby("n", sort=True)["estimate"].agg(["mean", "median", "std"]).reset_index()
    slope = fit_loglog_slope(table["n"], table["mean"])
    logger.info(f"Rate experiment finished: slope={slope:.3f} over n={list(cfg.n_grid)}")
    return RateResult(table=table, slope=slope, raw=raw)
