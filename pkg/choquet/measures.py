"""
概率测度工具：经验测度、采样器、CSV 点云读取、组合优化基准与评估统计量
"""
import io
import logging
import os
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from choquet.exceptions import MeasureFormatError, ShapeError
from choquet.net import make_rng
from config import settings

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EmpiricalMeasure:
    """
    R^d 上的加权点集

    points 形状 (n, d)，weights 非负且和为 1，lower/upper 为支撑盒 Ω 的逐轴上下界。
    构造后数组只读，可以在线程间共享。
    """
    points: np.ndarray
    weights: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        points = np.array(self.points, dtype=float)
        weights = np.array(self.weights, dtype=float)
        if points.ndim != 2 or points.shape[0] == 0:
            raise ShapeError(f"points must be a non-empty (n, d) matrix, got shape {points.shape}")
        if weights.shape != (points.shape[0],):
            raise ShapeError(f"weights has shape {weights.shape}, expected ({points.shape[0]},)")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise MeasureFormatError(f"weights must be non-negative and sum to 1, got sum {weights.sum():.15g}")
        lower = np.array(self.lower, dtype=float)
        upper = np.array(self.upper, dtype=float)
        if np.any(points < lower) or np.any(points > upper):
            raise MeasureFormatError("points lie outside the support box")
        for name, value in (("points", points), ("weights", weights), ("lower", lower), ("upper", upper)):
            value.flags.writeable = False
            object.__setattr__(self, name, value)

    @classmethod
    def from_points(cls, points, weights=None, lower=None, upper=None) -> "EmpiricalMeasure":
        """权重归一化；未给出支撑盒时取逐轴最小/最大值"""
        arr = np.asarray(points, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        n = arr.shape[0]
        if n == 0:
            raise ShapeError("cannot build a measure from zero points")
        if weights is None:
            w = np.full(n, 1.0 / n)
        else:
            w = np.asarray(weights, dtype=float)
            if np.any(w < 0) or w.sum() <= 0:
                raise MeasureFormatError("weights must be non-negative with positive total mass")
            w = w / w.sum()
        lo = arr.min(axis=0) if lower is None else np.asarray(lower, dtype=float)
        hi = arr.max(axis=0) if upper is None else np.asarray(upper, dtype=float)
        return cls(arr, w, lo, hi)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def subsample(self, n: int, rng: np.random.Generator) -> "EmpiricalMeasure":
        """按权重抽取 n 个点（n 不超过支撑点数时不放回），结果为均匀权重"""
        replace = n > self.size
        idx = rng.choice(self.size, size=n, replace=replace, p=self.weights)
        return EmpiricalMeasure.from_points(self.points[idx])

    def union_support(self, other: "EmpiricalMeasure") -> np.ndarray:
        """一维测度支撑点的并集，升序"""
        if self.dim != 1 or other.dim != 1:
            raise ShapeError(f"union_support needs 1D measures, got d={self.dim} and d={other.dim}")
        return np.unique(np.concatenate([self.points[:, 0], other.points[:, 0]]))

    def mass_at(self, atoms: np.ndarray) -> np.ndarray:
        """一维测度在给定升序原子上的质量，重复的点会合并"""
        pos = np.searchsorted(atoms, self.points[:, 0])
        return np.bincount(pos, weights=self.weights, minlength=atoms.shape[0])

    def to_csv(self, path: str):
        pd.DataFrame(self.points).to_csv(path, header=False, index=False, float_format="%.10g")


def discrete_measure(atoms: Sequence[float], weights: Optional[Sequence[float]] = None) -> EmpiricalMeasure:
    """一维离散测度 Σ w_i δ_{atoms_i}"""
    return EmpiricalMeasure.from_points(np.asarray(atoms, dtype=float).reshape(-1, 1), weights)


def mean_preserving_spread(center: EmpiricalMeasure, spread: float, rng: Optional[np.random.Generator] = None) -> Tuple[EmpiricalMeasure, EmpiricalMeasure]:
    """
    把每个原子 x 对称地拆成 x ± spread·e，各占一半质量，得到 (center, 扩散后的测度)。

    e 为随机单位方向（未给出 rng 时取第一个坐标轴）；扩散后的测度在 Choquet 序下占优原测度。
    """
    if spread < 0:
        raise ValueError(f"spread must be non-negative, got {spread}")
    n, d = center.points.shape
    if rng is None:
        directions = np.zeros((n, d))
        directions[:, 0] = 1.0
    else:
        directions = rng.standard_normal((n, d))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    points = np.concatenate([center.points + spread * directions, center.points - spread * directions])
    weights = np.concatenate([center.weights, center.weights]) / 2.0
    return center, EmpiricalMeasure.from_points(points, weights)


# ----------------------------------------------------------------------
# CSV
# ----------------------------------------------------------------------
def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def from_csv(path: str) -> EmpiricalMeasure:
    """
    读取逗号分隔的点云文件，每行一个点，首行表头可选。

    表头判定：首行所有单元格都不是数字时视为表头。错误信息中的行号为文件中的 1 起始行号。
    """
    if not os.path.exists(path):
        raise MeasureFormatError(f"point cloud file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        numbered = [(lineno, line.strip()) for lineno, line in enumerate(fh, start=1) if line.strip()]
    if not numbered:
        raise MeasureFormatError(f"{path}: file is empty")

    first_cells = [cell.strip() for cell in numbered[0][1].split(",")]
    if not any(_is_number(cell) for cell in first_cells):
        numbered = numbered[1:]
        if not numbered:
            raise MeasureFormatError(f"{path}: file has a header but no data rows")

    width = len(numbered[0][1].split(","))
    for lineno, line in numbered:
        if len(line.split(",")) != width:
            raise MeasureFormatError(f"{path}: line {lineno} has {len(line.split(','))} fields, expected {width}")

    frame = pd.read_csv(io.StringIO("\n".join(line for _, line in numbered)), header=None, dtype=str)
    values = frame.apply(lambda col: pd.to_numeric(col.str.strip(), errors="coerce"))
    bad_rows = np.flatnonzero(values.isna().any(axis=1).to_numpy())
    if bad_rows.size:
        lineno, line = numbered[bad_rows[0]]
        raise MeasureFormatError(f"{path}: line {lineno} has a non-numeric cell: {line!r}")
    logger.debug(f"Loaded {len(values)} points of dimension {width} from {path}")
    return EmpiricalMeasure.from_points(values.to_numpy(dtype=float))


# ----------------------------------------------------------------------
# 采样器
# ----------------------------------------------------------------------
class Sampler:
    """
    带独立随机状态的采样器。kind 取值:
    uniform / gaussian / gaussian_mixture / swiss_roll / point_cloud / pushforward / portfolio

    同一 seed 得到相同的样本流；每个线程应持有自己的采样器。
    """

    def __init__(self, kind: str, draw: Callable[[np.random.Generator, int], np.ndarray], rng: np.random.Generator, dim: int):
        self.kind = kind
        self._draw = draw
        self.rng = rng
        self.dim = dim

    def draw(self, n: int) -> np.ndarray:
        if n < 1:
            raise ValueError(f"sample size must be >= 1, got {n}")
        return self._draw(self.rng, n)

    def __repr__(self):
        return f"Sampler(kind={self.kind!r}, dim={self.dim})"

    @classmethod
    def uniform(cls, lower, upper, seed=0) -> "Sampler":
        lo = np.atleast_1d(np.asarray(lower, dtype=float))
        hi = np.atleast_1d(np.asarray(upper, dtype=float))
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ValueError(f"invalid box [{lo}, {hi}]")
        return cls("uniform", lambda rng, n: rng.uniform(lo, hi, size=(n, lo.shape[0])), make_rng(seed), lo.shape[0])

    @classmethod
    def portfolio(cls, seed=0) -> "Sampler":
        """组合优化中的收益因子 ξ ~ U[0, 1]"""
        sampler = cls.uniform([0.0], [1.0], seed)
        sampler.kind = "portfolio"
        return sampler

    @classmethod
    def gaussian(cls, dim: int, sigma: float = 1.0, mean=None, seed=0) -> "Sampler":
        center = np.zeros(dim) if mean is None else np.asarray(mean, dtype=float)
        return cls("gaussian", lambda rng, n: center + sigma * rng.standard_normal((n, dim)), make_rng(seed), dim)

    @classmethod
    def gaussian_mixture(cls, means, sigma: float, seed=0) -> "Sampler":
        centers = np.asarray(means, dtype=float)

        def draw(rng, n):
            component = rng.integers(0, centers.shape[0], size=n)
            return centers[component] + sigma * rng.standard_normal((n, centers.shape[1]))

        return cls("gaussian_mixture", draw, make_rng(seed), centers.shape[1])

    @classmethod
    def eight_gaussians(cls, seed=0, radius: Optional[float] = None, sigma: Optional[float] = None) -> "Sampler":
        """半径 radius 的圆上等距分布的 8 个高斯分量"""
        radius = settings.eight_gaussians_radius if radius is None else radius
        sigma = settings.eight_gaussians_sigma if sigma is None else sigma
        sampler = cls.gaussian_mixture(eight_gaussian_means(radius), sigma, seed)
        sampler.kind = "eight_gaussians"
        return sampler

    @classmethod
    def swiss_roll(cls, seed=0, noise: Optional[float] = None, half_width: Optional[float] = None) -> "Sampler":
        """
        二维瑞士卷: t ~ U[1.5π, 4.5π]，点 (t cos t, t sin t) 加 N(0, noise²) 噪声后整体缩放，
        使无噪声螺线落在 [-half_width, half_width]^2 内
        """
        noise = settings.swiss_roll_noise if noise is None else noise
        half_width = settings.swiss_roll_half_width if half_width is None else half_width
        scale = half_width / (4.5 * np.pi)

        def draw(rng, n):
            t = 1.5 * np.pi * (1.0 + 2.0 * rng.uniform(size=n))
            spiral = np.stack([t * np.cos(t), t * np.sin(t)], axis=1)
            return scale * (spiral + noise * rng.standard_normal((n, 2)))

        return cls("swiss_roll", draw, make_rng(seed), 2)

    @classmethod
    def point_cloud(cls, path: str, seed=0) -> "Sampler":
        """从 CSV 点云中按权重有放回抽样"""
        cloud = from_csv(path)

        def draw(rng, n):
            idx = rng.choice(cloud.size, size=n, replace=True, p=cloud.weights)
            return cloud.points[idx]

        return cls("point_cloud", draw, make_rng(seed), cloud.dim)

    @classmethod
    def pushforward(cls, generator, base: "Sampler") -> "Sampler":
        """g_# μ_0：用 base 的随机状态抽取隐变量，再经生成器前向映射"""
        output_dim = getattr(generator, "output_dim", base.dim)
        return cls("pushforward", lambda rng, n: np.asarray(generator(base.draw(n))), base.rng, output_dim)


def eight_gaussian_means(radius: float) -> np.ndarray:
    angles = np.arange(8) * (2.0 * np.pi / 8)
    return radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)


def sample_batch(sampler: Sampler, n: int) -> EmpiricalMeasure:
    """n 个独立样本构成的均匀权重经验测度"""
    return EmpiricalMeasure.from_points(sampler.draw(n))


# ----------------------------------------------------------------------
# 基准组合与统计量
# ----------------------------------------------------------------------
def benchmark_staircase(xi):
    """
    基准组合 G_1(ξ)：ξ ∈ [0.05i, 0.05(i+1)) 时取 i/20，ξ = 1 时取 1。
    支持标量或数组输入。
    """
    arr = np.asarray(xi, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("benchmark_staircase is defined on [0, 1]")
    levels = np.floor(arr * 20.0) / 20.0
    if arr.ndim == 0:
        return float(levels)
    return levels


def moments(measure: EmpiricalMeasure) -> Tuple[np.ndarray, float]:
    """加权均值与加权二阶矩 Σ w_i ‖x_i‖²"""
    mean = measure.weights @ measure.points
    second = float(measure.weights @ np.einsum("nd,nd->n", measure.points, measure.points))
    return mean, second


def _mean_pair_distance(x: np.ndarray, wx: np.ndarray, y: np.ndarray, wy: np.ndarray, chunk: int = 1024) -> float:
    total = 0.0
    for start in range(0, x.shape[0], chunk):
        block = x[start:start + chunk]
        dist = np.sqrt(np.sum((block[:, None, :] - y[None, :, :]) ** 2, axis=2))
        total += float(wx[start:start + chunk] @ dist @ wy)
    return total


def energy_distance(a: EmpiricalMeasure, b: EmpiricalMeasure) -> float:
    """2E‖X-Y‖ - E‖X-X'‖ - E‖Y-Y'‖，对所有点对加权求和；舍入误差导致的负值截断为 0"""
    if a.dim != b.dim:
        raise ShapeError(f"dimension mismatch: {a.dim} vs {b.dim}")
    cross = _mean_pair_distance(a.points, a.weights, b.points, b.weights)
    within_a = _mean_pair_distance(a.points, a.weights, a.points, a.weights)
    within_b = _mean_pair_distance(b.points, b.weights, b.points, b.weights)
    return max(2.0 * cross - within_a - within_b, 0.0)
