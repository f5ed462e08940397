"""
一维 bump 例子的解析真值

μ₊ 与 μ₋ 由 [-1,1] 上对称、单峰、积分为 1 的密度 η 生成：
- shift(a): μ₊ 密度 η(x-a)，μ₋ 密度 η(x+a)；F(x) = ∫_{-∞}^x (η(y+a) - η(y-a)) dy，G(x) = ∫_0^x F
- scale(a): μ₊ 密度 η(x/a)/a，μ₋ 密度 η；F(x) = ∫_{-∞}^x (η(y) - η(y/a)/a) dy，G(x) = ∫_{-∞}^x F

两种模式中 G 的积分下限不同，各自按定义实现。积分均为梯形公式，网格包含所有不光滑点。
"""
import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Literal, Tuple

import numpy as np
from pydantic import BaseModel, Field

from config import settings

logger = logging.getLogger(__name__)


class BumpKernel(str, Enum):
    EPANECHNIKOV = "epanechnikov"
    TRIANGULAR = "triangular"
    BIWEIGHT = "biweight"


def _density(kernel: BumpKernel, x: np.ndarray) -> np.ndarray:
    inside = np.abs(x) <= 1.0
    if kernel == BumpKernel.EPANECHNIKOV:
        values = 0.75 * (1.0 - x * x)
    elif kernel == BumpKernel.TRIANGULAR:
        values = 1.0 - np.abs(x)
    else:
        values = (15.0 / 16.0) * (1.0 - x * x) ** 2
    return np.where(inside, values, 0.0)


# 闭式量: (E|Y|, Var Y)
_CLOSED_FORMS = {
    BumpKernel.EPANECHNIKOV: (3.0 / 8.0, 1.0 / 5.0),
    BumpKernel.TRIANGULAR: (1.0 / 3.0, 1.0 / 6.0),
    BumpKernel.BIWEIGHT: (5.0 / 16.0, 1.0 / 7.0),
}


class BumpSpec(BaseModel):
    kernel: BumpKernel = Field(BumpKernel.EPANECHNIKOV, description="bump 密度 η")
    points: int = Field(default_factory=lambda: settings.quadrature_points, ge=3, description="梯形积分网格点数")

    def density(self, x) -> np.ndarray:
        return _density(self.kernel, np.asarray(x, dtype=float))

    def mass(self) -> float:
        """模块积分规则下 ∫η，按构造恰为 1（舍入误差以内）"""
        grid, density = _density_table(self.kernel.value, self.points)
        return float(np.trapz(density, grid))

    def second_moment(self) -> float:
        grid, density = _density_table(self.kernel.value, self.points)
        return float(np.trapz(grid * grid * density, grid))

    def closed_form_abs_mean(self) -> float:
        return _CLOSED_FORMS[self.kernel][0]

    def closed_form_variance(self) -> float:
        return _CLOSED_FORMS[self.kernel][1]


class BumpMode(BaseModel):
    kind: Literal["shift", "scale"]
    a: float = Field(..., gt=0, description="平移量或缩放系数 a")

    @classmethod
    def shift(cls, a: float) -> "BumpMode":
        return cls(kind="shift", a=a)

    @classmethod
    def scale(cls, a: float) -> "BumpMode":
        return cls(kind="scale", a=a)


def epanechnikov_cdf(x) -> np.ndarray:
    """Epanechnikov 分布函数 ½ + ¾x - ¼x³（x 截断到 [-1,1]）"""
    t = np.clip(np.asarray(x, dtype=float), -1.0, 1.0)
    return 0.5 + 0.75 * t - 0.25 * t ** 3


def _cumulative_trapezoid(values: np.ndarray, grid: np.ndarray) -> np.ndarray:
    steps = 0.5 * (values[1:] + values[:-1]) * np.diff(grid)
    return np.concatenate([[0.0], np.cumsum(steps)])


@lru_cache(maxsize=32)
def _density_table(kernel: str, points: int) -> Tuple[np.ndarray, np.ndarray]:
    grid = np.linspace(-1.0, 1.0, points)
    density = _density(BumpKernel(kernel), grid)
    # 归一化，使模块自身积分规则下质量为 1
    density = density / np.trapz(density, grid)
    return grid, density


def _aligned_grid(knots, points: int) -> np.ndarray:
    """
    覆盖 [min(knots), max(knots)] 的分段均匀网格，所有 knots 都是网格点，步长约为全长/(points-1)。
    被积函数只在 knots 处不光滑，梯形公式因此保持 O(h²)。
    """
    knots = np.unique(np.asarray(knots, dtype=float))
    step = (knots[-1] - knots[0]) / (points - 1)
    pieces = [
        np.linspace(left, right, max(1, int(round((right - left) / step))) + 1)[:-1]
        for left, right in zip(knots[:-1], knots[1:])
    ]
    return np.concatenate(pieces + [knots[-1:]])


@lru_cache(maxsize=64)
def _bump_table(kernel: str, kind: str, a: float, points: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    kern = BumpKernel(kernel)
    if kind == "shift":
        # 两个密度的支撑端点、峰值位置以及 G 的原点
        grid = _aligned_grid([-1.0 - a, -1.0 + a, 1.0 - a, 1.0 + a, -a, a, 0.0], points)
        minus, plus = _density(kern, grid + a), _density(kern, grid - a)
    else:
        half = max(1.0, a)
        grid = _aligned_grid([-half, -1.0, -a, 0.0, a, 1.0, half], points)
        minus, plus = _density(kern, grid), _density(kern, grid / a) / a
    # 两个分量分别在实际网格上归一化，F(+∞) 在舍入误差内为 0
    diff = minus / np.trapz(minus, grid) - plus / np.trapz(plus, grid)
    F = _cumulative_trapezoid(diff, grid)
    G = _cumulative_trapezoid(F, grid)
    if kind == "shift":
        G = G - G[np.searchsorted(grid, 0.0)]
    for arr in (grid, F, G):
        arr.flags.writeable = False
    return grid, F, G


def bump_F_G(spec: BumpSpec, mode: BumpMode, x) -> Tuple[float, float]:
    """
    F(x) 与 G(x) 的梯形积分值；x 可取 ±inf，网格外 F 为 0、G 取端点值。
    """
    grid, F, G = _bump_table(spec.kernel.value, mode.kind, float(mode.a), spec.points)
    return float(np.interp(x, grid, F)), float(np.interp(x, grid, G))


def analytic_same_variance(spec: BumpSpec, a: float, C: float) -> Tuple[float, float]:
    """平移例子: (VDC, d_CT) = (2C·G(+∞), 4C·G(+∞))"""
    if C <= 0:
        raise ValueError(f"Lipschitz radius must be positive, got {C}")
    if a == 0:
        return 0.0, 0.0
    _, g_inf = bump_F_G(spec, BumpMode.shift(a), np.inf)
    return 2.0 * C * g_inf, 4.0 * C * g_inf


@dataclass
class SameMeanResult:
    vdc_pm: float
    dct_pm: float
    d_ct: float
    degenerate: bool = False


def analytic_same_mean(spec: BumpSpec, a: float, C: float) -> SameMeanResult:
    """
    缩放例子:
    - a < 1: VDC(μ₊‖μ₋) = 2C·G(0)，D_CT(μ₊‖μ₋) = 2C·G(0) - ½(1-a²)∫x²η
    - a > 1: VDC(μ₊‖μ₋) = 0，D_CT(μ₊‖μ₋) = ½(a²-1)∫x²η
    任意 a 下 d_CT = 2C·|G(0)|；a > 1 时 G(0) ≤ 0，取绝对值保证距离非负。
    a = 1 时两个测度相同，返回全零并标记 degenerate。
    """
    if C <= 0:
        raise ValueError(f"Lipschitz radius must be positive, got {C}")
    if a == 1:
        logger.warning("Same-mean example with a=1 compares identical measures")
        return SameMeanResult(0.0, 0.0, 0.0, degenerate=True)
    _, g0 = bump_F_G(spec, BumpMode.scale(a), 0.0)
    second = spec.second_moment()
    if a < 1:
        vdc_pm = 2.0 * C * g0
        dct_pm = vdc_pm - 0.5 * (1.0 - a * a) * second
    else:
        vdc_pm = 0.0
        dct_pm = 0.5 * (a * a - 1.0) * second
    return SameMeanResult(vdc_pm, dct_pm, 2.0 * C * abs(g0))


def sample_bump(spec: BumpSpec, mode: BumpMode, n: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """
    从 (μ₊, μ₋) 各抽取 n 个一维样本，返回两个 (n, 1) 数组。

    η 的样本用逆变换法：在密度表的累积分布上做插值。
    """
    grid, density = _density_table(spec.kernel.value, spec.points)
    cdf = _cumulative_trapezoid(density, grid)
    cdf = cdf / cdf[-1]
    base_plus = np.interp(rng.uniform(size=n), cdf, grid)
    base_minus = np.interp(rng.uniform(size=n), cdf, grid)
    if mode.kind == "shift":
        plus, minus = base_plus + mode.a, base_minus - mode.a
    else:
        plus, minus = mode.a * base_plus, base_minus
    return plus[:, None], minus[:, None]
