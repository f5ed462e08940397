from enum import Enum
from typing import List, Literal, Optional

from pydantic import BaseModel, Field, model_validator

from config import settings


class ProfileMode(str, Enum):
    UNCONSTRAINED = "unconstrained"
    INPUT_CONVEX = "input_convex"
    INPUT_CONVEX_DECREASING = "input_convex_decreasing"


class LipschitzKind(str, Enum):
    SOFT = "soft"
    HARD = "hard"


class GpMode(str, Enum):
    CLIP = "clip"
    PENALTY = "penalty"


class TargetKind(str, Enum):
    SWISS_ROLL = "swiss_roll"
    EIGHT_GAUSSIANS = "eight_gaussians"
    POINT_CLOUD = "point_cloud"


class NetShape(BaseModel):
    """
    Maxout 网络形状

    depth 为 L，widths 为 (m_1, ..., m_L)，其中 m_1 等于输入维度 d，kernel 为每个单元的仿射片数 k。
    """
    depth: int = Field(..., ge=2, description="网络深度 L")
    widths: List[int] = Field(..., description="各层宽度 (m_1, ..., m_L)")
    kernel: int = Field(..., ge=1, description="maxout 核大小 k")

    @model_validator(mode="after")
    def _check_widths(self):
        if len(self.widths) != self.depth:
            raise ValueError(f"widths has {len(self.widths)} entries, expected depth={self.depth}")
        if any(m < 1 for m in self.widths):
            raise ValueError(f"all widths must be positive, got {self.widths}")
        return self

    @property
    def input_dim(self) -> int:
        return self.widths[0]

    @classmethod
    def uniform(cls, input_dim: int, hidden: int, depth: int, kernel: int) -> "NetShape":
        """输入宽度为 input_dim、其余各层宽度相同的形状"""
        return cls(depth=depth, widths=[input_dim] + [hidden] * (depth - 1), kernel=kernel)


class ConstraintProfile(BaseModel):
    """
    约束模式

    mode 决定权重符号约束；lipschitz 为 soft 时用 reg (λ_{u,reg}) 惩罚输出平方，
    为 hard 时把隐藏层权重向量投影到单位球、输出向量 a 投影到半径 radius (C) 的球内。
    """
    mode: ProfileMode = Field(ProfileMode.INPUT_CONVEX, description="符号约束模式")
    lipschitz: LipschitzKind = Field(LipschitzKind.HARD, description="Lipschitz 控制方式")
    radius: float = Field(default_factory=lambda: settings.lipschitz_radius, gt=0, description="hard 模式下的半径 C")
    reg: float = Field(0.0, ge=0, description="soft 模式下的输出平方惩罚系数 λ_{u,reg}")

    @property
    def is_convex(self) -> bool:
        return self.mode in (ProfileMode.INPUT_CONVEX, ProfileMode.INPUT_CONVEX_DECREASING)

    @property
    def is_hard(self) -> bool:
        return self.lipschitz == LipschitzKind.HARD

    @property
    def penalty(self) -> float:
        """实际生效的输出平方惩罚系数，hard 模式下为 0"""
        return 0.0 if self.is_hard else self.reg


class CriticConfig(BaseModel):
    """VDC / CT 估计中内层最大化的配置"""
    shape: NetShape = Field(default_factory=lambda: NetShape.uniform(1, 16, 3, 4), description="评估网络形状")
    profile: ConstraintProfile = Field(default_factory=ConstraintProfile, description="评估网络约束")
    lr: float = Field(5e-3, gt=0, description="评估网络 Adam 学习率")
    inner_steps: int = Field(1000, ge=1, description="内层上升步数")
    batch_size: Optional[int] = Field(None, ge=1, description="训练批大小，None 表示使用整个测度")
    eval_every: int = Field(10, ge=1, description="每隔多少步在评估批上计算一次目标")
    eval_size: Optional[int] = Field(None, ge=1, description="固定评估批大小，None 表示使用整个测度")
    restarts: int = Field(1, ge=1, description="从不同初始化重复上升的次数，取最好值")
    seed: int = Field(0, description="随机种子")

    @model_validator(mode="after")
    def _check_profile(self):
        if not self.profile.is_convex:
            raise ValueError(f"critic profile must be input convex, got {self.profile.mode.value}")
        return self

    def for_dim(self, dim: int) -> "CriticConfig":
        """把网络输入宽度替换为 dim，其余保持不变"""
        widths = [dim] + list(self.shape.widths[1:])
        return self.model_copy(update={"shape": NetShape(depth=self.shape.depth, widths=widths, kernel=self.shape.kernel)})


class PortfolioConfig(BaseModel):
    """二阶随机占优约束下的组合优化配置"""
    lam: float = Field(1.0, ge=0, description="占优惩罚权重 λ")
    z_init: float = Field(1.0, description="z 的初值")
    z_low: float = Field(1.0, description="z 下界")
    z_high: float = Field(2.0, description="z 上界")
    lr_z: float = Field(1e-3, ge=0, description="z 的学习率")
    lr_critic: float = Field(1e-3, gt=0, description="评估网络学习率")
    critic_reg: float = Field(1.0, ge=0, description="评估网络输出平方惩罚 λ_{u,reg}")
    batch: int = Field(512, ge=1, description="批大小")
    steps: int = Field(5000, ge=0, description="z 的更新步数")
    critic_steps: int = Field(1, ge=1, description="每次 z 更新前的评估网络步数")
    critic_widths: List[int] = Field(default_factory=lambda: [1, 32, 32], description="递减 ICMN 的各层宽度")
    critic_kernel: int = Field(4, ge=1, description="评估网络 maxout 核大小")
    eval_batch: int = Field(512, ge=1, description="最终评估批大小")
    log_every: int = Field(500, ge=1, description="日志间隔")
    seed: int = Field(0, description="随机种子")

    @model_validator(mode="after")
    def _check_bounds(self):
        if self.z_low > self.z_high:
            raise ValueError(f"z bounds out of order: [{self.z_low}, {self.z_high}]")
        if len(self.critic_widths) < 2 or self.critic_widths[0] != 1:
            raise ValueError("critic_widths must start with input width 1 and have depth >= 2")
        return self

    @property
    def critic_shape(self) -> NetShape:
        return NetShape(depth=len(self.critic_widths), widths=self.critic_widths, kernel=self.critic_kernel)


class GanConfig(BaseModel):
    """二维生成模型训练配置 (CT 距离 GAN 与带占优约束的 WGAN 共用)"""
    data_dim: int = Field(2, ge=1, description="数据维度")
    latent_dim: int = Field(32, ge=1, description="隐变量维度")
    gen_hidden: int = Field(32, ge=1, description="生成器隐藏宽度")
    gen_depth: int = Field(10, ge=2, description="生成器全连接层数（含输出层）")
    gen_kernel: int = Field(2, ge=1, description="生成器 maxout 核大小")
    critic_hidden: int = Field(32, ge=1, description="Choquet 评估网络隐藏宽度")
    critic_depth: int = Field(5, ge=2, description="Choquet 评估网络深度 L")
    critic_kernel: int = Field(2, ge=1, description="Choquet 评估网络 maxout 核大小")
    critic_lipschitz: LipschitzKind = Field(LipschitzKind.SOFT, description="Choquet 评估网络的 Lipschitz 控制方式，soft 时 lam_reg 生效")
    critic_radius: float = Field(1.0, gt=0, description="hard 模式半径 C")
    disc_hidden: int = Field(32, ge=1, description="WGAN 判别器隐藏宽度")
    disc_depth: int = Field(4, ge=2, description="WGAN 判别器深度")
    disc_kernel: int = Field(2, ge=1, description="WGAN 判别器 maxout 核大小")
    lam: float = Field(10.0, ge=0, description="VDC 惩罚权重 λ")
    lam_gp: float = Field(10.0, ge=0, description="梯度惩罚权重 λ_GP")
    lam_reg: float = Field(10.0, ge=0, description="Choquet 评估网络输出平方惩罚 λ_{u,reg}")
    lr_gen: float = Field(5e-4, gt=0, description="生成器学习率")
    lr_critic: float = Field(1e-4, gt=0, description="Choquet 评估网络学习率")
    lr_disc: float = Field(1e-4, gt=0, description="判别器学习率")
    epochs: int = Field(2000, ge=0, description="生成器更新次数")
    critic_epochs: int = Field(5, ge=1, description="每次生成器更新前的评估网络步数")
    batch: int = Field(512, ge=1, description="批大小")
    gp_mode: GpMode = Field(GpMode.CLIP, description="梯度约束方式")
    target: TargetKind = Field(TargetKind.SWISS_ROLL, description="目标分布")
    target_path: Optional[str] = Field(None, description="target=point_cloud 时的点云 CSV 路径")
    baseline_path: Optional[str] = Field(None, description="基线生成器 JSON 路径，为空时先训练一个基线")
    baseline_epochs: int = Field(200, ge=0, description="现训基线生成器的更新次数（刻意欠训练）")
    eval_samples: int = Field(2048, ge=1, description="评估时的样本数")
    log_every: int = Field(100, ge=1, description="日志间隔")
    seed: int = Field(0, description="随机种子")

    @model_validator(mode="after")
    def _check_target(self):
        if self.target == TargetKind.POINT_CLOUD and not self.target_path:
            raise ValueError("target_path is required when target=point_cloud")
        return self

    @property
    def critic_shape(self) -> NetShape:
        return NetShape.uniform(self.data_dim, self.critic_hidden, self.critic_depth, self.critic_kernel)

    @property
    def critic_profile(self) -> ConstraintProfile:
        return ConstraintProfile(
            mode=ProfileMode.INPUT_CONVEX,
            lipschitz=self.critic_lipschitz,
            radius=self.critic_radius,
            reg=self.lam_reg,
        )

    @property
    def disc_shape(self) -> NetShape:
        return NetShape.uniform(self.data_dim, self.disc_hidden, self.disc_depth, self.disc_kernel)

    @property
    def disc_profile(self) -> ConstraintProfile:
        # clip 模式通过范数投影控制 Lipschitz 常数，penalty 模式不做投影
        if self.gp_mode == GpMode.CLIP:
            return ConstraintProfile(mode=ProfileMode.UNCONSTRAINED, lipschitz=LipschitzKind.HARD, radius=1.0)
        return ConstraintProfile(mode=ProfileMode.UNCONSTRAINED, lipschitz=LipschitzKind.SOFT, reg=0.0)


class RatesConfig(BaseModel):
    """经验收敛速率实验配置"""
    dim: int = Field(2, ge=1, description="数据维度 d")
    hidden: int = Field(16, ge=1, description="评估网络隐藏宽度")
    depth: int = Field(3, ge=2, description="评估网络深度")
    kernel: int = Field(4, ge=1, description="maxout 核大小")
    n_grid: List[int] = Field(default_factory=lambda: [64, 128, 256, 512, 1024, 2048, 4096], description="样本量网格")
    trials: int = Field(5, ge=1, description="重复次数")
    reference_size: int = Field(default_factory=lambda: settings.rate_reference_size, ge=1, description="参考样本量 N")
    inner_steps: int = Field(300, ge=1, description="评估网络上升步数")
    lr: float = Field(1e-2, gt=0, description="评估网络学习率")
    batch_size: int = Field(1024, ge=1, description="评估网络训练批大小")
    eval_every: int = Field(25, ge=1, description="评估间隔")
    seed: int = Field(0, description="随机种子")

    @model_validator(mode="after")
    def _check_grid(self):
        if not self.n_grid or any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ValueError(f"n_grid must be strictly increasing, got {self.n_grid}")
        return self

    @property
    def shape(self) -> NetShape:
        return NetShape.uniform(self.dim, self.hidden, self.depth, self.kernel)


class OracleCheckConfig(BaseModel):
    """解析/线性规划真值核对配置"""
    kernel: Literal["epanechnikov", "triangular", "biweight"] = Field("epanechnikov", description="bump 密度名称")
    shift: float = Field(0.3, ge=0, description="同方差例子的平移 a")
    scale: float = Field(0.5, gt=0, description="同均值例子的缩放 a")
    radius: float = Field(1.0, gt=0, description="Lipschitz 半径 C")
    lp_instances: int = Field(10, ge=0, description="随机离散实例个数")
    lp_atoms: int = Field(6, ge=1, description="每个随机实例的原子数")
    seed: int = Field(0, description="随机种子")


class VdcRunConfig(BaseModel):
    """两份点云之间的 VDC / CT 估计配置"""
    plus_path: str = Field(..., description="μ₊ 点云 CSV 路径")
    minus_path: str = Field(..., description="μ₋ 点云 CSV 路径")
    hidden: int = Field(16, ge=1, description="评估网络隐藏宽度")
    depth: int = Field(3, ge=2, description="评估网络深度")
    kernel: int = Field(4, ge=1, description="maxout 核大小")
    lipschitz: LipschitzKind = Field(LipschitzKind.HARD, description="Lipschitz 控制方式")
    radius: float = Field(1.0, gt=0, description="hard 模式半径 C")
    reg: float = Field(1.0, ge=0, description="soft 模式输出平方惩罚")
    lr: float = Field(5e-3, gt=0, description="学习率")
    inner_steps: int = Field(1000, ge=1, description="上升步数")
    batch_size: Optional[int] = Field(None, ge=1, description="批大小")
    seed: int = Field(0, description="随机种子")

    def critic_config(self, dim: int) -> CriticConfig:
        return CriticConfig(
            shape=NetShape.uniform(dim, self.hidden, self.depth, self.kernel),
            profile=ConstraintProfile(lipschitz=self.lipschitz, radius=self.radius, reg=self.reg),
            lr=self.lr,
            inner_steps=self.inner_steps,
            batch_size=self.batch_size,
            seed=self.seed,
        )
