"""
Choquet 序与凸随机序学习

该包提供输入凸 maxout 网络 (ICMN)、代理 VDC / CT 距离估计、
一维解析与线性规划真值，以及组合优化和二维生成模型的训练流程。
"""

from choquet.estimators import (
    CtEstimate,
    VdcEstimate,
    affine_candidate,
    d_ct_discrepancy,
    d_ct_from_vdc,
    estimate_ct,
    estimate_vdc,
    gradient_pushforward,
    vdc_loss,
)
from choquet.exceptions import ChoquetError, MeasureFormatError, ProfileError, ShapeError
from choquet.measures import EmpiricalMeasure, Sampler, from_csv
from choquet.models import ConstraintProfile, CriticConfig, LipschitzKind, NetShape, ProfileMode
from choquet.net import MaxoutNet, ResidualMaxoutGenerator
