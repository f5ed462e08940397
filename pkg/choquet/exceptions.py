class ChoquetError(Exception):
    """本项目所有异常的基类"""


class ShapeError(ChoquetError, ValueError):
    """维度或参数结构不匹配"""


class MeasureFormatError(ChoquetError, ValueError):
    """点云文件或经验测度格式错误，消息中带 1 起始的行号"""


class ProfileError(ChoquetError, ValueError):
    """评估网络的约束模式不满足要求（例如需要输入凸网络）"""


class LpInfeasibleError(ChoquetError, RuntimeError):
    """线性规划无可行解"""


class LpUnboundedError(ChoquetError, RuntimeError):
    """线性规划目标无界"""
