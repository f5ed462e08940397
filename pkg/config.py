from pydantic.v1 import BaseSettings


class Settings(BaseSettings):

    output_dir: str = "output"
    log_level: str = "INFO"
    # 确定性模式下批量任务串行执行，归约顺序固定
    deterministic: bool = True
    max_workers: int = 4

    # Lipschitz 球 K 的默认半径 C
    lipschitz_radius: float = 1.0

    # 一维 bump 积分的梯形网格点数 (2^16 + 1)
    quadrature_points: int = 65537

    lp_max_atoms: int = 64
    lp_tolerance: float = 1e-10

    eight_gaussians_radius: float = 2.0
    eight_gaussians_sigma: float = 0.02
    swiss_roll_noise: float = 0.1
    swiss_roll_half_width: float = 2.0

    # 收敛速率实验中代替总体 μ 的参考样本量 (2^15)
    rate_reference_size: int = 32768

    class Config:
        env_file = ".env"

settings = Settings()
