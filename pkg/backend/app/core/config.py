from pathlib import Path

from pydantic_settings import BaseSettings


BASE_DIR = Path(__file__).resolve().parents[2]


class Settings(BaseSettings):
    app_name: str = "orbitlab"
    debug: bool = False
    log_level: str = "INFO"
    log_dir: str = str(BASE_DIR / "data" / "logs")
    output_dir: str = str(BASE_DIR / "data" / "runs")
    cors_origins: list[str] = ["http://localhost:3000", "http://127.0.0.1:3000"]

    # 伪随机测试向量的默认种子（64 位）
    seed: int = 20240917

    # 容差
    arithmetic_tol: float = 1e-10
    hermitian_tol: float = 1e-12
    unit_tol: float = 1e-9
    parseval_tol: float = 1e-6
    eigen_floor: float = 1e-10
    stable_rel: float = 1e-3
    a2_stable_rel: float = 1e-2
    rm_slope_tol: float = 0.02
    inconclusive_slope: float = -0.01
    condition_limit: float = 1e8

    # 规模上限
    max_cantor_level: int = 12
    default_horizon: int = 200
    max_horizon: int = 16384
    recursion_horizon_cap: int = 4096
    default_trials: int = 8
    default_depth: int = 10
    test_cells: int = 16
    default_cells: int = 1024
    rm_cells: int = 4096
    max_scan_cells: int = 16384
    eps_grid: list[float] = [0.1, 0.25, 0.5, 1.0]

    class Config:
        env_prefix = "ORBITLAB_"


settings = Settings()
