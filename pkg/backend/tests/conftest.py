"""Test fixtures and configuration for pytest."""

import os
import tempfile
from pathlib import Path
from typing import Generator

import numpy as np
import pytest

# Patch settings before importing app modules
_temp_dir = tempfile.mkdtemp()
os.environ["ORBITLAB_LOG_DIR"] = os.path.join(_temp_dir, "logs")
os.environ["ORBITLAB_OUTPUT_DIR"] = os.path.join(_temp_dir, "runs")

from app.core.config import settings
from app.services.measures import MeasureSpec, generic_atomic


@pytest.fixture
def rng() -> np.random.Generator:
    """固定种子的随机数发生器"""
    return np.random.default_rng(settings.seed)


@pytest.fixture
def two_atom() -> MeasureSpec:
    """ν = ½δ₀ + ½δ_{½}"""
    return MeasureSpec.atomic([(0.0, 0.5), (0.5, 0.5)])


@pytest.fixture
def three_atom() -> MeasureSpec:
    return MeasureSpec.atomic([(0.0, 0.2), (0.3, 0.3), (0.7, 0.5)])


@pytest.fixture
def generic_measures() -> list[MeasureSpec]:
    """维数 2..5 的一般位置原子概率测度"""
    return [generic_atomic(n, seed=100 + n) for n in range(2, 6)]


@pytest.fixture
def output_dir(tmp_path: Path) -> Generator[Path, None, None]:
    """把 settings.output_dir 指向临时目录"""
    original = settings.output_dir
    out = tmp_path / "runs"
    settings.output_dir = str(out)
    yield out
    settings.output_dir = original


@pytest.fixture
def client():
    """FastAPI 测试客户端"""
    from fastapi.testclient import TestClient

    from app.main import app

    with TestClient(app) as test_client:
        yield test_client
