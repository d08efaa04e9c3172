# 测试公共配置

import os
import sys

import numpy as np
import pytest

# Add project root to Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from field_estimation.field import grid_basis  # noqa: E402
from field_estimation.models import AreaOfInterest, CostParams, ScenarioConfig  # noqa: E402

RUN_SLOW = os.getenv("FIELD_ESTIMATION_RUN_SLOW") == "1"


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: 基准规模的统计/计时测试，设置 FIELD_ESTIMATION_RUN_SLOW=1 时运行")


def pytest_collection_modifyitems(config, items):
    if RUN_SLOW:
        return
    skip_slow = pytest.mark.skip(reason="需要 FIELD_ESTIMATION_RUN_SLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def area():
    return AreaOfInterest()


@pytest.fixture
def params():
    return CostParams()


@pytest.fixture
def basis(area):
    """4x4 网格基，sigma = 25"""
    return grid_basis(area, 4, 25.0)


@pytest.fixture
def small_scenario():
    """小规模场景：p = 4，步数少，保证测试速度"""
    return ScenarioConfig(
        seed=7,
        steps=60,
        basis={'per_axis': 2, 'length_scale': 40.0},
        eval_grid={'resolution': 8},
    )
