from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

# 让 src/ 可被 import（与根目录 main.py 的做法一致）
ROOT = Path(__file__).resolve().parents[1]
SRC = ROOT / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from posgoods.config_loader import AppConfig  # noqa: E402
from posgoods.core import distributions as D  # noqa: E402


@pytest.fixture
def uniform01():
    return D.uniform(0.0, 1.0)


@pytest.fixture
def exp1():
    return D.exponential(1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def small_config(tmp_path) -> AppConfig:
    """缩小规模的配置，单个检查在几秒内完成。"""
    return AppConfig.model_validate({
        "project": {"root_path": str(tmp_path)},
        "verify": {
            "battery": ["uniform(0,1)"],
            "oracle_dists": ["uniform(0,1)"],
            "ic_K": 50,
            "oracle_K": 400,
            "exhaustive_K": 12,
            "exhaustive_levels": 3,
            "chain_steps": 6,
            "chains": 2,
            "menus": 10,
        },
    })
