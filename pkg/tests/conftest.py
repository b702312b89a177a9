"""
测试公用夹具
"""

import sys
from pathlib import Path

import pytest

# 添加项目根目录到Python路径
PROJECT_ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

from config.settings import settings  # noqa: E402
from src.core.polyring import parse_polynomial  # noqa: E402


@pytest.fixture
def fermat_quartic():
    return parse_polynomial("x0^4 + x1^4 - x2^4 - x3^4")


@pytest.fixture
def fermat_quintic():
    return parse_polynomial("x0^5 + x1^5 - x2^5 - x3^5")


@pytest.fixture
def split_quadric():
    return parse_polynomial("x0*x3 - x1*x2")


@pytest.fixture
def unit_sphere():
    return parse_polynomial("t1^2 + t2^2 + t3^2 - 3")


@pytest.fixture
def affine_quartic():
    return parse_polynomial("t1^4 + t2^4 + t3^4 - 1")


@pytest.fixture
def isolated_settings():
    """测试期间修改的配置项在结束后恢复"""
    snapshot = dict(vars(settings))
    yield settings
    for key in list(vars(settings)):
        if key not in snapshot:
            delattr(settings, key)
    for key, value in snapshot.items():
        setattr(settings, key, value)
