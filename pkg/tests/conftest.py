"""
共享测试夹具
"""

import pytest

from na1lab.grid.engine import make_grid
from na1lab.market.catalog import build_model
from na1lab.market.model import simulate
from na1lab.structure.premium import risk_premium


@pytest.fixture
def unit_grid():
    """T=1, n=100 的均匀网格"""
    return make_grid(1.0, 100)


@pytest.fixture
def bs_model():
    return build_model("black-scholes")


@pytest.fixture
def bs_bundle(bs_model, unit_grid):
    return simulate(bs_model, unit_grid, 2000, seed=11)


@pytest.fixture
def bs_report(bs_model, bs_bundle):
    return risk_premium(bs_model, bs_bundle)
