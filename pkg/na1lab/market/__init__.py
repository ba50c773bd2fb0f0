"""
市场模型模块
Itô市场 S = A + M 的系数、模拟、二次变差与伊藤积分, 以及模型目录
"""

from na1lab.market.model import (
    MarketModel,
    QuadraticVariation,
    MAX_EXCLUSION_RATE,
    simulate,
    exclusion_rate,
    quadratic_variation,
    stochastic_integral,
)
from na1lab.market.catalog import (
    ModelCatalog,
    ModelCatalogEntry,
    catalog,
    build_model,
    rank_deficient_coefficients,
)

__all__ = [
    "MarketModel",
    "QuadraticVariation",
    "MAX_EXCLUSION_RATE",
    "simulate",
    "exclusion_rate",
    "quadratic_variation",
    "stochastic_integral",
    "ModelCatalog",
    "ModelCatalogEntry",
    "catalog",
    "build_model",
    "rank_deficient_coefficients",
]
