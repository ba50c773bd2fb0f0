"""
na1lab - 第一类无套利(NA₁)实验工具包
对连续路径 Itô 市场模型按 NA₁ 判据分类, 构造并检验局部鞅紧缩因子,
演示有限可加测度的正则/奇异分解, 在判据不成立时显式构造第一类套利,
并用有限树上的精确判定作为对照

遵循SOLID原则设计:
- 单一职责原则(SRP): 每个子包专注于一类计算
- 开闭原则(OCP): 模型目录与命令可注册扩展
- 依赖倒置原则(DIP): 命令只依赖配置与子包的公开接口
"""

__version__ = "1.0.0"
__author__ = "na1lab Team"

from na1lab.config import ExperimentConfig
from na1lab.exceptions import (
    Na1Error,
    ConfigError,
    ValidationError,
    ModelError,
    NumericalError,
    PreconditionError,
    TreeError,
)

# 市场模型与结构条件
from na1lab.market import MarketModel, build_model, catalog, simulate
from na1lab.structure import Na1Verdict, classify_na1, risk_premium

# 紧缩因子与套利构造
from na1lab.deflator import build_deflator, localization_demo, martingale_test, numeraire_portfolio
from na1lab.forge import kernel_direction, scaled_drift_arbitrage, truncated_leverage, unboundedness_test

# 有限树
from na1lab.tree import TreeModel, deflator_feasibility, deflated_martingale_check

__all__ = [
    "__version__",
    "ExperimentConfig",
    # 异常
    "Na1Error",
    "ConfigError",
    "ValidationError",
    "ModelError",
    "NumericalError",
    "PreconditionError",
    "TreeError",
    # 模型
    "MarketModel",
    "build_model",
    "catalog",
    "simulate",
    "Na1Verdict",
    "classify_na1",
    "risk_premium",
    # 紧缩因子
    "build_deflator",
    "localization_demo",
    "martingale_test",
    "numeraire_portfolio",
    # 套利
    "kernel_direction",
    "scaled_drift_arbitrage",
    "truncated_leverage",
    "unboundedness_test",
    # 树
    "TreeModel",
    "deflator_feasibility",
    "deflated_martingale_check",
]
