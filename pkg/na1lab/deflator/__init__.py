"""
紧缩因子实验模块
紧缩因子 Y、财富过程、计价组合、鞅检验与局部化质量分解
"""

from na1lab.deflator.deflator import (
    DeflatorPath,
    NumerairePortfolio,
    build_deflator,
    numeraire_portfolio,
)
from na1lab.deflator.wealth import (
    StrategyKind,
    StrategySpec,
    WealthPaths,
    constant_strategy,
    log_growth,
    random_fractional_strategies,
    wealth,
)
from na1lab.deflator.testing import (
    MartingaleSamples,
    MartingaleTestReport,
    SupermartingaleCheck,
    checkpoint_indices,
    deflated_wealth_check,
    martingale_test,
)
from na1lab.deflator.localization import (
    LocalizationSamples,
    LocalizationSchedule,
    MeasureSplit,
    first_passage,
    localization_demo,
    survival_trend,
)

__all__ = [
    "DeflatorPath",
    "NumerairePortfolio",
    "build_deflator",
    "numeraire_portfolio",
    "StrategyKind",
    "StrategySpec",
    "WealthPaths",
    "constant_strategy",
    "log_growth",
    "random_fractional_strategies",
    "wealth",
    "MartingaleSamples",
    "MartingaleTestReport",
    "SupermartingaleCheck",
    "checkpoint_indices",
    "deflated_wealth_check",
    "martingale_test",
    "LocalizationSamples",
    "LocalizationSchedule",
    "MeasureSplit",
    "first_passage",
    "localization_demo",
    "survival_trend",
]
