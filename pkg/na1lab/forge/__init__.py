"""
套利构造模块
结构失败时的核方向套利、质量发散时的截断杠杆阶梯, 以及 NUPBR 检验
"""

from na1lab.forge.family import (
    DEFAULT_THRESHOLDS,
    NupbrReport,
    NupbrVerdict,
    WealthFamily,
    unboundedness_test,
)
from na1lab.forge.kernel import KernelStrategy, kernel_direction, scaled_drift_arbitrage
from na1lab.forge.ladder import DEFAULT_SCALES, LeverageLadder, truncated_leverage

__all__ = [
    "DEFAULT_THRESHOLDS",
    "NupbrReport",
    "NupbrVerdict",
    "WealthFamily",
    "unboundedness_test",
    "KernelStrategy",
    "kernel_direction",
    "scaled_drift_arbitrage",
    "DEFAULT_SCALES",
    "LeverageLadder",
    "truncated_leverage",
]
