"""
有限树模块
离散时间有限状态模型上的精确判定, 作为模拟结果的对照
"""

from na1lab.tree.builders import (
    bessel_tree,
    binomial_tree,
    martingale_process,
    random_measure,
    random_process,
    random_tree,
)
from na1lab.tree.model import TreeMeasure, TreeModel, TreeNode, close, format_number, parse_number
from na1lab.tree.oracle import (
    MAX_CUTS,
    FeasibilityResult,
    FingerprintTable,
    PatchingResult,
    DeflatedMartingaleResult,
    WealthMartingaleResult,
    SeparatingResult,
    TreeStopping,
    TreeStrategy,
    count_stopping_times,
    deflator_feasibility,
    enumerate_stopping_times,
    exact_martingale_check,
    find_one_step_arbitrage,
    martingale_by_enumeration,
    no_arbitrage_by_search,
    one_step_weights,
    patching_consistency,
    additivity_fingerprint,
    deflated_martingale_check,
    wealth_martingale_check,
    separating_check,
    stopped_expectation,
)

__all__ = [
    "bessel_tree",
    "binomial_tree",
    "martingale_process",
    "random_measure",
    "random_process",
    "random_tree",
    "TreeMeasure",
    "TreeModel",
    "TreeNode",
    "close",
    "format_number",
    "parse_number",
    "MAX_CUTS",
    "FeasibilityResult",
    "FingerprintTable",
    "PatchingResult",
    "DeflatedMartingaleResult",
    "WealthMartingaleResult",
    "SeparatingResult",
    "TreeStopping",
    "TreeStrategy",
    "count_stopping_times",
    "deflator_feasibility",
    "enumerate_stopping_times",
    "exact_martingale_check",
    "find_one_step_arbitrage",
    "martingale_by_enumeration",
    "no_arbitrage_by_search",
    "one_step_weights",
    "patching_consistency",
    "additivity_fingerprint",
    "deflated_martingale_check",
    "wealth_martingale_check",
    "separating_check",
    "stopped_expectation",
]
