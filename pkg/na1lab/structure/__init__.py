"""
结构条件模块
风险溢价 ρ = c†a、质量泛函 K_T 与 NA₁ 分类
"""

from na1lab.structure.premium import (
    DEFAULT_RANK_TOL,
    STRUCTURE_EPS,
    STRUCTURE_FAIL_FRACTION,
    Na1Verdict,
    RiskPremiumReport,
    pseudo_solve,
    risk_premium,
    scan_bundle,
)
from na1lab.structure.classify import (
    GROWTH_FACTOR,
    DIVERGENCE_ETA,
    DivergenceDiagnostics,
    Na1Classification,
    classify_na1,
    decide_verdict,
    level_strides,
    mass_ratio,
)

__all__ = [
    "DEFAULT_RANK_TOL",
    "STRUCTURE_EPS",
    "STRUCTURE_FAIL_FRACTION",
    "Na1Verdict",
    "RiskPremiumReport",
    "pseudo_solve",
    "risk_premium",
    "scan_bundle",
    "GROWTH_FACTOR",
    "DIVERGENCE_ETA",
    "DivergenceDiagnostics",
    "Na1Classification",
    "classify_na1",
    "decide_verdict",
    "level_strides",
    "mass_ratio",
]
