"""
财富族与 NUPBR 检验
{X_T : X ∈ 𝒳(1)} 依概率有界 ⟺ NA₁
对按倍数 k 索引的财富族估计 P[X^k_T > M], 判断是否依概率无界
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Sequence, Tuple

import numpy as np
import pandas as pd

from na1lab.exceptions import PreconditionError, ValidationError


logger = logging.getLogger(__name__)


UNBOUNDED_LEVEL = 0.9
BOUNDED_LEVEL = 0.05

# 单调性检查允许的二项标准误倍数
MONOTONE_SLACK = 2.0

DEFAULT_THRESHOLDS = (1.5, 3.5)


class NupbrVerdict(str, Enum):
    """NUPBR 检验结果"""

    BOUNDED = "BOUNDED"
    UNBOUNDED = "UNBOUNDED"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True, eq=False)
class WealthFamily:
    """
    财富族
    terminal: X^k_T (m, K); minimum: 各路径上 min_t X^k_t (m, K)
    """

    scales: Tuple[float, ...]
    terminal: np.ndarray = field(repr=False)
    minimum: np.ndarray = field(repr=False)
    initial: float = 1.0
    label: str = ""

    def __post_init__(self):
        if self.terminal.ndim != 2 or self.terminal.shape[1] != len(self.scales):
            raise ValidationError(
                f"终值矩阵形状 {self.terminal.shape} 与倍数数量 {len(self.scales)} 不一致", "terminal"
            )

    @property
    def size(self) -> int:
        return len(self.scales)

    @property
    def paths(self) -> int:
        return int(self.terminal.shape[0])

    def quantiles(self, q: float = 0.5) -> np.ndarray:
        return np.quantile(self.terminal, q, axis=0)

    @classmethod
    def concat(cls, parts: Sequence["WealthFamily"]) -> "WealthFamily":
        """按路径拼接分块计算的财富族"""
        if not parts:
            raise ValidationError("没有可拼接的财富族", "parts")
        first = parts[0]
        if any(p.scales != first.scales or p.initial != first.initial for p in parts):
            raise ValidationError("财富族的倍数或初始资本不一致", "parts")
        return cls(
            scales=first.scales,
            terminal=np.concatenate([p.terminal for p in parts]),
            minimum=np.concatenate([p.minimum for p in parts]),
            initial=first.initial,
            label=first.label,
        )


@dataclass(frozen=True, eq=False)
class NupbrReport:
    """P̂[X^k_T > M] 矩阵与判定"""

    scales: Tuple[float, ...]
    thresholds: Tuple[float, ...]
    probabilities: np.ndarray = field(repr=False)
    ses: np.ndarray = field(repr=False)
    verdict: NupbrVerdict = NupbrVerdict.INCONCLUSIVE

    def to_frame(self) -> pd.DataFrame:
        """(k, M, P̂) 表"""
        rows = []
        for i, k in enumerate(self.scales):
            for j, level in enumerate(self.thresholds):
                rows.append({"k": k, "M": level, "p": self.probabilities[i, j], "se": self.ses[i, j]})
        return pd.DataFrame(rows, columns=["k", "M", "p", "se"])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "verdict": self.verdict.value,
            "scales": list(self.scales),
            "thresholds": list(self.thresholds),
            "largest_scale_probabilities": self.probabilities[-1].tolist(),
        }


def unboundedness_test(family: WealthFamily, thresholds: Sequence[float] = DEFAULT_THRESHOLDS) -> NupbrReport:
    """
    依概率无界检验
    UNBOUNDED: 对每个 M, P̂ 随 k 不减(允许 2 个二项标准误)且最大 k 处 > 0.9
    BOUNDED:   sup_k P̂[X^k_T > M_max] < 0.05
    其他为 INCONCLUSIVE
    """
    if family.size < 3:
        raise ValidationError(f"财富族至少需要3个成员: {family.size}", "family", family.size)
    thresholds = tuple(sorted(float(level) for level in thresholds))
    if not thresholds:
        raise ValidationError("阈值列表不能为空", "thresholds")
    if family.initial != 1.0:
        raise PreconditionError(f"财富族必须从1出发: {family.initial}", "unit_capital")
    if np.any(family.minimum < 0):
        raise PreconditionError("财富族存在负财富路径", "nonnegative_wealth")

    m = family.paths
    probabilities = np.stack([(family.terminal > level).mean(axis=0) for level in thresholds], axis=1)
    ses = np.sqrt(probabilities * (1.0 - probabilities) / m)

    slack = MONOTONE_SLACK * np.maximum(ses[:-1], ses[1:])
    monotone = bool(np.all(probabilities[1:] >= probabilities[:-1] - slack))
    if monotone and bool(np.all(probabilities[-1] > UNBOUNDED_LEVEL)):
        verdict = NupbrVerdict.UNBOUNDED
    elif float(probabilities[:, -1].max()) < BOUNDED_LEVEL:
        verdict = NupbrVerdict.BOUNDED
    else:
        verdict = NupbrVerdict.INCONCLUSIVE
    logger.info(f"NUPBR 检验({family.label}): {verdict.value}")
    return NupbrReport(
        scales=family.scales,
        thresholds=thresholds,
        probabilities=probabilities,
        ses=ses,
        verdict=verdict,
    )
