"""
局部鞅紧缩因子与计价组合
Y = exp(-∫⟨ρ, dS⟩ + ½∫⟨ρ, cρ⟩dG),  X^{num} = exp(∫⟨ρ, dS⟩ - ½∫⟨ρ, cρ⟩dG)

两者由同一个数组 L = ∫⟨ρ, dS⟩ - ½K 构造: log Y = -L, log X^{num} = L
模型提供闭式 log Y 时 L 取闭式值, 离散 ∫⟨ρ, dS⟩ 记为 L + ½K
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from na1lab.exceptions import PreconditionError, ValidationError
from na1lab.grid.engine import PathBundle, TimeGrid
from na1lab.market.model import CrossingProbability, MarketModel, stochastic_integral
from na1lab.structure.premium import Na1Verdict, RiskPremiumReport


logger = logging.getLogger(__name__)


# Y·X^{num} 与1的最大允许偏差: 两次 exp 与一次乘法的舍入
DUALITY_TOL = 16 * np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class DeflatorPath:
    """
    紧缩因子路径
    values: Y (m, n+1), Y_0 = 1
    integral: 离散 ∫⟨ρ, dS⟩; mass: 离散 ∫⟨ρ, cρ⟩dG
    log_numeraire: L = integral - ½mass
    """

    grid: TimeGrid
    values: np.ndarray = field(repr=False)
    integral: np.ndarray = field(repr=False)
    mass: np.ndarray = field(repr=False)
    log_numeraire: np.ndarray = field(repr=False)

    # 模型未被分类为 NA1_OK 时置位
    flagged: bool = False
    classification: Optional[Na1Verdict] = None

    # 模型给出的桥穿越概率; 缺省按 log Y 的布朗桥近似
    crossing: Optional[CrossingProbability] = field(default=None, repr=False)

    @property
    def paths(self) -> int:
        return int(self.values.shape[0])

    @property
    def terminal(self) -> np.ndarray:
        return self.values[:, -1]

    @property
    def terminal_mean(self) -> float:
        """Ê[Y_T]"""
        return float(np.mean(self.terminal))

    @property
    def terminal_se(self) -> float:
        if self.paths < 2:
            return 0.0
        return float(np.std(self.terminal, ddof=1) / np.sqrt(self.paths))

    @property
    def positive(self) -> bool:
        """所有路径、所有节点上 Y > 0"""
        return bool(np.all(self.values > 0))

    def crossing_probability(self, level: float) -> np.ndarray:
        """
        每一步内 Y 连续穿越 level 的条件概率 (m, n)
        右端点已到达 level 的步记为1
        无模型桥时, log Y 在步内视为方差为 ΔK 的布朗桥:
        p = exp(-2(ℓ - log Y_i)(ℓ - log Y_{i+1}) / ΔK), ℓ = log level
        """
        left, right = self.values[:, :-1], self.values[:, 1:]
        if self.crossing is not None:
            prob = self.crossing(left, right, self.grid.increments, level)
        else:
            bound = np.log(level)
            variance = np.diff(self.mass, axis=1)
            gap = (bound + self.log_numeraire[:, :-1]) * (bound + self.log_numeraire[:, 1:])
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                prob = np.where(variance > 0, np.exp(-2.0 * gap / variance), 0.0)
        return np.where((left >= level) | (right >= level), 1.0, prob)

    def summary(self) -> Dict[str, Any]:
        return {
            "paths": self.paths,
            "terminal_mean": self.terminal_mean,
            "terminal_se": self.terminal_se,
            "strictness": 1.0 - self.terminal_mean,
            "positive": self.positive,
            "flagged": self.flagged,
            "classification": self.classification.value if self.classification else None,
        }


def build_deflator(
    report: RiskPremiumReport,
    bundle: PathBundle,
    model: Optional[MarketModel] = None,
) -> DeflatorPath:
    """
    构造紧缩因子 Y
    结构条件不成立时拒绝(公式无意义); 模型未分类为 NA1_OK 时构造但置位标记

    :param model: 生成 bundle 的模型; 提供闭式 log Y 时使用闭式值, 否则使用左端点和
    """
    if report.grid != bundle.grid or report.paths != bundle.paths:
        raise ValidationError("风险溢价报告与路径束不匹配", "bundle")
    if not report.structure_holds:
        raise PreconditionError(
            f"结构条件不成立(失败路径比例 {report.structure_fail_fraction:.2%}), 无法构造紧缩因子",
            "structure_condition",
        )

    flagged = report.classification is not Na1Verdict.NA1_OK
    if flagged and report.classification is not None:
        logger.warning(f"模型分类为 {report.classification.value}, 紧缩因子仅供参考")

    if model is not None and model.log_deflator is not None:
        log_numeraire = -np.asarray(model.log_deflator(bundle), dtype=float)
        if log_numeraire.shape != report.mass.shape:
            raise ValidationError(f"闭式 log Y 的形状 {log_numeraire.shape} 与路径不符", "log_deflator")
        integral = log_numeraire + 0.5 * report.mass
        logger.debug(f"模型 {model.name}: 使用闭式紧缩因子")
    else:
        integral = stochastic_integral(report.rho, bundle)
        log_numeraire = integral - 0.5 * report.mass
    values = np.exp(-log_numeraire)
    return DeflatorPath(
        grid=bundle.grid,
        values=values,
        integral=integral,
        mass=report.mass,
        log_numeraire=log_numeraire,
        flagged=flagged,
        classification=report.classification,
        crossing=model.deflator_crossing if model is not None else None,
    )


@dataclass(frozen=True, eq=False)
class NumerairePortfolio:
    """计价组合 X^{num} = exp(L) 及其与紧缩因子的对偶检查"""

    values: np.ndarray = field(repr=False)
    deflator: DeflatorPath = field(repr=False)

    @property
    def duality_gap(self) -> float:
        """max |Y·X^{num} - 1|, 浮点乘法的舍入误差"""
        return float(np.max(np.abs(self.deflator.values * self.values - 1.0)))

    @property
    def duality_holds(self) -> bool:
        """每个节点上 |Y·X^{num} - 1| ≤ DUALITY_TOL"""
        return self.duality_gap <= DUALITY_TOL

    def summary(self) -> Dict[str, Any]:
        return {
            "terminal_mean": float(np.mean(self.values[:, -1])),
            "duality_gap": self.duality_gap,
            "duality_holds": self.duality_holds,
        }


def numeraire_portfolio(
    report: RiskPremiumReport,
    bundle: PathBundle,
    deflator: Optional[DeflatorPath] = None,
) -> NumerairePortfolio:
    """
    计价组合: 单位财富持有 ρ (dX = Xρ dS), exponential 格式
    与紧缩因子共用同一个 L
    """
    deflator = deflator if deflator is not None else build_deflator(report, bundle)
    if deflator.flagged:
        raise PreconditionError("计价组合要求模型分类为 NA1_OK", "na1_ok")
    values = np.exp(deflator.log_numeraire)
    return NumerairePortfolio(values=values, deflator=deflator)
