"""
截断杠杆阶梯
π^k = ρ 1{|ρ| ≤ k}, 财富 dX^k = X^k π^k dS, 采用 exponential 格式:
    log X^k_T = ∫⟨π^k, dS⟩ - ½E^k_T,  E^k_T = Σ⟨ρ, cρ⟩1{|ρ| ≤ k}Δt
结构条件成立时 ⟨π^k, a⟩ = ⟨π^k, cπ^k⟩, 因此 log X^k_T = +½E^k_T + ∫π^k dM,
质量发散时 log X^k_T / E^k_T → ½, 财富族依概率无界
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from na1lab.exceptions import PreconditionError, ValidationError
from na1lab.forge.family import WealthFamily
from na1lab.grid.engine import PathBundle
from na1lab.market.model import stochastic_integral
from na1lab.structure.premium import RiskPremiumReport


logger = logging.getLogger(__name__)


DEFAULT_SCALES = (1.0, 4.0, 16.0, 64.0, 256.0, 1024.0)


@dataclass(frozen=True, eq=False)
class LeverageLadder:
    """
    杠杆阶梯
    truncated_mass: E^k_T (m, K); log_wealth: log X^k_T (m, K)
    ratio_median: 各层 median(log X^k_T / E^k_T), 跳过的层为 NaN
    """

    levels: Tuple[float, ...]
    truncated_mass: np.ndarray = field(repr=False)
    log_wealth: np.ndarray = field(repr=False)
    ratio_median: np.ndarray = field(repr=False)
    skipped: Tuple[float, ...] = ()
    family: Optional[WealthFamily] = field(default=None, repr=False)

    @property
    def mass_monotone(self) -> bool:
        """E^k_T 逐路径随 k 不减"""
        return bool(np.all(np.diff(self.truncated_mass, axis=1) >= 0))

    @property
    def positive(self) -> bool:
        return bool(np.all(self.family.minimum > 0))

    def rows(self) -> List[Dict[str, Any]]:
        out = []
        for i, k in enumerate(self.levels):
            out.append(
                {
                    "k": k,
                    "mass_median": float(np.median(self.truncated_mass[:, i])),
                    "log_wealth_median": float(np.median(self.log_wealth[:, i])),
                    "ratio_median": float(self.ratio_median[i]),
                    "skipped": k in self.skipped,
                }
            )
        return out

    @classmethod
    def concat(cls, parts: Sequence["LeverageLadder"]) -> "LeverageLadder":
        """按路径拼接分块构造的阶梯, 中位数在拼接后重新计算"""
        if not parts:
            raise ValidationError("没有可拼接的杠杆阶梯", "parts")
        if any(p.levels != parts[0].levels for p in parts):
            raise ValidationError("杠杆阶梯的截断水平不一致", "parts")
        return _assemble(
            parts[0].levels,
            np.concatenate([p.truncated_mass for p in parts]),
            np.concatenate([p.log_wealth for p in parts]),
            np.concatenate([p.family.minimum for p in parts]),
        )


def _assemble(levels: Tuple[float, ...], masses: np.ndarray, logs: np.ndarray, minima: np.ndarray) -> LeverageLadder:
    medians, skipped = [], []
    for i, k in enumerate(levels):
        positive = masses[:, i] > 0
        if not positive.any():
            skipped.append(k)
            medians.append(np.nan)
            logger.debug(f"截断水平 k={k}: E^k_T 全为0, 跳过")
            continue
        medians.append(float(np.median(logs[positive, i] / masses[positive, i])))
    family = WealthFamily(scales=levels, terminal=np.exp(logs), minimum=minima, label="leverage")
    return LeverageLadder(
        levels=levels,
        truncated_mass=masses,
        log_wealth=logs,
        ratio_median=np.asarray(medians, dtype=float),
        skipped=tuple(skipped),
        family=family,
    )


def truncated_leverage(
    report: RiskPremiumReport,
    bundle: PathBundle,
    levels: Sequence[float] = DEFAULT_SCALES,
) -> LeverageLadder:
    """
    构造截断杠杆阶梯
    :param report: 风险溢价报告(结构条件必须成立)
    :param bundle: 同一批 S 路径
    :param levels: 截断水平 k, 升序
    """
    levels = tuple(float(k) for k in levels)
    if not levels or any(k <= 0 for k in levels) or any(b <= a for a, b in zip(levels[:-1], levels[1:])):
        raise ValidationError(f"截断水平必须为正且严格递增: {levels}", "levels", levels)
    if report.grid != bundle.grid or report.paths != bundle.paths:
        raise ValidationError("风险溢价报告与路径束不匹配", "bundle")
    if not report.structure_holds:
        raise PreconditionError("结构条件不成立, 请使用核方向套利", "structure_condition")

    dt = bundle.grid.increments
    size = np.linalg.norm(report.rho, axis=2)
    weighted = report.density * dt[None, :]

    masses, logs, minima = [], [], []
    for k in levels:
        keep = size <= k
        pi = np.where(keep[:, :, None], report.rho, 0.0)
        mass = np.zeros((bundle.paths, bundle.grid.steps + 1))
        mass[:, 1:] = np.cumsum(np.where(keep, weighted, 0.0), axis=1)
        log_path = stochastic_integral(pi, bundle) - 0.5 * mass
        terminal_mass = mass[:, -1]
        masses.append(terminal_mass)
        logs.append(log_path[:, -1])
        minima.append(np.exp(log_path.min(axis=1)))

    ladder = _assemble(levels, np.stack(masses, axis=1), np.stack(logs, axis=1), np.stack(minima, axis=1))
    logger.info(f"杠杆阶梯: {len(levels)} 层, 跳过 {len(ladder.skipped)} 层")
    return ladder
