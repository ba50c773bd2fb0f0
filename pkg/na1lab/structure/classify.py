"""
NA₁ 分类
在同一批路径的多个加密层级上计算 K_T, 通过加密增长判断质量泛函是否发散

判定顺序:
1. 最细网格上 ∫‖r‖²dt 超过结构容差的路径比例 > 1%  -> STRUCTURE_FAIL
2. 相邻层级 median K_T 之比全部 ≥ γ, 或(≥3层时)各层增量都超过 η(1+K_0)
   且增量不衰减(d_{l+1} ≥ d_l/γ)                    -> MASS_DIVERGES
3. 相邻比值全部落在 [1/γ, γ] 内                     -> NA1_OK
4. 其他                                             -> INCONCLUSIVE
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from na1lab.exceptions import NumericalError, ValidationError
from na1lab.grid.engine import TimeGrid, chunk_ranges
from na1lab.market.model import MAX_EXCLUSION_RATE, MarketModel, simulate
from na1lab.structure.premium import (
    DEFAULT_RANK_TOL,
    STRUCTURE_EPS,
    STRUCTURE_FAIL_FRACTION,
    Na1Verdict,
    scan_bundle,
)


logger = logging.getLogger(__name__)


GROWTH_FACTOR = 1.5
DIVERGENCE_ETA = 0.05
DEFAULT_REFINEMENT = 10
DEFAULT_LEVELS = 3

# 两层 K 都低于该值时视为同为0, 比值记为1
MASS_FLOOR = 1e-12

# 每个路径块最多容纳的数组单元数 (m * (n+1) * d)
CHUNK_CELLS = 1 << 22


@dataclass(frozen=True)
class DivergenceDiagnostics:
    """各加密层级的质量泛函诊断"""

    steps: Tuple[int, ...]
    median_mass: Tuple[float, ...]
    ratios: Tuple[float, ...]
    increments: Tuple[float, ...]
    structure_fail_fraction: float
    exclusion_rate: float
    excluded: int
    rule: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "steps": list(self.steps),
            "median_mass": list(self.median_mass),
            "ratios": list(self.ratios),
            "increments": list(self.increments),
            "structure_fail_fraction": self.structure_fail_fraction,
            "exclusion_rate": self.exclusion_rate,
            "excluded": self.excluded,
            "rule": self.rule,
        }


@dataclass(frozen=True)
class Na1Classification:
    """分类结果"""

    verdict: Na1Verdict
    diagnostics: DivergenceDiagnostics

    def to_dict(self) -> Dict[str, Any]:
        return {"classification": self.verdict.value, "diagnostics": self.diagnostics.to_dict()}


def mass_ratio(previous: float, current: float, floor: float = MASS_FLOOR) -> float:
    """相邻层级比值 K_{l+1}/K_l"""
    if previous <= floor:
        return 1.0 if current <= floor else float("inf")
    return current / previous


def decide_verdict(
    medians: Sequence[float],
    fail_fraction: float,
    growth: float = GROWTH_FACTOR,
    eta: float = DIVERGENCE_ETA,
) -> Tuple[Na1Verdict, Optional[str]]:
    """
    由各层 median K_T 与结构失败比例给出判定
    :return: (判定, 触发的规则名)
    """
    if len(medians) < 2:
        raise ValidationError(f"至少需要2个加密层级: {len(medians)}", "levels", len(medians))
    if fail_fraction > STRUCTURE_FAIL_FRACTION:
        return Na1Verdict.STRUCTURE_FAIL, "structure"

    ratios = [mass_ratio(a, b) for a, b in zip(medians[:-1], medians[1:])]
    if all(r >= growth for r in ratios):
        return Na1Verdict.MASS_DIVERGES, "ratio"

    increments = [b - a for a, b in zip(medians[:-1], medians[1:])]
    if len(medians) >= 3:
        floor = eta * (1.0 + medians[0])
        steady = all(inc > floor for inc in increments)
        sustained = all(nxt >= prev / growth for prev, nxt in zip(increments[:-1], increments[1:]))
        if steady and sustained:
            return Na1Verdict.MASS_DIVERGES, "increment"

    if all(1.0 / growth <= r <= growth for r in ratios):
        return Na1Verdict.NA1_OK, "stable"
    return Na1Verdict.INCONCLUSIVE, None


def _auto_chunk(grid: TimeGrid, dim: int) -> int:
    return max(1, CHUNK_CELLS // ((grid.steps + 1) * max(dim, 3)))


def level_strides(grid: TimeGrid, levels: int, factor: int) -> List[int]:
    """
    各层级相对 grid 的抽取步长, 从最粗到最细
    grid.steps 必须能被 factor^(levels-1) 整除
    """
    if levels < 2:
        raise ValidationError(f"加密层级数必须 ≥ 2: {levels}", "levels", levels)
    if isinstance(factor, bool) or not isinstance(factor, (int, np.integer)) or factor < 2:
        raise ValidationError(f"加密倍数必须是 ≥ 2 的整数: {factor}", "factor", factor)
    span = int(factor) ** (levels - 1)
    if grid.steps % span != 0:
        raise ValidationError(
            f"步数 {grid.steps} 不能被 factor^(levels-1)={span} 整除", "factor", factor
        )
    return [int(factor) ** (levels - 1 - level) for level in range(levels)]


def classify_na1(
    model: MarketModel,
    grid: TimeGrid,
    paths: int,
    seed: int,
    levels: int = DEFAULT_LEVELS,
    factor: int = DEFAULT_REFINEMENT,
    tol: float = DEFAULT_RANK_TOL,
    workers: int = 1,
    chunk: int = 4096,
    chunk_paths: Optional[int] = None,
) -> Na1Classification:
    """
    NA₁ 分类
    grid 为最细层级; 较粗层级每隔 factor^k 个节点抽取, 各层级使用同一批路径

    :param model: 市场模型
    :param grid: 最细网格
    :param paths: 路径数
    :param seed: 主种子
    :param levels: 加密层级数 L ≥ 2
    :param factor: 相邻层级的加密倍数
    :param chunk_paths: 每次模拟的路径数, 缺省按内存估算
    """
    strides = level_strides(grid, levels, factor)
    block = chunk_paths or _auto_chunk(grid, model.dim)

    terminal: List[List[np.ndarray]] = [[] for _ in range(levels)]
    failures: List[np.ndarray] = []
    excluded = 0
    for start, stop in chunk_ranges(paths, block):
        bundle = simulate(model, grid, stop - start, seed, first_stream=start, workers=workers, chunk=chunk)
        excluded += bundle.excluded
        for level, stride in enumerate(strides):
            scan = scan_bundle(model, bundle.subsample(stride), tol, keep=False, workers=workers, chunk=chunk)
            terminal[level].append(scan.mass[:, -1])
            if stride == 1:
                failures.append(scan.residual_energy > STRUCTURE_EPS * scan.drift_energy)
        logger.debug(f"分类进度: {stop}/{paths}")

    rate = excluded / paths
    if rate > MAX_EXCLUSION_RATE:
        raise NumericalError(f"剔除路径比例 {rate:.4%} 超过上限 {MAX_EXCLUSION_RATE:.2%}", excluded, paths)

    medians = [float(np.median(np.concatenate(parts))) for parts in terminal]
    fail_fraction = float(np.concatenate(failures).mean())
    verdict, rule = decide_verdict(medians, fail_fraction)
    diagnostics = DivergenceDiagnostics(
        steps=tuple(grid.steps // stride for stride in strides),
        median_mass=tuple(medians),
        ratios=tuple(mass_ratio(a, b) for a, b in zip(medians[:-1], medians[1:])),
        increments=tuple(b - a for a, b in zip(medians[:-1], medians[1:])),
        structure_fail_fraction=fail_fraction,
        exclusion_rate=rate,
        excluded=excluded,
        rule=rule,
    )
    logger.info(f"模型 {model.name} 分类结果: {verdict.value} (规则: {rule})")
    return Na1Classification(verdict=verdict, diagnostics=diagnostics)
