"""
局部化与正则/奇异质量分解
τ_n = inf{t: Y_t ≥ n}; 停止后的 Y 有界, 因此 Qⁿ[Ω] = E[Y_{τ_n∧T}] = 1
Qⁿ[τ_n ≥ T] = E[Y_T 1{τ_n ≥ T}] 随 n 单调递增, 极限为正则质量 E[Y_T]
总质量恒为1, 奇异质量 = 1 - E[Y_T]
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from na1lab.exceptions import ValidationError


logger = logging.getLogger(__name__)


DEFAULT_LEVELS = (2.0, 4.0, 8.0, 16.0, 32.0)

# 奇异质量不超过该倍数标准误时视为可数可加
ADDITIVITY_SE = 3.0


def _se(samples: np.ndarray) -> np.ndarray:
    m = samples.shape[0]
    if m < 2:
        return np.zeros(samples.shape[1:])
    return samples.std(axis=0, ddof=1) / np.sqrt(m)


def validate_levels(levels: Sequence[float]) -> Tuple[float, ...]:
    """局部化水平必须 > 1 且严格递增"""
    levels = tuple(float(level) for level in levels)
    if not levels:
        raise ValidationError("局部化水平不能为空", "levels")
    if levels[0] <= 1.0 or any(b <= a for a, b in zip(levels[:-1], levels[1:])):
        raise ValidationError(f"局部化水平必须 > 1 且严格递增: {levels}", "levels", levels)
    return levels


def first_passage(values: np.ndarray, levels: Sequence[float]) -> np.ndarray:
    """
    逐路径首达时刻编号 τ_n = min{i: Y_i ≥ n}
    未到达时记为 n_steps + 1
    :return: (m, L)
    """
    values = np.asarray(values, dtype=float)
    never = values.shape[1]
    tau = np.empty((values.shape[0], len(levels)), dtype=np.int64)
    for column, level in enumerate(levels):
        hit = values >= level
        tau[:, column] = np.where(hit.any(axis=1), hit.argmax(axis=1), never)
    return tau


@dataclass(frozen=True, eq=False)
class LocalizationSamples:
    """
    逐路径局部化样本, 可按路径块拼接
    stopped:  Y_{τ_n∧T}        (m, L)
    survived: Y_T 1{τ_n ≥ T}  (m, L)
    terminal: Y_T              (m,)

    给出步内穿越概率时按连续监测计算条件期望:
    P = Π(1 - p_i) 为未穿越概率, stopped = n(1 - P) + P·Y_T, survived = P·Y_T
    否则只在网格点上监测
    """

    levels: Tuple[float, ...]
    tau: np.ndarray = field(repr=False)
    stopped: np.ndarray = field(repr=False)
    survived: np.ndarray = field(repr=False)
    terminal: np.ndarray = field(repr=False)
    steps: int = 0

    @classmethod
    def from_paths(
        cls,
        values: np.ndarray,
        levels: Sequence[float] = DEFAULT_LEVELS,
        crossing: Optional[Callable[[float], np.ndarray]] = None,
    ) -> "LocalizationSamples":
        """
        :param values: Y 路径 (m, n+1)
        :param crossing: level -> 每步穿越概率 (m, n)
        """
        levels = validate_levels(levels)
        values = np.asarray(values, dtype=float)
        if values.ndim != 2:
            raise ValidationError(f"Y 的形状应为 (m, n+1), 实际: {values.shape}", "values")
        steps = values.shape[1] - 1
        tau = first_passage(values, levels)
        terminal = values[:, -1]
        if crossing is None:
            index = np.minimum(tau, steps)
            stopped_values = np.take_along_axis(values, index, axis=1)
            survived = terminal[:, None] * (tau >= steps)
        else:
            escape = np.column_stack([np.prod(1.0 - crossing(level), axis=1) for level in levels])
            level_row = np.asarray(levels)[None, :]
            survived = escape * terminal[:, None]
            stopped_values = level_row * (1.0 - escape) + survived
        return cls(levels, tau, stopped_values, survived, terminal, steps)

    @classmethod
    def from_deflator(cls, deflator: Any, levels: Sequence[float] = DEFAULT_LEVELS) -> "LocalizationSamples":
        """由 DeflatorPath 按连续监测构造"""
        return cls.from_paths(deflator.values, levels, deflator.crossing_probability)

    @classmethod
    def concat(cls, parts: Sequence["LocalizationSamples"]) -> "LocalizationSamples":
        if not parts:
            raise ValidationError("没有可拼接的样本", "parts")
        first = parts[0]
        if any(p.levels != first.levels or p.steps != first.steps for p in parts[1:]):
            raise ValidationError("样本的水平或步数不一致", "parts")
        return cls(
            first.levels,
            np.concatenate([p.tau for p in parts]),
            np.concatenate([p.stopped for p in parts]),
            np.concatenate([p.survived for p in parts]),
            np.concatenate([p.terminal for p in parts]),
            first.steps,
        )

    @property
    def paths(self) -> int:
        return int(self.terminal.shape[0])


@dataclass(frozen=True, eq=False)
class LocalizationSchedule:
    """各水平上的 Qⁿ[Ω] 与 Qⁿ[τ_n ≥ T]"""

    levels: Tuple[float, ...]
    tau: np.ndarray = field(repr=False)
    total_mass: np.ndarray = field(repr=False)
    total_se: np.ndarray = field(repr=False)
    survival_mass: np.ndarray = field(repr=False)
    survival_se: np.ndarray = field(repr=False)
    steps: int = 0

    @property
    def tau_monotone(self) -> bool:
        """τ_n 逐路径随 n 不减"""
        return bool(np.all(np.diff(self.tau, axis=1) >= 0))

    @property
    def survival_monotone(self) -> bool:
        """Qⁿ[τ_n ≥ T] 随 n 不减"""
        return bool(np.all(np.diff(self.survival_mass) >= 0))

    def never_stopped(self) -> np.ndarray:
        """各水平上从未停止的路径比例"""
        return (self.tau > self.steps).mean(axis=0)

    def rows(self):
        for i, level in enumerate(self.levels):
            yield {
                "level": level,
                "total_mass": float(self.total_mass[i]),
                "total_se": float(self.total_se[i]),
                "survival_mass": float(self.survival_mass[i]),
                "survival_se": float(self.survival_se[i]),
            }


@dataclass(frozen=True)
class MeasureSplit:
    """正则/奇异质量分解"""

    total: float
    regular: float
    singular: float
    se: float
    limit_survival: float

    @property
    def countably_additive(self) -> bool:
        return self.singular <= ADDITIVITY_SE * self.se + 1e-12

    def to_dict(self) -> Dict[str, Any]:
        return {
            "total": self.total,
            "regular": self.regular,
            "singular": self.singular,
            "se": self.se,
            "limit_survival": self.limit_survival,
            "countably_additive": self.countably_additive,
        }


def survival_trend(levels: Sequence[float], survival: Sequence[float]) -> float:
    """
    Qⁿ[τ_n ≥ T] 的极限
    末两个水平上按 Qⁿ ≈ Q^∞ - c/n 外推; 只有一个水平时返回该值
    """
    if len(levels) < 2:
        return float(survival[-1])
    (n1, n2), (q1, q2) = levels[-2:], survival[-2:]
    return float((n2 * q2 - n1 * q1) / (n2 - n1))


def localization_demo(
    deflator: Union[np.ndarray, "LocalizationSamples", Any],
    levels: Sequence[float] = DEFAULT_LEVELS,
) -> Tuple[LocalizationSchedule, MeasureSplit]:
    """
    局部化演示
    :param deflator: DeflatorPath(连续监测)、Y 路径数组(网格监测)或已拼接的局部化样本
    :param levels: 首达水平 n₁ < n₂ < ...
    :return: (局部化表, 质量分解)
    """
    if isinstance(deflator, LocalizationSamples):
        samples = deflator
    elif hasattr(deflator, "crossing_probability"):
        samples = LocalizationSamples.from_deflator(deflator, levels)
    else:
        samples = LocalizationSamples.from_paths(deflator, levels)

    schedule = LocalizationSchedule(
        levels=samples.levels,
        tau=samples.tau,
        total_mass=samples.stopped.mean(axis=0),
        total_se=_se(samples.stopped),
        survival_mass=samples.survived.mean(axis=0),
        survival_se=_se(samples.survived),
        steps=samples.steps,
    )
    regular = float(samples.terminal.mean())
    split = MeasureSplit(
        total=1.0,
        regular=regular,
        singular=1.0 - regular,
        se=float(_se(samples.terminal[:, None])[0]),
        limit_survival=survival_trend(samples.levels, schedule.survival_mass),
    )
    logger.info(f"质量分解: 正则 {split.regular:.4f}, 奇异 {split.singular:.4f} ± {split.se:.4f}")
    return schedule, split
