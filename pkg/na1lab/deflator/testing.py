"""
(局部)鞅的统计检验
在若干检查点上比较 mean(Z_t) 与 Z_0, Bonferroni 校正后的双侧 z 检验
终点亏损 1 - Ê[Z_T]/Z_0 超过 5 个标准误时判定为严格局部鞅
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.stats import norm

from na1lab.exceptions import ValidationError
from na1lab.grid.engine import TimeGrid


logger = logging.getLogger(__name__)


DEFAULT_ALPHA = 0.01
DEFAULT_CHECKPOINTS = 8
STRICTNESS_SE = 5.0
SUPERMARTINGALE_SE = 3.0


def checkpoint_indices(steps: int, count: int = DEFAULT_CHECKPOINTS) -> np.ndarray:
    """count 个内部等距节点加上终点, 去重后升序"""
    inner = np.rint(np.arange(1, count + 1) * steps / (count + 1)).astype(int)
    return np.unique(np.append(inner[inner > 0], steps))


def stopped(values: np.ndarray, stopping: Optional[np.ndarray]) -> np.ndarray:
    """
    停止过程 Z_{τ∧t}
    :param stopping: 逐路径的停时节点编号, 超过 n 表示不停止
    """
    if stopping is None:
        return values
    m, columns = values.shape
    tau = np.minimum(np.asarray(stopping, dtype=np.int64), columns - 1)
    if tau.shape != (m,):
        raise ValidationError(f"停时数量 {tau.shape} 与路径数 {m} 不一致", "stopping")
    index = np.minimum(np.arange(columns)[None, :], tau[:, None])
    return np.take_along_axis(values, index, axis=1)


@dataclass(frozen=True, eq=False)
class MartingaleSamples:
    """检查点上的样本 (m, k), 可按路径块拼接"""

    times: np.ndarray
    samples: np.ndarray = field(repr=False)
    initial: float

    @classmethod
    def from_paths(
        cls,
        values: np.ndarray,
        grid: TimeGrid,
        stopping: Optional[np.ndarray] = None,
        checkpoints: int = DEFAULT_CHECKPOINTS,
    ) -> "MartingaleSamples":
        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or values.shape[1] != grid.steps + 1:
            raise ValidationError(f"过程形状应为 (m, {grid.steps + 1}), 实际: {values.shape}", "values")
        start = values[:, 0]
        if not np.all(start == start[0]):
            raise ValidationError("过程的初值必须在所有路径上相同", "values")
        index = checkpoint_indices(grid.steps, checkpoints)
        path = stopped(values, stopping)
        return cls(times=grid.nodes[index], samples=path[:, index], initial=float(start[0]))

    @classmethod
    def concat(cls, parts: Sequence["MartingaleSamples"]) -> "MartingaleSamples":
        if not parts:
            raise ValidationError("没有可拼接的样本", "parts")
        first = parts[0]
        for part in parts[1:]:
            if not np.array_equal(part.times, first.times) or part.initial != first.initial:
                raise ValidationError("样本的检查点或初值不一致", "parts")
        return cls(times=first.times, samples=np.concatenate([p.samples for p in parts]), initial=first.initial)

    @property
    def paths(self) -> int:
        return int(self.samples.shape[0])


@dataclass(frozen=True, eq=False)
class MartingaleTestReport:
    """鞅检验结果"""

    times: np.ndarray
    means: np.ndarray
    ses: np.ndarray
    initial: float
    alpha: float
    critical: float
    passed: bool
    deficit: float
    deficit_se: float
    strict: bool
    paths: int

    def to_frame(self) -> pd.DataFrame:
        """(t, mean, se) 序列"""
        return pd.DataFrame(
            {
                "t": self.times,
                "mean": self.means,
                "se": self.ses,
                "lower": self.means - self.critical * self.ses,
                "upper": self.means + self.critical * self.ses,
            }
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "verdict": "PASS" if self.passed else "FAIL",
            "initial": self.initial,
            "alpha": self.alpha,
            "critical_z": self.critical,
            "checkpoints": len(self.times),
            "terminal_mean": float(self.means[-1]),
            "terminal_se": float(self.ses[-1]),
            "deficit": self.deficit,
            "deficit_se": self.deficit_se,
            "strict_local_martingale": self.strict,
            "paths": self.paths,
        }


def martingale_test(
    paths: Union[np.ndarray, MartingaleSamples],
    grid: Optional[TimeGrid] = None,
    stopping: Optional[np.ndarray] = None,
    alpha: float = DEFAULT_ALPHA,
    checkpoints: int = DEFAULT_CHECKPOINTS,
) -> MartingaleTestReport:
    """
    鞅检验
    :param paths: 过程路径 (m, n+1) 或已抽取的检查点样本
    :param grid: 路径所在网格(paths 为数组时必需)
    :param stopping: 可选停时
    :param alpha: 总体显著性水平, 按检查点数做 Bonferroni 校正
    """
    if not 0 < alpha < 1:
        raise ValidationError(f"显著性水平必须在 (0, 1) 内: {alpha}", "alpha", alpha)
    if isinstance(paths, MartingaleSamples):
        samples = paths
    else:
        if grid is None:
            raise ValidationError("数组输入需要提供网格", "grid")
        samples = MartingaleSamples.from_paths(paths, grid, stopping, checkpoints)

    m = samples.paths
    if m < 10_000:
        logger.debug(f"鞅检验路径数 {m} 少于建议值 10000")
    means = samples.samples.mean(axis=0)
    ses = samples.samples.std(axis=0, ddof=1) / np.sqrt(m) if m > 1 else np.zeros_like(means)
    k = len(samples.times)
    critical = float(norm.ppf(1.0 - alpha / (2.0 * k)))
    z0 = samples.initial
    slack = 1e-12 * max(abs(z0), 1.0)
    passed = bool(np.all(np.abs(means - z0) <= critical * ses + slack))

    scale = abs(z0) if z0 != 0 else 1.0
    deficit = float(1.0 - means[-1] / z0) if z0 != 0 else float(-means[-1])
    deficit_se = float(ses[-1] / scale)
    strict = bool(deficit > STRICTNESS_SE * deficit_se + slack)
    logger.debug(f"鞅检验: passed={passed}, deficit={deficit:.4f} ± {deficit_se:.4f}")
    return MartingaleTestReport(
        times=samples.times,
        means=means,
        ses=ses,
        initial=z0,
        alpha=alpha,
        critical=critical,
        passed=passed,
        deficit=deficit,
        deficit_se=deficit_se,
        strict=strict,
        paths=m,
    )


@dataclass(frozen=True)
class SupermartingaleCheck:
    """紧缩后财富的上鞅信号 Ê[Y_T X_T] ≤ X_0 + 3 s.e."""

    mean: float
    se: float
    initial: float
    passed: bool

    def to_dict(self) -> Dict[str, Any]:
        return {"mean": self.mean, "se": self.se, "initial": self.initial, "passed": self.passed}


def deflated_wealth_check(deflator, wealth_paths) -> SupermartingaleCheck:
    """
    检查 Ê[Y_T X_T] ≤ X_0 + 3 s.e.
    :param deflator: DeflatorPath 或 Y 路径数组
    :param wealth_paths: WealthPaths 或 X 路径数组
    """
    y = np.asarray(getattr(deflator, "values", deflator), dtype=float)
    x = np.asarray(getattr(wealth_paths, "values", wealth_paths), dtype=float)
    if y.shape != x.shape:
        raise ValidationError(f"紧缩因子形状 {y.shape} 与财富形状 {x.shape} 不一致", "wealth")
    product = y[:, -1] * x[:, -1]
    m = product.size
    mean = float(product.mean())
    se = float(product.std(ddof=1) / np.sqrt(m)) if m > 1 else 0.0
    initial = float(x[0, 0])
    passed = mean <= initial + SUPERMARTINGALE_SE * se + 1e-12 * max(abs(initial), 1.0)
    return SupermartingaleCheck(mean=mean, se=se, initial=initial, passed=bool(passed))
