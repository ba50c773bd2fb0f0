"""
Itô市场模型
S = A + M, 其中 A = ∫a dt, [M, M] = ∫c dt, 时钟 G = ∫trace(c) dt

提供价格路径模拟(欧拉-丸山格式或精确采样器)、路径二次变差与伊藤积分
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Optional, Tuple, Union

import numpy as np

from na1lab.exceptions import ModelError, ValidationError
from na1lab.grid.engine import (
    BrownianDriver,
    PathBundle,
    TimeGrid,
    map_chunks,
    sample_brownian,
)
from na1lab.utils.linalg import psd_sqrt


logger = logging.getLogger(__name__)


# a(t, S) : (m, d) -> (m, d)
DriftFunction = Callable[[float, np.ndarray], np.ndarray]

# c(t, S) : (m, d) -> (m, d, d)
CovarianceFunction = Callable[[float, np.ndarray], np.ndarray]

# (grid, paths, seed, first_stream, workers, chunk) -> (values (m, n+1, d), driver)
ExactSampler = Callable[[TimeGrid, int, int, int, int, int], Tuple[np.ndarray, PathBundle]]

# S 路径束 -> log Y (m, n+1), 与精确采样器一致
LogDeflator = Callable[[PathBundle], np.ndarray]

# (Y 左端点 (m, n), Y 右端点 (m, n), Δt (n,), 水平) -> 步内连续穿越该水平的条件概率 (m, n)
CrossingProbability = Callable[[np.ndarray, np.ndarray, np.ndarray, float], np.ndarray]

# 分类前允许的最大路径剔除比例
MAX_EXCLUSION_RATE = 1e-3


@dataclass(frozen=True)
class MarketModel:
    """
    市场模型系数
    drift/covariance 在路径维度上向量化
    """

    name: str
    dim: int
    initial: np.ndarray
    drift: DriftFunction
    covariance: CovarianceFunction

    # 网格点上分布精确的采样器, 存在时替代欧拉格式
    exact_sampler: Optional[ExactSampler] = None

    # 系数不显式依赖 t 时, 整条路径可以一次求值
    time_homogeneous: bool = False

    # 紧缩因子的闭式路径; 左端点和在 S 接近0时不稳定的模型提供
    log_deflator: Optional[LogDeflator] = None

    # 紧缩因子在两个网格点之间穿越水平的精确概率(桥分布)
    deflator_crossing: Optional[CrossingProbability] = None

    # 闭式结果, 以期限T为自变量: mean_terminal, sharpe, mass, deflator_mean
    closed_form: Mapping[str, Callable[[float], float]] = field(default_factory=dict)

    parameters: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 1:
            raise ModelError(f"维数必须 ≥ 1: {self.dim}", self.name)
        initial = np.asarray(self.initial, dtype=float).reshape(-1)
        if initial.shape != (self.dim,):
            raise ModelError(f"初值维数应为 {self.dim}, 实际: {initial.shape}", self.name)
        object.__setattr__(self, "initial", initial)

    def drift_at(self, t: float, states: np.ndarray) -> np.ndarray:
        """在 (t, S) 处计算漂移, 返回 (m, d)"""
        states = np.asarray(states, dtype=float)
        value = np.asarray(self.drift(t, states), dtype=float)
        return np.broadcast_to(value, states.shape).copy()

    def covariance_at(self, t: float, states: np.ndarray) -> np.ndarray:
        """在 (t, S) 处计算协方差, 返回 (m, d, d)"""
        states = np.asarray(states, dtype=float)
        value = np.asarray(self.covariance(t, states), dtype=float)
        return np.broadcast_to(value, states.shape + (self.dim,)).copy()

    def coefficients_on(self, grid: TimeGrid, values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        沿路径在左端点 t_0..t_{n-1} 上求 a 与 c
        :param values: (m, n+1, d)
        :return: (a (m, n, d), c (m, n, d, d))
        """
        m, n, d = values.shape[0], grid.steps, values.shape[2]
        if self.time_homogeneous:
            states = values[:, :n, :].reshape(m * n, d)
            drift = self.drift_at(0.0, states).reshape(m, n, d)
            cov = self.covariance_at(0.0, states).reshape(m, n, d, d)
            return drift, cov
        drift = np.empty((m, n, d))
        cov = np.empty((m, n, d, d))
        for i in range(n):
            t = float(grid.nodes[i])
            drift[:, i, :] = self.drift_at(t, values[:, i, :])
            cov[:, i, :, :] = self.covariance_at(t, values[:, i, :])
        return drift, cov

    def closed(self, key: str, horizon: float) -> Optional[float]:
        """查询闭式结果, 不存在时返回None"""
        func = self.closed_form.get(key)
        return None if func is None else float(func(horizon))


def _euler_block(model: MarketModel, noise: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """
    欧拉-丸山格式: S_{i+1} = S_i + a(t_i, S_i)Δt + c^{1/2}(t_i, S_i)ΔW
    :param noise: 布朗路径 (m, n+1, d)
    """
    m = noise.shape[0]
    values = np.empty((m, grid.steps + 1, model.dim))
    values[:, 0, :] = model.initial
    dt = grid.increments
    dw = np.diff(noise, axis=1)
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(grid.steps):
            t = float(grid.nodes[i])
            s = values[:, i, :]
            root = psd_sqrt(model.covariance_at(t, s), check=True)
            values[:, i + 1, :] = s + model.drift_at(t, s) * dt[i] + np.einsum("mij,mj->mi", root, dw[:, i, :])
    return values


def simulate(
    model: MarketModel,
    grid: TimeGrid,
    paths: int,
    seed: int,
    first_stream: int = 0,
    workers: int = 1,
    chunk: int = 4096,
) -> PathBundle:
    """
    模拟价格路径
    存在精确采样器时使用精确采样, 否则使用欧拉格式
    数值溢出(NaN/inf)的路径被剔除并计数

    :param model: 市场模型
    :param grid: 时间网格
    :param paths: 路径数 m
    :param seed: 主种子
    :param first_stream: 第一条路径的流编号
    :param workers: 线程数, 不影响结果
    :return: S 的路径束
    """
    if paths < 1:
        raise ValidationError(f"路径数必须 ≥ 1: {paths}", "paths", paths)

    if model.exact_sampler is not None:
        values, driver = model.exact_sampler(grid, paths, seed, first_stream, workers, chunk)
    else:
        driver = sample_brownian(BrownianDriver(model.dim, grid, seed), paths, first_stream, workers, chunk)
        values = map_chunks(
            lambda start, stop: _euler_block(model, driver.values[start:stop], grid),
            paths,
            chunk,
            workers,
        )

    bundle = PathBundle(grid=grid, values=values, seed=seed, stream_ids=driver.stream_ids, driver=driver)
    finite = np.isfinite(values).all(axis=(1, 2))
    if not finite.all():
        logger.warning(f"模型 {model.name}: 剔除 {int((~finite).sum())}/{paths} 条溢出路径")
        bundle = bundle.select(finite)
    logger.debug(f"模拟完成: model={model.name}, m={paths}, n={grid.steps}")
    return bundle


def exclusion_rate(bundle: PathBundle) -> float:
    """剔除路径比例"""
    total = bundle.paths + bundle.excluded
    return bundle.excluded / total if total else 0.0


@dataclass(frozen=True, eq=False)
class QuadraticVariation:
    """
    二次(协)变差路径
    realized: 增量外积的累计和 (m, n+1, d, d)
    implied:  沿路径的 ∫c(t, S_t)dt (m, n+1, d, d), 未提供模型时为None
    """

    realized: np.ndarray
    implied: Optional[np.ndarray] = None

    @property
    def terminal(self) -> np.ndarray:
        """终点已实现二次变差 (m, d, d)"""
        return self.realized[:, -1]


def quadratic_variation(bundle: PathBundle, model: Optional[MarketModel] = None) -> QuadraticVariation:
    """
    计算路径二次变差
    已实现二次变差 = Σ ΔS ΔS^T; 若给出模型, 同时返回模型隐含的 ∫c dt
    """
    inc = bundle.increments
    outer = np.einsum("mni,mnj->mnij", inc, inc)
    realized = np.zeros((bundle.paths, bundle.grid.steps + 1, bundle.dim, bundle.dim))
    realized[:, 1:] = np.cumsum(outer, axis=1)

    implied = None
    if model is not None:
        dt = bundle.grid.increments
        contributions = np.stack(
            [model.covariance_at(float(bundle.grid.nodes[i]), bundle.values[:, i, :]) * dt[i] for i in range(bundle.grid.steps)],
            axis=1,
        )
        implied = np.zeros_like(realized)
        implied[:, 1:] = np.cumsum(contributions, axis=1)
    return QuadraticVariation(realized=realized, implied=implied)


def _as_increments(integrator: Union[PathBundle, np.ndarray]) -> np.ndarray:
    if isinstance(integrator, PathBundle):
        return integrator.increments
    values = np.asarray(integrator, dtype=float)
    if values.ndim == 2:
        values = values[:, :, None]
    if values.ndim != 3:
        raise ValidationError(f"积分器形状应为 (m, n+1, d), 实际: {values.shape}", "integrator")
    return np.diff(values, axis=1)


def stochastic_integral(integrand: np.ndarray, integrator: Union[PathBundle, np.ndarray]) -> np.ndarray:
    """
    伊藤积分(左端点和): (∫ϑ dS)_{t_i} = Σ_{j<i} ⟨ϑ_{t_j}, S_{t_{j+1}} - S_{t_j}⟩

    :param integrand: (m, n, d) 或 (m, n+1, d)(最后一个节点不使用); d=1 时可为 (m, n) / (m, n+1)
    :param integrator: 路径束或 (m, n+1, d) 数组
    :return: 积分路径 (m, n+1), 起点为0
    """
    inc = _as_increments(integrator)
    m, n, d = inc.shape
    theta = np.asarray(integrand, dtype=float)
    if theta.ndim == 2 and d == 1:
        theta = theta[:, :, None]
    if theta.ndim != 3 or theta.shape[0] != m or theta.shape[2] != d or theta.shape[1] not in (n, n + 1):
        raise ValidationError(
            f"被积过程形状 {theta.shape} 与积分器 ({m}, {n}+1, {d}) 不匹配", "integrand", theta.shape
        )
    terms = np.einsum("mnd,mnd->mn", theta[:, :n, :], inc)
    result = np.zeros((m, n + 1))
    result[:, 1:] = np.cumsum(terms, axis=1)
    return result
