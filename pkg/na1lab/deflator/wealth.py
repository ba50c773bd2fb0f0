"""
财富过程
X^{x,ϑ} = x + ∫ϑ dS 的离散递推

三种策略形式:
- ABSOLUTE   持有资产数量 ϑ:       X_{i+1} = X_i + ⟨ϑ_i, ΔS_i⟩
- FRACTIONAL 财富比例 π:           X_{i+1} = X_i (1 + ⟨π_i, ΔS_i / S_i⟩)
- RELATIVE   单位财富持有数量 π:   X_{i+1} = X_i (1 + ⟨π_i, ΔS_i⟩), 即 dX = Xπ dS

乘法形式支持 simple(上式) 与 exponential(X_i exp(⟨p, ΔS⟩ - ½⟨p, c p⟩Δt)) 两种格式,
exponential 格式保持财富为正
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Union

import numpy as np

from na1lab.exceptions import ValidationError
from na1lab.grid.engine import PathBundle, TimeGrid
from na1lab.grid.streams import stream_generator
from na1lab.market.model import MarketModel, stochastic_integral


logger = logging.getLogger(__name__)


# (t_i, 历史路径 S_{t_0..t_i} (m, i+1, d)) -> 策略值 (m, d)
StrategyFunction = Callable[[float, np.ndarray], np.ndarray]


class StrategyKind(str, Enum):
    """策略形式"""

    ABSOLUTE = "absolute"
    FRACTIONAL = "fractional"
    RELATIVE = "relative"


SCHEMES = ("simple", "exponential")


@dataclass(frozen=True, eq=False)
class StrategySpec:
    """
    交易策略
    value 为函数时只能看到 t_i 及之前的历史, 适应性由构造保证;
    也可以直接给出 (m, n, d) 的数组或 (d,) 常数向量
    """

    kind: StrategyKind
    value: Union[StrategyFunction, np.ndarray]
    capital: float = 1.0
    scheme: str = "simple"
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", StrategyKind(self.kind))
        if not np.isfinite(self.capital) or self.capital < 0:
            raise ValidationError(f"初始资本必须 ≥ 0: {self.capital}", "capital", self.capital)
        if self.scheme not in SCHEMES:
            raise ValidationError(f"不支持的格式: {self.scheme}", "scheme", self.scheme)
        if self.kind is StrategyKind.ABSOLUTE and self.scheme != "simple":
            raise ValidationError("ABSOLUTE 策略只支持 simple 格式", "scheme", self.scheme)

    def with_capital(self, capital: float) -> "StrategySpec":
        return StrategySpec(self.kind, self.value, capital, self.scheme, self.name)

    def evaluate(self, bundle: PathBundle) -> np.ndarray:
        """在左端点上计算策略值, 返回 (m, n, d)"""
        m, n, d = bundle.paths, bundle.grid.steps, bundle.dim
        if callable(self.value):
            out = np.empty((m, n, d))
            for i in range(n):
                history = bundle.values[:, : i + 1, :]
                out[:, i, :] = np.broadcast_to(self.value(float(bundle.grid.nodes[i]), history), (m, d))
            return out
        value = np.asarray(self.value, dtype=float)
        if value.ndim == 1:
            return np.broadcast_to(value, (m, n, d)).copy()
        if value.ndim == 2 and d == 1:
            value = value[:, :, None]
        if value.ndim != 3 or value.shape[0] != m or value.shape[2] != d or value.shape[1] not in (n, n + 1):
            raise ValidationError(f"策略数组形状 {value.shape} 与路径 ({m}, {n}+1, {d}) 不匹配", "value")
        return value[:, :n, :]


def constant_strategy(kind: StrategyKind, vector, capital: float = 1.0, scheme: str = "simple") -> StrategySpec:
    """常数策略"""
    return StrategySpec(kind, np.atleast_1d(np.asarray(vector, dtype=float)), capital, scheme)


@dataclass(frozen=True, eq=False)
class WealthPaths:
    """
    财富路径 (m, n+1)
    crossed 标记离散财富曾跌破0的路径
    """

    grid: TimeGrid
    values: np.ndarray = field(repr=False)
    capital: float
    crossed: np.ndarray = field(repr=False)

    @property
    def terminal(self) -> np.ndarray:
        return self.values[:, -1]

    @property
    def admissible(self) -> bool:
        """所有保留路径上 X ≥ 0"""
        return not bool(self.crossed.any())

    @property
    def crossed_count(self) -> int:
        return int(self.crossed.sum())


def _quadratic_term(strategy: np.ndarray, bundle: PathBundle, model: MarketModel) -> np.ndarray:
    """Σ ½⟨p, c p⟩Δt 的累计路径 (m, n+1)"""
    dt = bundle.grid.increments
    quad = np.zeros((bundle.paths, bundle.grid.steps + 1))
    for i in range(bundle.grid.steps):
        c = model.covariance_at(float(bundle.grid.nodes[i]), bundle.values[:, i, :])
        p = strategy[:, i, :]
        term = np.maximum(np.einsum("mi,mij,mj->m", p, c, p), 0.0) * dt[i]
        quad[:, i + 1] = quad[:, i] + term
    return quad


def log_growth(strategy: np.ndarray, bundle: PathBundle, model: MarketModel) -> np.ndarray:
    """
    exponential 格式的对数增长 ∫⟨p, dS⟩ - ½∫⟨p, c p⟩dt
    与紧缩因子使用同一种求和顺序
    """
    return stochastic_integral(strategy, bundle) - 0.5 * _quadratic_term(strategy, bundle, model)


def wealth(spec: StrategySpec, bundle: PathBundle, model: Optional[MarketModel] = None) -> WealthPaths:
    """
    财富路径
    :param spec: 策略
    :param bundle: S 路径束
    :param model: exponential 格式需要模型协方差
    :return: 财富路径, 跌破0的路径被标记
    """
    theta = spec.evaluate(bundle)
    x = float(spec.capital)

    if spec.kind is StrategyKind.ABSOLUTE:
        values = x + stochastic_integral(theta, bundle)
    else:
        if spec.kind is StrategyKind.FRACTIONAL:
            prices = bundle.values[:, :-1, :]
            if np.any(prices == 0):
                raise ValidationError("比例策略遇到零价格节点", "prices")
            # 比例 π 折算为单位财富持有数量 π/S
            theta = theta / prices
        if spec.scheme == "exponential":
            if model is None:
                raise ValidationError("exponential 格式需要提供市场模型", "model")
            growth = np.exp(log_growth(theta, bundle, model))
        else:
            steps = 1.0 + np.einsum("mnd,mnd->mn", theta, bundle.increments)
            growth = np.ones((bundle.paths, bundle.grid.steps + 1))
            growth[:, 1:] = np.cumprod(steps, axis=1)
        values = x * growth

    crossed = (values < 0).any(axis=1)
    if crossed.any():
        logger.warning(f"策略 {spec.name or spec.kind.value}: {int(crossed.sum())} 条财富路径跌破0")
    return WealthPaths(grid=bundle.grid, values=values, capital=x, crossed=crossed)


def random_fractional_strategies(
    count: int,
    dim: int,
    seed: int,
    bound: float = 1.0,
    kind: StrategyKind = StrategyKind.FRACTIONAL,
    scheme: str = "exponential",
) -> List[StrategySpec]:
    """
    随机可行的比例策略
    π_t = base + tilt * tanh(log(S_t / S_0)), base 与 tilt 在 [-bound, bound]^d 上均匀抽取
    RELATIVE 形式下对数改为 S_t - S_0, 用于可取非正价格的模型
    """
    if count < 1:
        raise ValidationError(f"策略数必须 ≥ 1: {count}", "count", count)
    strategies = []
    for index in range(count):
        rng = stream_generator(seed, index)
        base = rng.uniform(-bound, bound, dim)
        tilt = rng.uniform(-bound, bound, dim)

        def _value(t: float, history: np.ndarray, base=base, tilt=tilt) -> np.ndarray:
            current, start = history[:, -1, :], history[:, 0, :]
            if kind is StrategyKind.FRACTIONAL:
                signal = np.log(current / start)
            else:
                signal = current - start
            return base + tilt * np.tanh(signal)

        strategies.append(StrategySpec(kind, _value, 1.0, scheme, name=f"random-{index}"))
    return strategies
