"""
模型目录
按名称 + 参数表构造 MarketModel, 供命令行配置和测试使用

遵循开闭原则 - 新模型通过 ModelCatalog.register 注册, 不修改已有条目
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np
from scipy.stats import norm

from na1lab.exceptions import ModelError, ValidationError
from na1lab.grid.engine import BrownianDriver, PathBundle, TimeGrid, sample_brownian
from na1lab.grid.streams import stream_generator
from na1lab.market.model import MarketModel
from na1lab.utils.linalg import psd_sqrt


logger = logging.getLogger(__name__)


ModelFactory = Callable[[Dict[str, Any], float], MarketModel]


@dataclass(frozen=True)
class ModelCatalogEntry:
    """目录条目: 名称、默认参数、构造函数"""

    name: str
    defaults: Mapping[str, Any]
    factory: ModelFactory
    description: str = ""

    def build(self, params: Optional[Mapping[str, Any]] = None, horizon: float = 1.0) -> MarketModel:
        """用默认参数补全后构造模型, 未知参数名被拒绝"""
        params = dict(params or {})
        unknown = sorted(set(params) - set(self.defaults))
        if unknown:
            raise ValidationError(f"模型 {self.name} 不支持参数: {', '.join(unknown)}", unknown[0])
        merged = {**self.defaults, **params}
        return self.factory(merged, float(horizon))


class ModelCatalog:
    """
    模型目录
    遵循单一职责原则 - 专门负责模型条目的注册与查找
    """

    def __init__(self):
        self._entries: Dict[str, ModelCatalogEntry] = {}

    def register(self, entry: ModelCatalogEntry) -> None:
        """注册条目, 名称必须唯一"""
        if entry.name in self._entries:
            raise ModelError(f"模型名称重复: {entry.name}", entry.name)
        self._entries[entry.name] = entry

    def get(self, name: str) -> ModelCatalogEntry:
        """获取条目"""
        if name not in self._entries:
            raise ModelError(f"目录中不存在模型: {name}", name)
        return self._entries[name]

    def contains(self, name: str) -> bool:
        return name in self._entries

    def list_entries(self) -> List[str]:
        """列出所有模型名称"""
        return sorted(self._entries)

    def build(self, name: str, params: Optional[Mapping[str, Any]] = None, horizon: float = 1.0) -> MarketModel:
        """按名称构造模型"""
        model = self.get(name).build(params, horizon)
        logger.debug(f"构造模型: {name}, 参数: {dict(model.parameters)}")
        return model


# ---------------------------------------------------------------------------
# 参数读取
# ---------------------------------------------------------------------------


def _scalar(params: Mapping[str, Any], key: str, positive: bool = False, nonnegative: bool = False) -> float:
    value = params[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"参数 {key} 必须是数值: {value!r}", key, value)
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(f"参数 {key} 必须有限: {value}", key, value)
    if positive and value <= 0:
        raise ValidationError(f"参数 {key} 必须为正: {value}", key, value)
    if nonnegative and value < 0:
        raise ValidationError(f"参数 {key} 不能为负: {value}", key, value)
    return value


def _vector(params: Mapping[str, Any], key: str, dim: int) -> np.ndarray:
    value = params[key]
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return np.full(dim, float(value))
    array = np.asarray(value, dtype=float).reshape(-1)
    if array.shape != (dim,) or not np.all(np.isfinite(array)):
        raise ValidationError(f"参数 {key} 应为长度 {dim} 的有限向量: {value!r}", key, value)
    return array


def _brownian(dim: int, grid: TimeGrid, paths: int, seed: int, first: int, workers: int, chunk: int) -> PathBundle:
    return sample_brownian(BrownianDriver(dim, grid, seed), paths, first, workers, chunk)


# ---------------------------------------------------------------------------
# 目录条目
# ---------------------------------------------------------------------------


def _black_scholes(params: Dict[str, Any], horizon: float) -> MarketModel:
    """几何布朗运动 dS = μS dt + σS dW"""
    mu = _scalar(params, "mu")
    sigma = _scalar(params, "sigma", positive=True)
    s0 = _scalar(params, "s0", positive=True)
    sharpe = mu / sigma

    def sampler(grid, paths, seed, first, workers, chunk):
        driver = _brownian(1, grid, paths, seed, first, workers, chunk)
        t = grid.nodes[None, :, None]
        values = s0 * np.exp((mu - 0.5 * sigma**2) * t + sigma * driver.values)
        return values, driver

    return MarketModel(
        name="black-scholes",
        dim=1,
        initial=np.array([s0]),
        drift=lambda t, s: mu * s,
        covariance=lambda t, s: (sigma * s[:, :, None]) ** 2,
        exact_sampler=sampler,
        time_homogeneous=True,
        closed_form={
            "mean_terminal": lambda T: s0 * math.exp(mu * T),
            "sharpe": lambda T: sharpe,
            "mass": lambda T: sharpe**2 * T,
            "deflator_mean": lambda T: 1.0,
        },
        parameters={"mu": mu, "sigma": sigma, "s0": s0},
    )


def _arithmetic_brownian(params: Dict[str, Any], horizon: float) -> MarketModel:
    """算术布朗运动 dS = μ dt + σ dW, μ = σ = 0 时为常数路径"""
    mu = _scalar(params, "mu")
    sigma = _scalar(params, "sigma", nonnegative=True)
    s0 = _scalar(params, "s0")

    def sampler(grid, paths, seed, first, workers, chunk):
        driver = _brownian(1, grid, paths, seed, first, workers, chunk)
        values = s0 + mu * grid.nodes[None, :, None] + sigma * driver.values
        return values, driver

    closed: Dict[str, Callable[[float], float]] = {"mean_terminal": lambda T: s0 + mu * T}
    if sigma > 0:
        closed.update(
            sharpe=lambda T: mu / sigma,
            mass=lambda T: (mu / sigma) ** 2 * T,
            deflator_mean=lambda T: 1.0,
        )
    elif mu == 0:
        closed.update(mass=lambda T: 0.0, deflator_mean=lambda T: 1.0)

    return MarketModel(
        name="brownian",
        dim=1,
        initial=np.array([s0]),
        drift=lambda t, s: np.full_like(s, mu),
        covariance=lambda t, s: np.full(s.shape + (1,), sigma**2),
        exact_sampler=sampler,
        time_homogeneous=True,
        closed_form=closed,
        parameters={"mu": mu, "sigma": sigma, "s0": s0},
    )


def _bessel3(params: Dict[str, Any], horizon: float) -> MarketModel:
    """
    三维Bessel过程 dS = S^{-1} dt + dW
    在网格点上精确采样为三维布朗运动 (s0, 0, 0) + W 的模
    Y = s0/S 是严格局部鞅: E[Y_T] = 2Φ(s0/√T) - 1

    网格点之间 S 是Bessel桥, 即不触及0的布朗桥, 因此 S 从 a 到 b 穿越 r 的概率为
    (exp(-2(a-r)(b-r)/Δt) - exp(-2ab/Δt)) / (1 - exp(-2ab/Δt))
    """
    s0 = _scalar(params, "s0", positive=True)
    origin = np.array([s0, 0.0, 0.0])

    def sampler(grid, paths, seed, first, workers, chunk):
        driver = _brownian(3, grid, paths, seed, first, workers, chunk)
        values = np.linalg.norm(origin + driver.values, axis=2)[:, :, None]
        return values, driver

    def log_deflator(bundle: PathBundle) -> np.ndarray:
        return np.log(s0 / bundle.values[:, :, 0])

    def crossing(left: np.ndarray, right: np.ndarray, dt: np.ndarray, level: float) -> np.ndarray:
        a, b, r = s0 / left, s0 / right, s0 / level
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            near = np.exp(-2.0 * (a - r) * (b - r) / dt)
            origin_hit = np.exp(-2.0 * a * b / dt)
            prob = (near - origin_hit) / -np.expm1(-2.0 * a * b / dt)
        prob = np.clip(np.nan_to_num(prob, nan=1.0), 0.0, 1.0)
        return np.where((a <= r) | (b <= r), 1.0, prob)

    return MarketModel(
        name="bessel3",
        dim=1,
        initial=np.array([s0]),
        drift=lambda t, s: 1.0 / s,
        covariance=lambda t, s: np.ones(s.shape + (1,)),
        exact_sampler=sampler,
        time_homogeneous=True,
        log_deflator=log_deflator,
        deflator_crossing=crossing,
        closed_form={
            "deflator_mean": lambda T: 2.0 * norm.cdf(s0 / math.sqrt(T)) - 1.0,
        },
        parameters={"s0": s0},
    )


def _pure_drift(params: Dict[str, Any], horizon: float) -> MarketModel:
    """无噪声漂移 dS = rate dt, 结构条件不成立"""
    rate = _scalar(params, "rate")
    s0 = _scalar(params, "s0")
    return MarketModel(
        name="pure-drift",
        dim=1,
        initial=np.array([s0]),
        drift=lambda t, s: np.full_like(s, rate),
        covariance=lambda t, s: np.zeros(s.shape + (1,)),
        time_homogeneous=True,
        closed_form={"mean_terminal": lambda T: s0 + rate * T},
        parameters={"rate": rate, "s0": s0},
    )


def _exploding_sharpe(params: Dict[str, Any], horizon: float) -> MarketModel:
    """
    dS = (H - t)^{-1/2} dt + dW, H 缺省为网格期限
    夏普比率在 H 处爆炸, ∫λ² dt 对数发散
    网格点上的漂移增量按精确积分 2(√(H-t_i) - √(H-t_{i+1})) 计算
    """
    blow_up = horizon if params["horizon"] is None else _scalar(params, "horizon", positive=True)
    s0 = _scalar(params, "s0")

    def _drift(t: float, s: np.ndarray) -> np.ndarray:
        remaining = blow_up - t
        if remaining <= 0:
            raise ModelError(f"漂移在 t={t} ≥ H={blow_up} 处无定义", "exploding-sharpe")
        return np.full_like(s, remaining**-0.5)

    def sampler(grid, paths, seed, first, workers, chunk):
        if grid.horizon > blow_up:
            raise ModelError(f"网格期限 {grid.horizon} 超过爆炸时刻 {blow_up}", "exploding-sharpe")
        driver = _brownian(1, grid, paths, seed, first, workers, chunk)
        gain = 2.0 * (math.sqrt(blow_up) - np.sqrt(np.maximum(blow_up - grid.nodes, 0.0)))
        values = s0 + gain[None, :, None] + driver.values
        return values, driver

    return MarketModel(
        name="exploding-sharpe",
        dim=1,
        initial=np.array([s0]),
        drift=_drift,
        covariance=lambda t, s: np.ones(s.shape + (1,)),
        exact_sampler=sampler,
        closed_form={
            "mean_terminal": lambda T: s0 + 2.0 * (math.sqrt(blow_up) - math.sqrt(max(blow_up - T, 0.0))),
        },
        parameters={"horizon": blow_up, "s0": s0},
    )


def _partial_noise(params: Dict[str, Any], horizon: float) -> MarketModel:
    """
    二维模型, 第二个资产没有噪声: c = diag(σ², 0), a = (μ, κ)
    κ ≠ 0 时漂移不在 c 的值域内
    """
    sigma = _scalar(params, "sigma", positive=True)
    mu = _scalar(params, "mu")
    kappa = _scalar(params, "kappa")
    s0 = _vector(params, "s0", 2)
    drift = np.array([mu, kappa])
    cov = np.diag([sigma**2, 0.0])

    def sampler(grid, paths, seed, first, workers, chunk):
        driver = _brownian(2, grid, paths, seed, first, workers, chunk)
        noise = driver.values * np.array([sigma, 0.0])
        values = s0 + drift * grid.nodes[None, :, None] + noise
        return values, driver

    return MarketModel(
        name="partial-noise",
        dim=2,
        initial=s0,
        drift=lambda t, s: np.broadcast_to(drift, s.shape),
        covariance=lambda t, s: np.broadcast_to(cov, s.shape + (2,)),
        exact_sampler=sampler,
        time_homogeneous=True,
        parameters={"sigma": sigma, "mu": mu, "kappa": kappa, "s0": s0.tolist()},
    )


def rank_deficient_coefficients(basis_seed: int, kappa: float, premium: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    三维秩2协方差: c = B B^T, B 为 3×2 随机矩阵(由 basis_seed 决定)
    a = c·(premium, premium, premium) + κ u, u 为 ker c 的单位向量
    :return: (c, a, u)
    """
    basis = stream_generator(int(basis_seed), 0).standard_normal((3, 2))
    cov = basis @ basis.T
    kernel = np.cross(basis[:, 0], basis[:, 1])
    kernel = kernel / np.linalg.norm(kernel)
    drift = cov @ np.full(3, premium) + kappa * kernel
    return cov, drift, kernel


def _rank_deficient(params: Dict[str, Any], horizon: float) -> MarketModel:
    """三维秩亏模型, 漂移带有单位核分量 κ"""
    kappa = _scalar(params, "kappa")
    premium = _scalar(params, "premium")
    basis_seed = params["basis_seed"]
    if isinstance(basis_seed, bool) or not isinstance(basis_seed, int) or basis_seed < 0:
        raise ValidationError(f"basis_seed 必须是非负整数: {basis_seed!r}", "basis_seed", basis_seed)
    s0 = _vector(params, "s0", 3)
    cov, drift, _ = rank_deficient_coefficients(basis_seed, kappa, premium)
    root = psd_sqrt(cov)

    def sampler(grid, paths, seed, first, workers, chunk):
        driver = _brownian(3, grid, paths, seed, first, workers, chunk)
        values = s0 + drift * grid.nodes[None, :, None] + driver.values @ root.T
        return values, driver

    return MarketModel(
        name="rank-deficient",
        dim=3,
        initial=s0,
        drift=lambda t, s: np.broadcast_to(drift, s.shape),
        covariance=lambda t, s: np.broadcast_to(cov, s.shape + (3,)),
        exact_sampler=sampler,
        time_homogeneous=True,
        parameters={"kappa": kappa, "premium": premium, "basis_seed": basis_seed, "s0": s0.tolist()},
    )


def _correlated_bs(params: Dict[str, Any], horizon: float) -> MarketModel:
    """
    二维相关几何布朗运动 dS^i = μ_i S^i dt + S^i (Σ^{1/2} dW)_i
    Σ = diag(σ) R diag(σ), R 的相关系数为 corr
    """
    mu = _vector(params, "mu", 2)
    sigma = _vector(params, "sigma", 2)
    corr = _scalar(params, "corr")
    s0 = _vector(params, "s0", 2)
    if np.any(sigma <= 0) or np.any(s0 <= 0):
        raise ValidationError("sigma 与 s0 必须为正", "sigma")
    if not -1.0 < corr < 1.0:
        raise ValidationError(f"相关系数必须在 (-1, 1) 内: {corr}", "corr", corr)
    sig = np.outer(sigma, sigma) * np.array([[1.0, corr], [corr, 1.0]])
    root = psd_sqrt(sig)
    mass_rate = float(mu @ np.linalg.solve(sig, mu))

    def sampler(grid, paths, seed, first, workers, chunk):
        driver = _brownian(2, grid, paths, seed, first, workers, chunk)
        t = grid.nodes[None, :, None]
        values = s0 * np.exp((mu - 0.5 * sigma**2) * t + driver.values @ root.T)
        return values, driver

    def covariance(t: float, s: np.ndarray) -> np.ndarray:
        return s[:, :, None] * sig[None, :, :] * s[:, None, :]

    return MarketModel(
        name="correlated-bs",
        dim=2,
        initial=s0,
        drift=lambda t, s: mu * s,
        covariance=covariance,
        exact_sampler=sampler,
        time_homogeneous=True,
        closed_form={
            "sharpe": lambda T: math.sqrt(mass_rate),
            "mass": lambda T: mass_rate * T,
            "deflator_mean": lambda T: 1.0,
        },
        parameters={"mu": mu.tolist(), "sigma": sigma.tolist(), "corr": corr, "s0": s0.tolist()},
    )


def _default_catalog() -> ModelCatalog:
    catalog = ModelCatalog()
    for entry in (
        ModelCatalogEntry("black-scholes", {"mu": 0.05, "sigma": 0.2, "s0": 1.0}, _black_scholes, "几何布朗运动"),
        ModelCatalogEntry("brownian", {"mu": 0.0, "sigma": 1.0, "s0": 0.0}, _arithmetic_brownian, "算术布朗运动"),
        ModelCatalogEntry("bessel3", {"s0": 1.0}, _bessel3, "三维Bessel过程(精确采样)"),
        ModelCatalogEntry("pure-drift", {"rate": 1.0, "s0": 0.0}, _pure_drift, "无噪声漂移"),
        ModelCatalogEntry(
            "exploding-sharpe", {"horizon": None, "s0": 0.0}, _exploding_sharpe, "夏普比率在期末爆炸"
        ),
        ModelCatalogEntry(
            "partial-noise",
            {"sigma": 0.2, "mu": 0.05, "kappa": 0.1, "s0": [1.0, 1.0]},
            _partial_noise,
            "第二资产无噪声",
        ),
        ModelCatalogEntry(
            "rank-deficient",
            {"kappa": 1.0, "premium": 0.1, "basis_seed": 7, "s0": [0.0, 0.0, 0.0]},
            _rank_deficient,
            "三维秩2协方差",
        ),
        ModelCatalogEntry(
            "correlated-bs",
            {"mu": [0.05, 0.03], "sigma": [0.2, 0.3], "corr": 0.5, "s0": [1.0, 1.0]},
            _correlated_bs,
            "二维相关几何布朗运动",
        ),
    ):
        catalog.register(entry)
    return catalog


# 全局目录实例
catalog = _default_catalog()


def build_model(name: str, params: Optional[Mapping[str, Any]] = None, horizon: float = 1.0) -> MarketModel:
    """从全局目录构造模型"""
    return catalog.build(name, params, horizon)
