"""
时间网格与路径容器
所有模拟的基础: 时间网格、布朗驱动、路径束

遵循单一职责原则:
- TimeGrid 只描述时间节点
- PathBundle 只承载路径数值及其随机数来源
- sample_brownian 只负责生成布朗路径
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, List, Optional, Tuple

import numpy as np

from na1lab.exceptions import ValidationError
from na1lab.grid.streams import stream_generator, validate_seed


logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """
    时间网格 0 = t_0 < t_1 < ... < t_n = T
    构造后不可变,可在线程间只读共享
    """

    horizon: float
    steps: int
    nodes: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValidationError(f"期限T必须为正: {self.horizon}", "horizon", self.horizon)
        if self.steps < 1:
            raise ValidationError(f"步数n必须 ≥ 1: {self.steps}", "steps", self.steps)
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.shape != (self.steps + 1,):
            raise ValidationError(f"节点数应为 {self.steps + 1}, 实际: {nodes.shape}", "nodes")
        if nodes[0] != 0.0 or nodes[-1] != self.horizon:
            raise ValidationError("网格必须从0开始并恰好结束于T", "nodes")
        if np.any(np.diff(nodes) <= 0):
            raise ValidationError("网格节点必须严格递增", "nodes")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def increments(self) -> np.ndarray:
        """步长 Δt_i, 形状 (n,)"""
        return np.diff(self.nodes)

    @property
    def is_uniform(self) -> bool:
        """是否为均匀网格"""
        dt = self.increments
        return bool(np.allclose(dt, self.horizon / self.steps, rtol=1e-12, atol=0.0))

    def __len__(self) -> int:
        return self.steps + 1

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TimeGrid):
            return NotImplemented
        return self.steps == other.steps and self.horizon == other.horizon and np.array_equal(self.nodes, other.nodes)

    def __hash__(self) -> int:
        return hash((self.horizon, self.steps, self.nodes.tobytes()))


def make_grid(horizon: float, steps: int) -> TimeGrid:
    """
    构造均匀网格
    :param horizon: 期限T (年), 必须为正
    :param steps: 步数n, 必须 ≥ 1
    :return: 步长为 T/n 的网格
    """
    if isinstance(steps, bool) or not isinstance(steps, (int, np.integer)):
        raise ValidationError(f"步数必须是整数: {steps!r}", "steps", steps)
    if not horizon > 0:
        raise ValidationError(f"期限T必须为正: {horizon}", "horizon", horizon)
    if steps < 1:
        raise ValidationError(f"步数n必须 ≥ 1: {steps}", "steps", steps)
    nodes = np.linspace(0.0, float(horizon), int(steps) + 1)
    nodes[-1] = float(horizon)
    return TimeGrid(horizon=float(horizon), steps=int(steps), nodes=nodes)


def refine(grid: TimeGrid, factor: int) -> TimeGrid:
    """
    网格加密: 每个区间等分为 factor 段, T 不变
    均匀网格加密后仍是均匀网格, 连续加密与一次加密结果一致
    """
    if isinstance(factor, bool) or not isinstance(factor, (int, np.integer)) or factor < 2:
        raise ValidationError(f"加密倍数必须是 ≥ 2 的整数: {factor}", "factor", factor)
    if grid.is_uniform:
        return make_grid(grid.horizon, grid.steps * int(factor))
    fractions = np.arange(int(factor)) / int(factor)
    inner = grid.nodes[:-1, None] + np.diff(grid.nodes)[:, None] * fractions[None, :]
    nodes = np.append(inner.ravel(), grid.horizon)
    return TimeGrid(horizon=grid.horizon, steps=grid.steps * int(factor), nodes=nodes)


@dataclass(frozen=True, eq=False)
class PathBundle:
    """
    路径束: m 条 d 维路径, 共享同一时间网格
    values 形状 (m, n+1, d); 每条路径可由 (seed, stream_id) 单独复现
    """

    grid: TimeGrid
    values: np.ndarray = field(repr=False)
    seed: int
    stream_ids: np.ndarray = field(repr=False)

    # 因数值溢出被剔除的路径数
    excluded: int = 0

    # 生成这些路径所用的布朗驱动(可选)
    driver: Optional["PathBundle"] = field(default=None, repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 3 or values.shape[1] != self.grid.steps + 1:
            raise ValidationError(
                f"路径数组形状应为 (m, {self.grid.steps + 1}, d), 实际: {values.shape}", "values"
            )
        stream_ids = np.asarray(self.stream_ids, dtype=np.int64)
        if stream_ids.shape != (values.shape[0],):
            raise ValidationError("stream_ids 数量与路径数不一致", "stream_ids")
        values.setflags(write=False)
        stream_ids.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "stream_ids", stream_ids)

    @property
    def paths(self) -> int:
        """路径数 m"""
        return int(self.values.shape[0])

    @property
    def dim(self) -> int:
        """维数 d"""
        return int(self.values.shape[2])

    @property
    def increments(self) -> np.ndarray:
        """路径增量 ΔS_i, 形状 (m, n, d)"""
        return np.diff(self.values, axis=1)

    @property
    def terminal(self) -> np.ndarray:
        """终值 S_T, 形状 (m, d)"""
        return self.values[:, -1, :]

    def subsample(self, stride: int) -> "PathBundle":
        """
        限制到粗网格: 每隔 stride 个节点取一个
        同一条路径在各加密层级上保持一致
        """
        if stride < 1 or self.grid.steps % stride != 0:
            raise ValidationError(f"步长 {stride} 不能整除步数 {self.grid.steps}", "stride", stride)
        if stride == 1:
            return self
        coarse = TimeGrid(
            horizon=self.grid.horizon,
            steps=self.grid.steps // stride,
            nodes=self.grid.nodes[::stride],
        )
        driver = self.driver.subsample(stride) if self.driver is not None else None
        return PathBundle(
            grid=coarse,
            values=self.values[:, ::stride, :],
            seed=self.seed,
            stream_ids=self.stream_ids,
            excluded=self.excluded,
            driver=driver,
        )

    def select(self, mask: np.ndarray) -> "PathBundle":
        """按布尔掩码保留路径, 被丢弃的路径计入 excluded"""
        mask = np.asarray(mask, dtype=bool)
        dropped = int(mask.size - mask.sum())
        driver = self.driver.select(mask) if self.driver is not None else None
        return PathBundle(
            grid=self.grid,
            values=self.values[mask],
            seed=self.seed,
            stream_ids=self.stream_ids[mask],
            excluded=self.excluded + dropped,
            driver=driver,
        )


@dataclass(frozen=True)
class BrownianDriver:
    """d 维标准布朗运动的生成参数"""

    dim: int
    grid: TimeGrid
    seed: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError(f"维数必须 ≥ 1: {self.dim}", "dim", self.dim)
        validate_seed(self.seed)


def chunk_ranges(total: int, chunk: int) -> List[Tuple[int, int]]:
    """将 [0, total) 切分为长度不超过 chunk 的区间"""
    chunk = max(int(chunk), 1)
    return [(start, min(start + chunk, total)) for start in range(0, total, chunk)]


def collect_chunks(func: Callable[[int, int], Any], total: int, chunk: int, workers: int = 1) -> List[Any]:
    """
    按路径区间并行执行 func(start, stop), 结果按区间顺序返回
    顺序固定, 因此结果与线程数无关
    """
    ranges = chunk_ranges(total, chunk)
    if workers <= 1 or len(ranges) == 1:
        return [func(start, stop) for start, stop in ranges]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda r: func(*r), ranges))


def map_chunks(func: Callable[[int, int], np.ndarray], total: int, chunk: int, workers: int = 1) -> np.ndarray:
    """按路径区间执行 func 并沿第0轴拼接"""
    return np.concatenate(collect_chunks(func, total, chunk, workers), axis=0)


def brownian_increments(driver: BrownianDriver, stream_id: int) -> np.ndarray:
    """单条路径的布朗增量, 形状 (n, d)"""
    rng = stream_generator(driver.seed, stream_id)
    dt = driver.grid.increments
    return rng.standard_normal((driver.grid.steps, driver.dim)) * np.sqrt(dt)[:, None]


def sample_brownian(
    driver: BrownianDriver,
    paths: int,
    first_stream: int = 0,
    workers: int = 1,
    chunk: int = 4096,
) -> PathBundle:
    """
    生成 m 条独立的 d 维布朗路径
    :param driver: 布朗驱动参数
    :param paths: 路径数 m
    :param first_stream: 第一条路径的流编号(分块生成时使用)
    :param workers: 线程数, 不影响结果
    :param chunk: 每个任务处理的路径数
    :return: 路径束, W_0 = 0
    """
    if paths < 1:
        raise ValidationError(f"路径数必须 ≥ 1: {paths}", "paths", paths)

    def _block(start: int, stop: int) -> np.ndarray:
        block = np.zeros((stop - start, driver.grid.steps + 1, driver.dim))
        for row, stream in enumerate(range(first_stream + start, first_stream + stop)):
            block[row, 1:, :] = np.cumsum(brownian_increments(driver, stream), axis=0)
        return block

    values = map_chunks(_block, paths, chunk, workers)
    logger.debug(f"生成布朗路径: m={paths}, d={driver.dim}, n={driver.grid.steps}")
    return PathBundle(
        grid=driver.grid,
        values=values,
        seed=driver.seed,
        stream_ids=np.arange(first_stream, first_stream + paths),
    )
