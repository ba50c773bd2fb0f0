"""
命令基类
定义所有CLI命令的统一接口

遵循SOLID原则:
- 单一职责(SRP): 每个命令专注于一种实验
- 开闭原则(OCP): 通过继承扩展新命令
- 依赖倒置(DIP): 命令只依赖 ExperimentConfig
"""

from abc import ABC, abstractmethod
from typing import Iterator, Optional, Tuple
import logging

from na1lab.cli.middleware import ErrorHandler, LoggingMiddleware
from na1lab.cli.report import CommandResult
from na1lab.config import ExperimentConfig
from na1lab.exceptions import ConfigError, NumericalError
from na1lab.grid.engine import PathBundle, TimeGrid, chunk_ranges
from na1lab.market.model import MAX_EXCLUSION_RATE, MarketModel, simulate
from na1lab.structure.classify import CHUNK_CELLS, Na1Classification, classify_na1


logger = logging.getLogger(__name__)


class BaseCommand(ABC):
    """
    命令基类
    子类实现 execute, run 负责套上日志与错误处理中间件
    """

    name: str = ""
    help: str = ""

    def __init__(self, logging_middleware: Optional[LoggingMiddleware] = None):
        self.logging_middleware = logging_middleware or LoggingMiddleware()

    def run(self, config: ExperimentConfig) -> CommandResult:
        """执行命令, 异常转换为带退出码的结果"""
        handled = ErrorHandler.handle(self.name)(self.execute)
        return self.logging_middleware.log(self.name)(handled)(config)

    @abstractmethod
    def execute(self, config: ExperimentConfig) -> CommandResult:
        """
        执行命令

        Args:
            config: 实验配置

        Returns:
            CommandResult: 报告与CSV附表
        """
        pass

    # -----------------------------------------------------------------
    # 公共步骤
    # -----------------------------------------------------------------

    def model_and_grid(self, config: ExperimentConfig) -> Tuple[MarketModel, TimeGrid]:
        model = config.require_model().build(config.grid.horizon)
        return model, config.grid.build()

    def chunk_size(self, config: ExperimentConfig, grid: TimeGrid, dim: int) -> int:
        """每块路径数: 配置给定, 否则按内存估算"""
        if config.chunk_paths:
            return config.chunk_paths
        return max(1, CHUNK_CELLS // ((grid.steps + 1) * max(dim, 3)))

    def bundles(self, config: ExperimentConfig, model: MarketModel, grid: TimeGrid) -> Iterator[PathBundle]:
        """
        分块模拟路径, 第 i 块使用流编号 [start, stop)
        分块方式不影响任何路径的取值
        """
        excluded = 0
        for start, stop in chunk_ranges(config.paths, self.chunk_size(config, grid, model.dim)):
            bundle = simulate(model, grid, stop - start, config.seed, first_stream=start, workers=config.workers)
            excluded += bundle.excluded
            if excluded > MAX_EXCLUSION_RATE * config.paths:
                raise NumericalError(
                    f"剔除路径数 {excluded} 超过上限 {MAX_EXCLUSION_RATE:.2%}", excluded, config.paths
                )
            logger.debug(f"{self.name}: 路径 {start}-{stop} 完成")
            yield bundle

    def classify_to(self, config: ExperimentConfig, model: MarketModel, grid: TimeGrid) -> Na1Classification:
        """
        以 grid 为最细层级做加密分类
        最粗层级步数为 grid.steps / factor^(levels-1), 必须整除
        """
        span = config.check.factor ** (config.check.levels - 1)
        if grid.steps % span != 0:
            raise ConfigError(
                f"grid.steps={grid.steps} 不能被 factor^(levels-1)={span} 整除, 无法做加密分类",
                "check.factor",
            )
        return classify_na1(
            model,
            grid,
            config.paths,
            config.seed,
            levels=config.check.levels,
            factor=config.check.factor,
            tol=config.check.tol,
            workers=config.workers,
            chunk_paths=config.chunk_paths,
        )
