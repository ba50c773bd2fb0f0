"""
配置管理模块
遵循开闭原则和单一职责原则 - 每个命令的选项独立成类, 由实验配置统一组装
"""

from typing import Optional, Dict, Any, List, Union, Tuple
from pathlib import Path
from dataclasses import dataclass, field, fields, replace
import json
import logging

from na1lab.exceptions import ConfigError, ValidationError
from na1lab.grid.engine import TimeGrid, make_grid
from na1lab.grid.streams import validate_seed
from na1lab.market.catalog import catalog
from na1lab.market.model import MarketModel


logger = logging.getLogger(__name__)


def _check_keys(data: Any, allowed: Any, section: str) -> Dict[str, Any]:
    """拒绝未知配置项"""
    if not isinstance(data, dict):
        raise ConfigError(f"配置段 {section} 必须是对象", section)
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        key = f"{section}.{unknown[0]}" if section else unknown[0]
        raise ConfigError(f"未知配置项: {key}", key)
    return data


def _field_names(cls) -> List[str]:
    return [f.name for f in fields(cls) if f.init]


def _positive_int(value: Any, key: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"{key} 必须是 ≥ {minimum} 的整数: {value!r}", key)
    return value


def _number(value: Any, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} 必须是数值: {value!r}", key)
    return float(value)


def _numbers(values: Any, key: str) -> Tuple[float, ...]:
    if not isinstance(values, (list, tuple)) or not values:
        raise ConfigError(f"{key} 必须是非空数值列表", key)
    return tuple(_number(v, key) for v in values)


@dataclass
class GridConfig:
    """时间网格配置"""

    # 期限 T
    horizon: float = 1.0

    # 步数 n
    steps: int = 1000

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if _number(self.horizon, "grid.horizon") <= 0:
            raise ConfigError(f"grid.horizon 必须为正: {self.horizon}", "grid.horizon")
        _positive_int(self.steps, "grid.steps")

    def build(self) -> TimeGrid:
        return make_grid(float(self.horizon), self.steps)

    def to_dict(self) -> Dict[str, Any]:
        return {"horizon": float(self.horizon), "steps": self.steps}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GridConfig":
        return cls(**_check_keys(data, _field_names(cls), "grid"))


@dataclass
class ModelConfig:
    """
    模型配置
    name 为目录中的模型名, params 覆盖目录默认参数
    """

    name: str
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not isinstance(self.name, str) or not self.name:
            raise ConfigError("model.name 不能为空", "model.name")
        if not catalog.contains(self.name):
            raise ConfigError(f"目录中不存在模型: {self.name}", "model.name")
        if not isinstance(self.params, dict):
            raise ConfigError("model.params 必须是对象", "model.params")

    def build(self, horizon: float) -> MarketModel:
        return catalog.build(self.name, self.params, horizon)

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, data: Union[str, Dict[str, Any]]) -> "ModelConfig":
        """支持简写 "model": "black-scholes" """
        if isinstance(data, str):
            return cls(name=data)
        data = _check_keys(data, _field_names(cls), "model")
        if "name" not in data:
            raise ConfigError("缺少配置项: model.name", "model.name")
        return cls(**data)


@dataclass
class CheckOptions:
    """check-na1 选项"""

    # 加密层级数
    levels: int = 3

    # 相邻层级加密倍数
    factor: int = 10

    # 伪逆截断容差
    tol: float = 1e-10

    def __post_init__(self):
        _positive_int(self.levels, "check.levels", 2)
        _positive_int(self.factor, "check.factor", 2)
        if _number(self.tol, "check.tol") <= 0:
            raise ConfigError("check.tol 必须为正", "check.tol")

    def to_dict(self) -> Dict[str, Any]:
        return {"levels": self.levels, "factor": self.factor, "tol": float(self.tol)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CheckOptions":
        return cls(**_check_keys(data, _field_names(cls), "check"))


@dataclass
class DeflateOptions:
    """deflate 选项"""

    # 鞅检验显著性水平
    alpha: float = 0.01

    # 检验时刻数
    checkpoints: int = 8

    # 随机分数策略个数
    strategies: int = 10

    # 随机策略分数上界
    strategy_bound: float = 1.0

    def __post_init__(self):
        if not 0 < _number(self.alpha, "deflate.alpha") < 1:
            raise ConfigError("deflate.alpha 必须在 (0, 1) 内", "deflate.alpha")
        _positive_int(self.checkpoints, "deflate.checkpoints")
        _positive_int(self.strategies, "deflate.strategies", 0)
        if _number(self.strategy_bound, "deflate.strategy_bound") <= 0:
            raise ConfigError("deflate.strategy_bound 必须为正", "deflate.strategy_bound")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "alpha": float(self.alpha),
            "checkpoints": self.checkpoints,
            "strategies": self.strategies,
            "strategy_bound": float(self.strategy_bound),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DeflateOptions":
        return cls(**_check_keys(data, _field_names(cls), "deflate"))


@dataclass
class LocalizeOptions:
    """localize 选项"""

    levels: Tuple[float, ...] = (2.0, 4.0, 8.0, 16.0, 32.0)

    def __post_init__(self):
        self.levels = _numbers(self.levels, "localize.levels")

    def to_dict(self) -> Dict[str, Any]:
        return {"levels": list(self.levels)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LocalizeOptions":
        return cls(**_check_keys(data, _field_names(cls), "localize"))


@dataclass
class ForgeOptions:
    """forge 选项"""

    # 财富族倍数 k (核方向) / 截断水平 k (杠杆阶梯)
    scales: Tuple[float, ...] = (1.0, 4.0, 16.0, 64.0, 256.0, 1024.0)

    # 无界检验阈值 M
    thresholds: Tuple[float, ...] = (1.5, 3.5)

    def __post_init__(self):
        self.scales = _numbers(self.scales, "forge.scales")
        self.thresholds = _numbers(self.thresholds, "forge.thresholds")

    def to_dict(self) -> Dict[str, Any]:
        return {"scales": list(self.scales), "thresholds": list(self.thresholds)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ForgeOptions":
        return cls(**_check_keys(data, _field_names(cls), "forge"))


@dataclass
class TreeOptions:
    """tree 选项"""

    # 停时枚举上限
    cap: int = 200_000

    # 分离检验的策略箱形约束
    bound: float = 1e3

    # 随机策略个数
    trials: int = 10

    def __post_init__(self):
        _positive_int(self.cap, "tree.cap")
        _positive_int(self.trials, "tree.trials", 0)
        if _number(self.bound, "tree.bound") < 0:
            raise ConfigError("tree.bound 不能为负", "tree.bound")

    def to_dict(self) -> Dict[str, Any]:
        return {"cap": self.cap, "bound": float(self.bound), "trials": self.trials}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TreeOptions":
        return cls(**_check_keys(data, _field_names(cls), "tree"))


_SECTIONS = {
    "grid": GridConfig,
    "check": CheckOptions,
    "deflate": DeflateOptions,
    "localize": LocalizeOptions,
    "forge": ForgeOptions,
    "tree": TreeOptions,
}

# 只影响执行方式、不影响结果的配置项, 不计入配置指纹
_EXECUTION_KEYS = ("workers", "enable_log", "log_level")


@dataclass
class ExperimentConfig:
    """
    实验配置
    遵循依赖倒置原则 - 命令只依赖配置对象, 不关心配置来源(文件或命令行)
    """

    model: Optional[ModelConfig] = None
    grid: GridConfig = field(default_factory=GridConfig)

    # 路径数 m
    paths: int = 10_000

    # 主种子 (u64)
    seed: int = 0

    # 线程数, 不影响结果
    workers: int = 1

    # 每次模拟的路径数, 缺省按内存估算
    chunk_paths: Optional[int] = None

    # 日志配置
    enable_log: bool = True
    log_level: str = "INFO"

    check: CheckOptions = field(default_factory=CheckOptions)
    deflate: DeflateOptions = field(default_factory=DeflateOptions)
    localize: LocalizeOptions = field(default_factory=LocalizeOptions)
    forge: ForgeOptions = field(default_factory=ForgeOptions)
    tree: TreeOptions = field(default_factory=TreeOptions)

    # 树描述文件(tree 命令), 相对路径相对于配置文件所在目录
    tree_file: Optional[str] = None
    source_dir: Optional[str] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        """验证配置是否完整"""
        _positive_int(self.paths, "paths")
        _positive_int(self.workers, "workers")
        if self.chunk_paths is not None:
            _positive_int(self.chunk_paths, "chunk_paths")
        try:
            validate_seed(self.seed)
        except ValidationError as e:
            raise ConfigError(f"seed 非法: {self.seed!r}", "seed") from e
        if not isinstance(self.log_level, str) or not isinstance(logging.getLevelName(self.log_level.upper()), int):
            raise ConfigError(f"未知日志级别: {self.log_level!r}", "log_level")

    def require_model(self) -> ModelConfig:
        if self.model is None:
            raise ConfigError("缺少配置项: model", "model")
        return self.model

    def require_tree_file(self) -> Path:
        if not self.tree_file:
            raise ConfigError("缺少配置项: tree_file", "tree_file")
        path = Path(self.tree_file)
        if not path.is_absolute() and self.source_dir:
            path = Path(self.source_dir) / path
        return path

    def with_overrides(self, **overrides: Any) -> "ExperimentConfig":
        """命令行覆盖(值为 None 的项忽略)"""
        changes: Dict[str, Any] = {}
        for key, value in overrides.items():
            if value is None:
                continue
            if key == "steps":
                changes["grid"] = replace(self.grid, steps=value)
            elif key in ("seed", "paths", "workers", "log_level"):
                changes[key] = value
            else:
                raise ConfigError(f"不支持的覆盖项: {key}", key)
        if not changes:
            return self
        updated = replace(self, **changes)
        updated.source_dir = self.source_dir
        return updated

    def to_dict(self) -> Dict[str, Any]:
        """转换为字典"""
        return {
            "model": self.model.to_dict() if self.model else None,
            "grid": self.grid.to_dict(),
            "paths": self.paths,
            "seed": self.seed,
            "workers": self.workers,
            "chunk_paths": self.chunk_paths,
            "enable_log": self.enable_log,
            "log_level": self.log_level,
            "check": self.check.to_dict(),
            "deflate": self.deflate.to_dict(),
            "localize": self.localize.to_dict(),
            "forge": self.forge.to_dict(),
            "tree": self.tree.to_dict(),
            "tree_file": self.tree_file,
        }

    def fingerprint_dict(self) -> Dict[str, Any]:
        """参与配置指纹的部分(去掉线程数与日志设置)"""
        data = self.to_dict()
        for key in _EXECUTION_KEYS:
            data.pop(key)
        return data

    @classmethod
    def from_dict(cls, config_dict: Dict[str, Any]) -> "ExperimentConfig":
        """从字典创建配置, 未知配置项被拒绝"""
        data = dict(_check_keys(config_dict, _field_names(cls), ""))
        if data.get("model") is not None:
            data["model"] = ModelConfig.from_dict(data["model"])
        for key, section in _SECTIONS.items():
            if key in data:
                data[key] = section.from_dict(data[key])
        return cls(**data)

    @classmethod
    def from_file(cls, config_file: Union[str, Path]) -> "ExperimentConfig":
        """
        从配置文件加载
        支持JSON格式配置文件
        """
        config_path = Path(config_file)
        if not config_path.exists():
            raise ConfigError(f"配置文件不存在: {config_file}")
        if config_path.suffix != ".json":
            raise ConfigError(f"不支持的配置文件格式: {config_path.suffix}")

        try:
            with open(config_path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"配置文件解析失败: {e}")

        config = cls.from_dict(data)
        config.source_dir = str(config_path.parent)
        logger.debug(f"加载配置: {config_path}")
        return config
