"""
命令中间件
提供错误处理与日志功能

遵循SOLID原则:
- 单一职责(SRP): 每个中间件专注于单一功能
- 开闭原则(OCP): 可扩展新的中间件
"""

import logging
import time
from typing import Callable
from functools import wraps

from na1lab.cli.report import CommandResult, ExitCode
from na1lab.exceptions import ConfigError, Na1Error, PreconditionError, ValidationError


logger = logging.getLogger(__name__)


class ErrorHandler:
    """
    错误处理中间件
    把异常映射为退出码: 配置/参数错误 → 2, 前置条件被拒绝 → 3, 其他 → 1
    """

    @staticmethod
    def exit_code_for(error: Exception) -> ExitCode:
        if isinstance(error, (ConfigError, ValidationError)):
            return ExitCode.INVALID_CONFIG
        if isinstance(error, PreconditionError):
            return ExitCode.PRECONDITION_REFUSED
        return ExitCode.RUNTIME_ERROR

    @classmethod
    def handle(cls, command: str) -> Callable:
        """
        错误处理装饰器

        Args:
            command: 命令名称
        """

        def decorator(func: Callable[..., CommandResult]) -> Callable[..., CommandResult]:
            @wraps(func)
            def wrapper(*args, **kwargs) -> CommandResult:
                try:
                    return func(*args, **kwargs)
                except Na1Error as e:
                    code = cls.exit_code_for(e)
                    if code == ExitCode.RUNTIME_ERROR:
                        logger.error(f"命令 {command} 失败: {e}", exc_info=True)
                    else:
                        logger.error(f"命令 {command} 被拒绝: {e}")
                    return CommandResult.failure(command, code, e)
                except Exception as e:
                    logger.error(f"命令 {command} 发生未预期错误: {e}", exc_info=True)
                    return CommandResult.failure(command, ExitCode.RUNTIME_ERROR, Na1Error(str(e), "RUNTIME_ERROR"))

            return wrapper

        return decorator


class LoggingMiddleware:
    """
    日志中间件
    记录命令名称、耗时与退出码; 日志不写入报告文件
    """

    def __init__(self, log_level: int = logging.INFO):
        self.log_level = log_level

    def log(self, command: str) -> Callable:
        def decorator(func: Callable[..., CommandResult]) -> Callable[..., CommandResult]:
            @wraps(func)
            def wrapper(*args, **kwargs) -> CommandResult:
                logger.log(self.log_level, f"开始执行: {command}")
                start_time = time.perf_counter()
                result = func(*args, **kwargs)
                duration = time.perf_counter() - start_time
                logger.log(
                    self.log_level,
                    f"执行结束: {command}, 退出码: {int(result.exit_code)}, 耗时: {duration:.3f}s",
                )
                return result

            return wrapper

        return decorator
