"""
异常定义模块
遵循单一职责原则 - 每个异常类负责一种错误类型

裁决结果(STRUCTURE_FAIL、INFEASIBLE、UNBOUNDED 等)属于数据,不通过异常表达;
这里的异常只用于配置错误、前置条件不满足和数值失败。
"""

from typing import Optional, Dict, Any


class Na1Error(Exception):
    """na1lab基础异常类"""

    def __init__(self, message: str, code: Optional[str] = None, extra: Optional[Dict[str, Any]] = None):
        self.message = message
        self.code = code
        self.extra = extra or {}
        super().__init__(self.message)

    def __str__(self) -> str:
        if self.code:
            return f"[{self.code}] {self.message}"
        return self.message

    def to_dict(self) -> Dict[str, Any]:
        """转换为字典格式"""
        return {
            "error": self.__class__.__name__,
            "message": self.message,
            "code": self.code,
            "extra": self.extra,
        }


class ConfigError(Na1Error):
    """配置错误"""

    def __init__(self, message: str, config_key: Optional[str] = None):
        super().__init__(message, code="CONFIG_ERROR", extra={"config_key": config_key} if config_key else None)
        self.config_key = config_key


class ValidationError(Na1Error):
    """参数验证错误"""

    def __init__(self, message: str, field_name: Optional[str] = None, field_value: Optional[Any] = None):
        super().__init__(message, code="VALIDATION_ERROR", extra={"field": field_name} if field_name else None)
        self.field_name = field_name
        self.field_value = field_value


class ModelError(Na1Error):
    """市场模型错误(协方差非半正定、目录中不存在的模型等)"""

    def __init__(self, message: str, model_name: Optional[str] = None):
        super().__init__(message, code="MODEL_ERROR", extra={"model": model_name} if model_name else None)
        self.model_name = model_name


class NumericalError(Na1Error):
    """数值错误(路径爆炸比例过高等)"""

    def __init__(self, message: str, excluded: Optional[int] = None, total: Optional[int] = None):
        extra = {"excluded": excluded, "total": total} if excluded is not None else None
        super().__init__(message, code="NUMERICAL_ERROR", extra=extra)
        self.excluded = excluded
        self.total = total


class PreconditionError(Na1Error):
    """前置条件不满足,操作被拒绝"""

    def __init__(self, message: str, precondition: Optional[str] = None):
        super().__init__(
            message,
            code="PRECONDITION_REFUSED",
            extra={"precondition": precondition} if precondition else None,
        )
        self.precondition = precondition


class TreeError(Na1Error):
    """有限树模型错误"""

    def __init__(self, message: str, node_id: Optional[str] = None):
        super().__init__(message, code="TREE_ERROR", extra={"node": node_id} if node_id else None)
        self.node_id = node_id
