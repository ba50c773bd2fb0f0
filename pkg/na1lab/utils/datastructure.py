"""
数据结构模块
提供构建报告文档的有序映射,以及规范化的JSON序列化
"""

from typing import Any, Dict, Union
from collections import OrderedDict
import json
import math

import numpy as np


def to_plain(value: Any) -> Any:
    """
    将numpy标量/数组、元组等转换为可JSON序列化的普通Python对象
    非有限浮点数转换为字符串,保证输出是合法JSON
    """
    if isinstance(value, ReportMap):
        return value.to_dict()
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_plain(v) for v in value.tolist()]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if hasattr(value, "value") and hasattr(value, "name"):
        # Enum
        return value.value
    return value


class ReportMap(dict):
    """
    报告映射类
    遵循开闭原则 - 提供链式调用和灵活的报告构建
    None值不会写入报告
    """

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._ordered_data: "OrderedDict[str, Any]" = OrderedDict(*args, **kwargs)

    def set(self, key: str, value: Any) -> "ReportMap":
        """
        设置报告字段
        支持链式调用
        """
        if value is not None:
            self._ordered_data[key] = value
            self[key] = value
        return self

    def get(self, key: str, default: Any = None) -> Any:
        """获取字段值"""
        return self._ordered_data.get(key, default)

    def remove(self, key: str) -> "ReportMap":
        """移除字段"""
        if key in self._ordered_data:
            del self._ordered_data[key]
            if key in self:
                del self[key]
        return self

    def contains(self, key: str) -> bool:
        """检查是否包含某个字段"""
        return key in self._ordered_data

    def update(self, other: Union[Dict[str, Any], "ReportMap"]) -> "ReportMap":  # type: ignore[override]
        """合并字段(跳过None)"""
        for key, value in other.items():
            self.set(key, value)
        return self

    def to_dict(self) -> Dict[str, Any]:
        """转换为普通字典(递归转换numpy类型)"""
        return {k: to_plain(v) for k, v in self._ordered_data.items()}

    def to_json(self) -> str:
        """转换为规范化JSON字符串"""
        return canonical_dumps(self.to_dict())

    def keys(self):
        """返回所有键"""
        return self._ordered_data.keys()

    def values(self):
        """返回所有值"""
        return self._ordered_data.values()

    def items(self):
        """返回所有键值对"""
        return self._ordered_data.items()

    def __len__(self) -> int:
        return len(self._ordered_data)

    def __repr__(self) -> str:
        return f"ReportMap({dict(self._ordered_data)})"


def canonical_dumps(data: Any) -> str:
    """
    规范化JSON序列化
    键排序、两空格缩进、末尾换行;相同输入得到逐字节相同的输出
    """
    return json.dumps(to_plain(data), ensure_ascii=False, sort_keys=True, indent=2, allow_nan=False) + "\n"
