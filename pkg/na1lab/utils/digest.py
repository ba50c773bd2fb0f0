"""
摘要模块
遵循策略模式 - 支持多种摘要算法
用于计算配置指纹(config_hash),嵌入到每一份报告中
"""

from typing import Any, Dict
import json

from cryptography.hazmat.primitives import hashes

from na1lab.exceptions import ValidationError
from na1lab.utils.datastructure import to_plain


class DigestFactory:
    """
    摘要算法工厂
    遵循开闭原则 - 通过注册扩展新的摘要算法
    """

    _algorithms: Dict[str, type] = {
        "SHA256": hashes.SHA256,
        "SHA512": hashes.SHA512,
        "BLAKE2B": hashes.BLAKE2b,
    }

    @classmethod
    def get_algorithm(cls, name: str) -> hashes.HashAlgorithm:
        """获取摘要算法实例"""
        key = name.upper()
        if key not in cls._algorithms:
            raise ValidationError(f"不支持的摘要算法: {name}", "algorithm", name)
        algorithm = cls._algorithms[key]
        if algorithm is hashes.BLAKE2b:
            return hashes.BLAKE2b(64)
        return algorithm()

    @classmethod
    def register_algorithm(cls, name: str, algorithm: type) -> None:
        """注册自定义摘要算法"""
        cls._algorithms[name.upper()] = algorithm


def canonical_json(data: Any) -> str:
    """紧凑、键排序的规范化JSON,用作摘要输入"""
    return json.dumps(to_plain(data), ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def digest_text(content: str, algorithm: str = "SHA256") -> str:
    """
    计算文本摘要
    :param content: 待摘要内容
    :param algorithm: 摘要算法
    :return: 十六进制摘要
    """
    hasher = hashes.Hash(DigestFactory.get_algorithm(algorithm))
    hasher.update(content.encode("utf-8"))
    return hasher.finalize().hex()


def config_digest(config: Dict[str, Any], algorithm: str = "SHA256") -> str:
    """
    计算配置指纹
    相同配置(与键顺序无关)得到相同指纹
    """
    return digest_text(canonical_json(config), algorithm)
