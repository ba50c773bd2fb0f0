"""
可复现的随机数流
每条路径拥有独立的计数器型(Philox4x64)随机数流,只由 (主种子, 流编号) 决定

拆分规则:
    key     = seed + stream_id * 2**64   (128位Philox密钥)
    counter = 0
不同流的密钥不同,因此各流互不重叠;路径的生成顺序和线程数都不影响结果
"""

import numpy as np

from na1lab.exceptions import ValidationError

SEED_BITS = 64
MAX_SEED = (1 << SEED_BITS) - 1


def validate_seed(seed: int) -> int:
    """校验64位种子"""
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise ValidationError(f"种子必须是整数: {seed!r}", "seed", seed)
    seed = int(seed)
    if seed < 0 or seed > MAX_SEED:
        raise ValidationError(f"种子必须在 [0, 2^64) 内: {seed}", "seed", seed)
    return seed


def stream_key(seed: int, stream_id: int) -> int:
    """计算流密钥"""
    if stream_id < 0:
        raise ValidationError(f"流编号不能为负: {stream_id}", "stream_id", stream_id)
    return validate_seed(seed) + (int(stream_id) << SEED_BITS)


def stream_generator(seed: int, stream_id: int) -> np.random.Generator:
    """
    获取指定流的随机数生成器
    :param seed: 主种子
    :param stream_id: 流编号(通常为路径编号)
    :return: numpy Generator
    """
    return np.random.Generator(np.random.Philox(key=stream_key(seed, stream_id)))


def derive_seed(seed: int, salt: int) -> int:
    """派生种子, 用于与路径流分开的辅助随机数(如随机策略)"""
    return (validate_seed(seed) + int(salt)) & MAX_SEED
