"""
网格引擎模块
时间网格、可复现随机驱动与路径容器
"""

from na1lab.grid.engine import (
    TimeGrid,
    PathBundle,
    BrownianDriver,
    make_grid,
    refine,
    sample_brownian,
    map_chunks,
    collect_chunks,
    chunk_ranges,
)
from na1lab.grid.streams import derive_seed, stream_generator, stream_key

__all__ = [
    "TimeGrid",
    "PathBundle",
    "BrownianDriver",
    "make_grid",
    "refine",
    "sample_brownian",
    "map_chunks",
    "collect_chunks",
    "chunk_ranges",
    "stream_generator",
    "stream_key",
    "derive_seed",
]
