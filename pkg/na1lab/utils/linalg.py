"""
线性代数工具
对称半正定矩阵的批量特征分解、平方根与半正定校验
所有函数都接受形如 (..., d, d) 的批量矩阵
"""

from typing import Tuple

import numpy as np

from na1lab.exceptions import ModelError, ValidationError

# 特征值截断: 低于 EIGEN_CLAMP * λ_max 的特征值视为0
EIGEN_CLAMP = 1e-12

# 半正定校验容差: 最小特征值 ≥ -PSD_TOL * λ_max
PSD_TOL = 1e-10

SYMMETRY_TOL = 1e-10


def symmetric_eigh(c: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    对称矩阵的批量特征分解
    :param c: (..., d, d) 对称矩阵
    :return: (特征值 (..., d), 特征向量 (..., d, d))
    """
    c = np.asarray(c, dtype=float)
    if c.ndim < 2 or c.shape[-1] != c.shape[-2]:
        raise ValidationError(f"需要方阵, 实际形状: {c.shape}", "c", c.shape)
    scale = np.maximum(np.abs(c).max(axis=(-2, -1), initial=0.0), 1.0)
    asym = np.abs(c - np.swapaxes(c, -1, -2)).max(axis=(-2, -1), initial=0.0)
    if np.any(asym > SYMMETRY_TOL * scale):
        raise ValidationError("矩阵不对称", "c")
    return np.linalg.eigh(c)


def check_psd(c: np.ndarray, tol: float = PSD_TOL) -> None:
    """
    半正定校验
    最小特征值 < -tol * 最大特征值 时抛出 ModelError
    """
    w, _ = symmetric_eigh(c)
    w_max = np.maximum(w[..., -1], 0.0)
    if np.any(w[..., 0] < -tol * w_max - 1e-300):
        worst = float(np.min(w[..., 0]))
        raise ModelError(f"协方差矩阵不是半正定的, 最小特征值: {worst:.3e}")


def psd_sqrt(c: np.ndarray, clamp: float = EIGEN_CLAMP, check: bool = False) -> np.ndarray:
    """
    对称半正定平方根 c^{1/2} = V diag(sqrt(w)) V^T
    低于 clamp * λ_max 的特征值截断为0
    :param check: 是否同时做半正定校验(失败抛出 ModelError)
    """
    c = np.asarray(c, dtype=float)
    if c.ndim >= 2 and c.shape[-2:] == (1, 1):
        # 一维: 直接开方
        if check and np.any(c < -PSD_TOL * np.abs(c)):
            raise ModelError(f"方差为负: {float(np.min(c)):.3e}")
        return np.sqrt(np.maximum(c, 0.0))
    w, v = symmetric_eigh(c)
    w_max = np.maximum(w[..., -1:], 0.0)
    if check and np.any(w[..., :1] < -PSD_TOL * w_max - 1e-300):
        raise ModelError(f"协方差矩阵不是半正定的, 最小特征值: {float(np.min(w[..., 0])):.3e}")
    w = np.where(w > clamp * w_max, w, 0.0)
    return (v * np.sqrt(w)[..., None, :]) @ np.swapaxes(v, -1, -2)


def kernel_projector(c: np.ndarray, tol: float) -> np.ndarray:
    """
    到 ker c 的正交投影矩阵
    特征值 ≤ tol * λ_max 的特征向量张成核空间;c ≡ 0 时核为全空间
    """
    w, v = symmetric_eigh(c)
    w_max = np.maximum(w[..., -1:], 0.0)
    mask = (w <= tol * w_max).astype(float)
    return (v * mask[..., None, :]) @ np.swapaxes(v, -1, -2)
