"""
核方向套利
结构条件不成立时, 漂移在 ker c 上有非零分量: 取 θ 为该分量的单位方向
∫⟨θ, dS⟩ 没有噪声项, 收益 ∫⟨θ, a⟩dt 单调不减, 任意倍数 kθ 都是可行策略
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from na1lab.exceptions import PreconditionError, ValidationError
from na1lab.forge.family import WealthFamily
from na1lab.grid.engine import PathBundle, TimeGrid
from na1lab.market.model import MarketModel, stochastic_integral
from na1lab.structure.premium import DEFAULT_RANK_TOL, STRUCTURE_FAIL_FRACTION, Na1Verdict
from na1lab.utils.linalg import kernel_projector


logger = logging.getLogger(__name__)


# ‖P_ker a‖ 低于 KERNEL_FLOOR * (1 + ‖a‖) 时视为无核分量
KERNEL_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class KernelStrategy:
    """
    核方向策略
    theta: (m, n, d) 左端点取值, 单位向量或0
    gain:  ∫⟨θ, dA⟩ 的累计路径 (m, n+1)
    """

    grid: TimeGrid
    theta: np.ndarray = field(repr=False)
    gain: np.ndarray = field(repr=False)
    bundle: PathBundle = field(repr=False)

    # 所有节点上 ⟨θ, cθ⟩ 的最大值
    max_quadratic: float = 0.0
    tol: float = DEFAULT_RANK_TOL

    @property
    def active_fraction(self) -> float:
        """θ 非零的节点比例"""
        return float(np.mean(np.linalg.norm(self.theta, axis=2) > 0))


def kernel_direction(
    model: MarketModel,
    bundle: PathBundle,
    tol: float = DEFAULT_RANK_TOL,
    verdict: Optional[Na1Verdict] = None,
) -> KernelStrategy:
    """
    核方向 θ = P_ker a / ‖P_ker a‖, 投影为0处取0向量
    :param verdict: 已知的分类结果, 只接受 STRUCTURE_FAIL;
        缺省时由核方向收益为正的路径比例推断, 不超过 STRUCTURE_FAIL_FRACTION 即视为结构条件成立并拒绝
    """
    if verdict is not None and verdict is not Na1Verdict.STRUCTURE_FAIL:
        raise PreconditionError(f"模型分类为 {verdict.value}, 不存在核方向套利", "structure_fail")

    m, n = bundle.paths, bundle.grid.steps
    a, c = model.coefficients_on(bundle.grid, bundle.values)
    projected = np.einsum("mnij,mnj->mni", kernel_projector(c, tol), a)
    length = np.linalg.norm(projected, axis=2)
    active = length > KERNEL_FLOOR * (1.0 + np.linalg.norm(a, axis=2))
    theta = np.where(active[..., None], projected / np.where(active, length, 1.0)[..., None], 0.0)
    gain = np.zeros((m, n + 1))
    gain[:, 1:] = np.cumsum(np.einsum("mni,mni->mn", theta, a) * bundle.grid.increments, axis=1)
    worst = float(np.einsum("mni,mnij,mnj->mn", theta, c, theta).max(initial=0.0))

    active_paths = float(np.mean(gain[:, -1] > 0))
    if verdict is None and active_paths <= STRUCTURE_FAIL_FRACTION:
        raise PreconditionError(
            f"核方向收益为正的路径比例 {active_paths:.2%} 未超过 {STRUCTURE_FAIL_FRACTION:.0%}, 结构条件成立",
            "structure_fail",
        )
    if active_paths == 0.0:
        raise PreconditionError("漂移没有核分量, 结构条件成立", "structure_fail")
    logger.info(f"核方向: model={model.name}, 最大 ⟨θ,cθ⟩={worst:.3e}")
    return KernelStrategy(grid=bundle.grid, theta=theta, gain=gain, bundle=bundle, max_quadratic=worst, tol=tol)


def scaled_drift_arbitrage(kernel: KernelStrategy, scales: Sequence[float]) -> WealthFamily:
    """
    财富族 X^{1,kθ} = 1 + k∫⟨θ, dS⟩
    c ≡ 0 时 ∫⟨θ, dS⟩ 即漂移收益, 无风险
    """
    scales = tuple(float(k) for k in scales)
    if not scales:
        raise ValidationError("倍数列表不能为空", "scales")
    if any(k < 0 for k in scales):
        raise ValidationError(f"倍数不能为负: {scales}", "scales", scales)
    integral = stochastic_integral(kernel.theta, kernel.bundle)
    paths = [1.0 + k * integral for k in scales]
    return WealthFamily(
        scales=scales,
        terminal=np.stack([p[:, -1] for p in paths], axis=1),
        minimum=np.stack([p.min(axis=1) for p in paths], axis=1),
        label="kernel",
    )
