"""
风险溢价与结构条件
求解 A = ∫(cρ)dG: ρ = c†a (Moore-Penrose伪逆), 残差 r = a - cρ
质量泛函 K_t = Σ⟨ρ, cρ⟩Δt, 夏普比率 λ = c^{1/2}ρ

时钟取 G = ∫trace(c)dt: c_G = c/g, a_G = a/g, ΔG = gΔt
c_G ρ = a_G 与 cρ = a 的伪逆解相同, ⟨ρ, c_Gρ⟩ΔG = ⟨ρ, cρ⟩Δt
"""

import logging
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from na1lab.exceptions import ValidationError
from na1lab.grid.engine import PathBundle, TimeGrid, collect_chunks
from na1lab.market.model import MarketModel
from na1lab.utils.linalg import check_psd, psd_sqrt, symmetric_eigh


logger = logging.getLogger(__name__)


# 秩容差: 低于 tol * λ_max 的特征值视为0
DEFAULT_RANK_TOL = 1e-10

# 结构容差: ∫‖r‖²dt > STRUCTURE_EPS * ∫(1 + ‖a‖²)dt 时该路径结构失败
STRUCTURE_EPS = 1e-8

# 结构失败路径比例超过该值时判定 STRUCTURE_FAIL
STRUCTURE_FAIL_FRACTION = 0.01

# 单块扫描的 (m, n, d, d) 数组单元上限
SCAN_CELLS = 1 << 22


class Na1Verdict(str, Enum):
    """NA₁ 分类结果"""

    NA1_OK = "NA1_OK"
    STRUCTURE_FAIL = "STRUCTURE_FAIL"
    MASS_DIVERGES = "MASS_DIVERGES"
    INCONCLUSIVE = "INCONCLUSIVE"


def pseudo_solve(c: np.ndarray, a: np.ndarray, tol: float = DEFAULT_RANK_TOL) -> Tuple[np.ndarray, np.ndarray]:
    """
    伪逆求解 ρ = c†a, 残差 r = a - cρ
    cρ 是 a 在 range(c) 上的正交投影

    :param c: (..., d, d) 对称半正定矩阵
    :param a: (..., d) 向量
    :param tol: 相对秩容差
    :return: (ρ, 残差)
    """
    c = np.asarray(c, dtype=float)
    a = np.asarray(a, dtype=float)
    if a.shape != c.shape[:-1]:
        raise ValidationError(f"a 的形状 {a.shape} 与 c 的形状 {c.shape} 不匹配", "a", a.shape)
    if tol < 0:
        raise ValidationError(f"秩容差不能为负: {tol}", "tol", tol)

    if c.shape[-2:] == (1, 1):
        # 一维: 正方差直接相除
        var = c[..., 0]
        safe = np.where(var > 0, var, 1.0)
        rho = np.where(var > 0, a / safe, 0.0)
    else:
        w, v = symmetric_eigh(c)
        w_max = w[..., -1:]
        keep = (w > tol * w_max) & (w_max > 0)
        inv = np.where(keep, 1.0 / np.where(keep, w, 1.0), 0.0)
        coords = np.einsum("...ji,...j->...i", v, a)
        rho = np.einsum("...ij,...j->...i", v, inv * coords)
    residual = a - np.einsum("...ij,...j->...i", c, rho)
    return rho, residual


@dataclass(frozen=True, eq=False)
class _Scan:
    """单个路径块的逐节点扫描结果"""

    mass: np.ndarray
    residual_energy: np.ndarray
    drift_energy: np.ndarray
    clock: Optional[np.ndarray] = None
    rho: Optional[np.ndarray] = None
    residual: Optional[np.ndarray] = None
    sharpe: Optional[np.ndarray] = None
    density: Optional[np.ndarray] = None


def _scan(model: MarketModel, values: np.ndarray, grid: TimeGrid, tol: float, keep: bool) -> _Scan:
    """
    在路径与时间两个维度上同时向量化求解
    只使用左端点 t_0..t_{n-1}; 累计量按时间顺序逐项相加
    """
    m, n = values.shape[0], grid.steps
    dt = grid.increments
    a, c = model.coefficients_on(grid, values)
    if values.shape[2] > 1 or np.any(c < 0):
        check_psd(c)
    rho, res = pseudo_solve(c, a, tol)
    quad = np.maximum(np.einsum("mni,mnij,mnj->mn", rho, c, rho), 0.0)

    mass = np.zeros((m, n + 1))
    mass[:, 1:] = np.cumsum(quad * dt, axis=1)
    residual_energy = (np.einsum("mni,mni->mn", res, res) * dt).sum(axis=1)
    drift_energy = ((1.0 + np.einsum("mni,mni->mn", a, a)) * dt).sum(axis=1)
    if not keep:
        return _Scan(mass=mass, residual_energy=residual_energy, drift_energy=drift_energy)

    clock = np.zeros((m, n + 1))
    clock[:, 1:] = np.cumsum(np.trace(c, axis1=2, axis2=3) * dt, axis=1)
    return _Scan(
        mass=mass,
        residual_energy=residual_energy,
        drift_energy=drift_energy,
        clock=clock,
        rho=rho,
        residual=res,
        sharpe=np.einsum("mnij,mnj->mni", psd_sqrt(c), rho),
        density=quad,
    )


def scan_rows(grid: TimeGrid, dim: int, chunk: int) -> int:
    """每块扫描的路径数, 使 (m, n, d, d) 数组不超过 SCAN_CELLS 个单元"""
    return max(1, min(int(chunk), SCAN_CELLS // (grid.steps * dim * dim)))


def scan_bundle(
    model: MarketModel,
    bundle: PathBundle,
    tol: float = DEFAULT_RANK_TOL,
    keep: bool = False,
    workers: int = 1,
    chunk: int = 4096,
) -> _Scan:
    """按路径块并行扫描并按顺序拼接, 逐路径结果与分块方式无关"""
    parts = collect_chunks(
        lambda start, stop: _scan(model, bundle.values[start:stop], bundle.grid, tol, keep),
        bundle.paths,
        scan_rows(bundle.grid, bundle.dim, chunk),
        workers,
    )

    def _join(name: str) -> Optional[np.ndarray]:
        arrays = [getattr(part, name) for part in parts]
        return None if arrays[0] is None else np.concatenate(arrays, axis=0)

    return _Scan(**{item.name: _join(item.name) for item in fields(_Scan)})


@dataclass(frozen=True, eq=False)
class RiskPremiumReport:
    """
    风险溢价报告
    rho / residual / sharpe 在左端点 t_0..t_{n-1} 上取值, 形状 (m, n, d)
    mass / clock 为累计路径, 形状 (m, n+1), 起点为0
    """

    grid: TimeGrid
    rho: np.ndarray = field(repr=False)
    residual: np.ndarray = field(repr=False)
    sharpe: np.ndarray = field(repr=False)
    mass: np.ndarray = field(repr=False)
    clock: np.ndarray = field(repr=False)

    # 逐节点 ⟨ρ, cρ⟩, 形状 (m, n); mass 为 density * Δt 的顺序累加
    density: np.ndarray = field(repr=False)

    # 逐路径 ∫‖r‖²dt 与 ∫(1 + ‖a‖²)dt
    residual_energy: np.ndarray = field(repr=False)
    drift_energy: np.ndarray = field(repr=False)

    tol: float = DEFAULT_RANK_TOL
    classification: Optional[Na1Verdict] = None
    diagnostics: Optional[object] = field(default=None, repr=False)

    @property
    def paths(self) -> int:
        return int(self.mass.shape[0])

    @property
    def mass_terminal(self) -> np.ndarray:
        """逐路径 K_T"""
        return self.mass[:, -1]

    @property
    def sharpe_norm(self) -> np.ndarray:
        """‖λ‖, 形状 (m, n)"""
        return np.linalg.norm(self.sharpe, axis=2)

    @property
    def structure_failures(self) -> np.ndarray:
        """逐路径结构失败标记"""
        return self.residual_energy > STRUCTURE_EPS * self.drift_energy

    @property
    def structure_fail_fraction(self) -> float:
        return float(self.structure_failures.mean()) if self.paths else 0.0

    @property
    def structure_holds(self) -> bool:
        return self.structure_fail_fraction <= STRUCTURE_FAIL_FRACTION

    def with_classification(self, verdict: Na1Verdict, diagnostics: Optional[object] = None) -> "RiskPremiumReport":
        return replace(self, classification=verdict, diagnostics=diagnostics)

    def quantile_frame(self, quantiles: Sequence[float] = (0.05, 0.5, 0.95)) -> pd.DataFrame:
        """
        λ_t 与 K_t 的分位数时间序列
        λ 取左端点值, 最后一个节点沿用前一节点
        """
        norm = self.sharpe_norm
        norm = np.concatenate([norm, norm[:, -1:]], axis=1)
        frame = pd.DataFrame({"t": self.grid.nodes})
        for q in quantiles:
            label = f"q{int(round(q * 100)):02d}"
            frame[f"sharpe_{label}"] = np.quantile(norm, q, axis=0)
            frame[f"mass_{label}"] = np.quantile(self.mass, q, axis=0)
        return frame

    def summary(self) -> dict:
        """报告摘要"""
        terminal = self.mass_terminal
        return {
            "paths": self.paths,
            "steps": self.grid.steps,
            "classification": self.classification.value if self.classification else None,
            "structure_fail_fraction": self.structure_fail_fraction,
            "mass_terminal_median": float(np.median(terminal)),
            "mass_terminal_mean": float(np.mean(terminal)),
            "mass_terminal_max": float(np.max(terminal)),
            "sharpe_median": float(np.median(self.sharpe_norm)),
        }


def risk_premium(
    model: MarketModel,
    bundle: PathBundle,
    tol: float = DEFAULT_RANK_TOL,
    workers: int = 1,
    chunk: int = 4096,
) -> RiskPremiumReport:
    """
    逐节点伪逆求解并累计质量泛函
    :param model: 市场模型
    :param bundle: 由该模型模拟的 S 路径束
    :return: 风险溢价报告(单一网格无法判断发散, classification 只在结构失败时填写)
    """
    if bundle.dim != model.dim:
        raise ValidationError(f"路径维数 {bundle.dim} 与模型维数 {model.dim} 不一致", "bundle")
    scan = scan_bundle(model, bundle, tol, keep=True, workers=workers, chunk=chunk)
    report = RiskPremiumReport(
        grid=bundle.grid,
        rho=scan.rho,
        residual=scan.residual,
        sharpe=scan.sharpe,
        mass=scan.mass,
        clock=scan.clock,
        density=scan.density,
        residual_energy=scan.residual_energy,
        drift_energy=scan.drift_energy,
        tol=tol,
    )
    if not report.structure_holds:
        report = report.with_classification(Na1Verdict.STRUCTURE_FAIL)
    logger.debug(
        f"风险溢价: model={model.name}, m={bundle.paths}, 结构失败比例={report.structure_fail_fraction:.4f}"
    )
    return report
