"""
结构条件与 NA₁ 分类测试
"""

import time
from dataclasses import replace

import numpy as np
import pytest

from na1lab.exceptions import ValidationError
from na1lab.grid.engine import make_grid
from na1lab.market.catalog import build_model
from na1lab.market.model import simulate
from na1lab.structure.classify import classify_na1, decide_verdict, mass_ratio
from na1lab.structure.premium import SCAN_CELLS, Na1Verdict, pseudo_solve, risk_premium, scan_rows


def _harmonic(n: int) -> float:
    return float(sum(1.0 / k for k in range(1, n + 1)))


class TestPseudoSolve:
    """测试伪逆求解"""

    def test_full_rank(self):
        """测试满秩时残差为零"""
        c = np.array([[2.0, 0.5], [0.5, 1.0]])
        a = np.array([1.0, -1.0])
        rho, residual = pseudo_solve(c, a)
        np.testing.assert_allclose(c @ rho, a, atol=1e-12)
        np.testing.assert_allclose(residual, 0.0, atol=1e-12)

    def test_kernel_component(self):
        """测试漂移在核方向上的分量进入残差"""
        c = np.array([[1.0, 0.0], [0.0, 0.0]])
        rho, residual = pseudo_solve(c, np.array([2.0, 3.0]))
        np.testing.assert_allclose(rho, [2.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(residual, [0.0, 3.0], atol=1e-12)

    def test_one_dimensional_zero_variance(self):
        """测试一维零方差"""
        rho, residual = pseudo_solve(np.zeros((3, 1, 1)), np.array([[1.0], [0.0], [-2.0]]))
        np.testing.assert_array_equal(rho, 0.0)
        np.testing.assert_array_equal(residual[:, 0], [1.0, 0.0, -2.0])

    def test_shape_mismatch(self):
        """测试形状不匹配"""
        with pytest.raises(ValidationError):
            pseudo_solve(np.eye(2), np.ones(3))

    def test_negative_tolerance(self):
        """测试负容差"""
        with pytest.raises(ValidationError):
            pseudo_solve(np.eye(2), np.ones(2), tol=-1.0)


class TestRiskPremium:
    """测试风险溢价报告"""

    def test_black_scholes_constants(self, bs_report):
        """测试几何布朗运动 λ = 0.25, K_T = 0.0625"""
        np.testing.assert_allclose(bs_report.sharpe_norm, 0.25, atol=1e-10)
        np.testing.assert_allclose(bs_report.mass_terminal, 0.0625, atol=1e-10)
        assert bs_report.structure_holds
        assert bs_report.classification is None

    def test_mass_is_nondecreasing(self, bs_report):
        """测试质量路径单调不减"""
        assert (np.diff(bs_report.mass, axis=1) >= 0).all()
        np.testing.assert_array_equal(bs_report.mass[:, 0], 0.0)

    def test_clock(self, bs_report, bs_bundle):
        """测试时钟 ∫σ²S²dt 为正"""
        assert bs_report.clock.shape == (bs_bundle.paths, bs_bundle.grid.steps + 1)
        assert (bs_report.clock[:, -1] > 0).all()

    def test_pure_drift_fails_structure(self):
        """测试无噪声漂移模型结构条件不成立"""
        grid = make_grid(1.0, 20)
        model = build_model("pure-drift")
        report = risk_premium(model, simulate(model, grid, 10, seed=0))
        assert not report.structure_holds
        assert report.structure_fail_fraction == 1.0
        assert report.classification is Na1Verdict.STRUCTURE_FAIL
        np.testing.assert_array_equal(report.mass_terminal, 0.0)

    def test_partial_noise(self, unit_grid):
        """测试第二资产无噪声时 κ 决定结构条件"""
        tilted = build_model("partial-noise", {"kappa": 0.1})
        flat = build_model("partial-noise", {"kappa": 0.0})
        assert not risk_premium(tilted, simulate(tilted, unit_grid, 20, seed=1)).structure_holds
        assert risk_premium(flat, simulate(flat, unit_grid, 20, seed=1)).structure_holds

    def test_rank_deficient(self, unit_grid):
        """测试秩亏模型的核分量"""
        model = build_model("rank-deficient")
        report = risk_premium(model, simulate(model, unit_grid, 20, seed=2))
        assert report.classification is Na1Verdict.STRUCTURE_FAIL
        clean = build_model("rank-deficient", {"kappa": 0.0})
        assert risk_premium(clean, simulate(clean, unit_grid, 20, seed=2)).structure_holds

    def test_exploding_mass_is_harmonic(self):
        """测试爆炸夏普比率模型的离散质量为调和数"""
        model = build_model("exploding-sharpe", horizon=1.0)
        for steps in (10, 100):
            grid = make_grid(1.0, steps)
            report = risk_premium(model, simulate(model, grid, 5, seed=3))
            np.testing.assert_allclose(report.mass_terminal, _harmonic(steps), rtol=1e-12)

    def test_workers_do_not_change_report(self, bs_model, bs_bundle):
        """测试线程数不影响结果"""
        single = risk_premium(bs_model, bs_bundle, workers=1, chunk=300)
        multi = risk_premium(bs_model, bs_bundle, workers=3, chunk=300)
        np.testing.assert_array_equal(single.mass, multi.mass)

    def test_quantile_frame(self, bs_report):
        """测试分位数表"""
        frame = bs_report.quantile_frame()
        assert list(frame.columns[:3]) == ["t", "sharpe_q05", "mass_q05"]
        assert len(frame) == bs_report.grid.steps + 1

    def test_dimension_mismatch(self, bs_bundle):
        """测试路径维数与模型不一致"""
        with pytest.raises(ValidationError):
            risk_premium(build_model("correlated-bs"), bs_bundle)


class TestDecideVerdict:
    """测试判定规则"""

    def test_stable_masses(self):
        """测试稳定的质量判为 NA1_OK"""
        assert decide_verdict([0.0625, 0.0625, 0.0625], 0.0) == (Na1Verdict.NA1_OK, "stable")

    def test_zero_masses(self):
        """测试全零质量判为 NA1_OK"""
        assert decide_verdict([0.0, 0.0], 0.0)[0] is Na1Verdict.NA1_OK

    def test_structure_has_priority(self):
        """测试结构失败优先"""
        assert decide_verdict([1.0, 100.0], 0.5) == (Na1Verdict.STRUCTURE_FAIL, "structure")

    def test_geometric_growth(self):
        """测试比值规则"""
        assert decide_verdict([1.0, 10.0, 100.0], 0.0) == (Na1Verdict.MASS_DIVERGES, "ratio")

    def test_harmonic_growth(self):
        """测试对数发散由增量规则识别"""
        medians = [_harmonic(10), _harmonic(100), _harmonic(1000)]
        assert medians[0] == pytest.approx(2.929, abs=1e-3)
        assert medians[1] == pytest.approx(5.187, abs=1e-3)
        assert medians[2] == pytest.approx(7.485, abs=1e-3)
        assert decide_verdict(medians, 0.0) == (Na1Verdict.MASS_DIVERGES, "increment")

    def test_two_levels_use_ratio_only(self):
        """测试两层时只用比值规则"""
        assert decide_verdict([2.929, 5.187], 0.0) == (Na1Verdict.MASS_DIVERGES, "ratio")
        assert decide_verdict([2.929, 4.0], 0.0) == (Na1Verdict.NA1_OK, "stable")

    def test_inconclusive(self):
        """测试质量明显下降时无法判定"""
        verdict, rule = decide_verdict([3.0, 1.0], 0.0)
        assert verdict is Na1Verdict.INCONCLUSIVE
        assert rule is None

    def test_single_level_rejected(self):
        """测试层级数不足"""
        with pytest.raises(ValidationError):
            decide_verdict([1.0], 0.0)

    def test_mass_ratio_floor(self):
        """测试零质量比值"""
        assert mass_ratio(0.0, 0.0) == 1.0
        assert mass_ratio(0.0, 1.0) == float("inf")
        assert mass_ratio(2.0, 3.0) == 1.5


class TestClassify:
    """测试多层级分类"""

    def test_black_scholes(self):
        """测试几何布朗运动判为 NA1_OK"""
        result = classify_na1(build_model("black-scholes"), make_grid(1.0, 40), 200, seed=7, levels=2, factor=4)
        assert result.verdict is Na1Verdict.NA1_OK
        assert result.diagnostics.steps == (10, 40)
        assert result.diagnostics.median_mass[0] == pytest.approx(0.0625, abs=1e-10)

    def test_pure_drift(self):
        """测试无噪声漂移判为 STRUCTURE_FAIL"""
        result = classify_na1(build_model("pure-drift"), make_grid(1.0, 10), 20, seed=0, levels=2, factor=2)
        assert result.verdict is Na1Verdict.STRUCTURE_FAIL
        assert result.diagnostics.rule == "structure"

    def test_exploding_sharpe(self):
        """测试爆炸夏普比率判为 MASS_DIVERGES"""
        model = build_model("exploding-sharpe", horizon=1.0)
        result = classify_na1(model, make_grid(1.0, 1000), 30, seed=1, levels=3, factor=10, chunk_paths=10)
        assert result.verdict is Na1Verdict.MASS_DIVERGES
        np.testing.assert_allclose(result.diagnostics.median_mass, [_harmonic(10), _harmonic(100), _harmonic(1000)])

    def test_chunking_does_not_change_result(self):
        """测试分块大小不影响结果"""
        model = build_model("bessel3")
        grid = make_grid(1.0, 8)
        whole = classify_na1(model, grid, 60, seed=5, levels=2, factor=2)
        chunked = classify_na1(model, grid, 60, seed=5, levels=2, factor=2, chunk_paths=7, workers=2)
        assert whole.to_dict() == chunked.to_dict()

    def test_levels_validated(self):
        """测试层级数非法"""
        with pytest.raises(ValidationError):
            classify_na1(build_model("black-scholes"), make_grid(1.0, 10), 10, seed=0, levels=1)

    def test_grid_is_finest_level(self):
        """测试配置网格为最细层级, 步数必须整除"""
        result = classify_na1(build_model("brownian"), make_grid(1.0, 100), 20, seed=2, levels=3, factor=10)
        assert result.diagnostics.steps == (1, 10, 100)
        with pytest.raises(ValidationError):
            classify_na1(build_model("brownian"), make_grid(1.0, 50), 20, seed=2, levels=3, factor=10)


class TestVectorizedScan:
    """测试整条路径一次求值与逐节点求值一致"""

    def test_matches_stepwise_coefficients(self, unit_grid):
        """测试时间齐次模型的两种求值方式结果相同"""
        model = build_model("correlated-bs")
        stepwise = replace(model, time_homogeneous=False)
        bundle = simulate(model, unit_grid, 50, seed=4)
        fast = risk_premium(model, bundle)
        slow = risk_premium(stepwise, bundle)
        for name in ("rho", "residual", "sharpe", "mass", "clock", "density"):
            np.testing.assert_allclose(getattr(fast, name), getattr(slow, name), rtol=1e-13, atol=1e-15)

    def test_scan_rows_bounded(self):
        """测试扫描块大小受单元上限约束"""
        assert scan_rows(make_grid(1.0, 1000), 1, 1 << 20) == SCAN_CELLS // 1000
        assert scan_rows(make_grid(1.0, 10), 2, 64) == 64
        assert scan_rows(make_grid(1.0, SCAN_CELLS // 4), 3, 64) == 1


@pytest.mark.slow
class TestClassifyAtScale:
    """大样本分类测试"""

    def test_black_scholes_default_levels(self):
        """测试 n=1000, m=100000 的默认三层分类在一分钟内完成"""
        started = time.perf_counter()
        result = classify_na1(build_model("black-scholes"), make_grid(1.0, 1000), 100_000, seed=0)
        elapsed = time.perf_counter() - started
        assert result.verdict is Na1Verdict.NA1_OK
        assert result.diagnostics.steps == (10, 100, 1000)
        np.testing.assert_allclose(result.diagnostics.median_mass, 0.0625, atol=1e-10)
        assert elapsed < 60.0

    @pytest.mark.parametrize(
        "name, levels, expected",
        [
            ("black-scholes", 2, Na1Verdict.NA1_OK),
            ("correlated-bs", 2, Na1Verdict.NA1_OK),
            ("bessel3", 2, Na1Verdict.NA1_OK),
            ("pure-drift", 2, Na1Verdict.STRUCTURE_FAIL),
            ("partial-noise", 2, Na1Verdict.STRUCTURE_FAIL),
            ("exploding-sharpe", 3, Na1Verdict.MASS_DIVERGES),
        ],
    )
    def test_stable_across_seeds(self, name, levels, expected):
        """测试5个种子下分类结果一致"""
        model = build_model(name, horizon=1.0)
        for seed in range(5):
            result = classify_na1(model, make_grid(1.0, 1000), 500, seed=seed, levels=levels, factor=10)
            assert result.verdict is expected, f"seed={seed}"
