"""
第一类套利构造测试
"""

import numpy as np
import pytest

from na1lab.exceptions import PreconditionError, ValidationError
from na1lab.forge.family import NupbrVerdict, WealthFamily, unboundedness_test
from na1lab.forge.kernel import kernel_direction, scaled_drift_arbitrage
from na1lab.forge.ladder import LeverageLadder, truncated_leverage
from na1lab.grid.engine import PathBundle, make_grid
from na1lab.market.catalog import build_model
from na1lab.market.model import MarketModel, simulate
from na1lab.structure.premium import STRUCTURE_FAIL_FRACTION, Na1Verdict, risk_premium


SCALES = (1.0, 4.0, 16.0, 64.0, 256.0, 1024.0)


def _family(terminal, scales=(1.0, 2.0, 3.0), initial=1.0):
    terminal = np.asarray(terminal, dtype=float)
    return WealthFamily(scales=scales, terminal=terminal, minimum=np.zeros_like(terminal), initial=initial)


@pytest.fixture
def drift_kernel():
    model = build_model("pure-drift", {"rate": 1.0, "s0": 0.0})
    bundle = simulate(model, make_grid(1.0, 20), 5, seed=0)
    return kernel_direction(model, bundle)


class TestKernel:
    """测试核方向套利"""

    def test_pure_drift_family(self, drift_kernel):
        """测试无噪声漂移的财富族 X^k_T = 1 + kT"""
        family = scaled_drift_arbitrage(drift_kernel, SCALES)
        np.testing.assert_allclose(family.terminal, np.tile(1.0 + np.array(SCALES), (5, 1)), atol=1e-12)
        np.testing.assert_array_equal(family.minimum, 1.0)
        assert drift_kernel.active_fraction == 1.0
        assert drift_kernel.max_quadratic == 0.0

    def test_ten_times_leverage(self):
        """测试 k = 10, T = 2 时终值为 21"""
        model = build_model("pure-drift")
        kernel = kernel_direction(model, simulate(model, make_grid(2.0, 8), 3, seed=0))
        family = scaled_drift_arbitrage(kernel, (10.0,))
        np.testing.assert_allclose(family.terminal[:, 0], 21.0, atol=1e-12)

    def test_partial_noise(self, unit_grid):
        """测试无噪声资产上的核方向"""
        model = build_model("partial-noise", {"kappa": 0.1})
        kernel = kernel_direction(model, simulate(model, unit_grid, 10, seed=2), verdict=Na1Verdict.STRUCTURE_FAIL)
        np.testing.assert_allclose(kernel.theta[0, 0], [0.0, 1.0], atol=1e-12)
        family = scaled_drift_arbitrage(kernel, (1.0, 10.0))
        np.testing.assert_allclose(family.terminal, np.tile([1.1, 2.0], (10, 1)), atol=1e-10)
        assert kernel.max_quadratic < 1e-20

    def test_rank_deficient(self, unit_grid):
        """测试秩亏模型的核方向收益为 κT"""
        model = build_model("rank-deficient", {"kappa": 1.0})
        kernel = kernel_direction(model, simulate(model, unit_grid, 10, seed=2))
        np.testing.assert_allclose(kernel.gain[:, -1], 1.0, atol=1e-10)
        family = scaled_drift_arbitrage(kernel, (1.0, 5.0))
        np.testing.assert_allclose(family.terminal, np.tile([2.0, 6.0], (10, 1)), atol=1e-8)

    def test_refused_when_na1_holds(self, bs_model, bs_bundle):
        """测试 NA1_OK 或无核分量时拒绝"""
        with pytest.raises(PreconditionError):
            kernel_direction(bs_model, bs_bundle, verdict=Na1Verdict.NA1_OK)
        with pytest.raises(PreconditionError):
            kernel_direction(bs_model, bs_bundle)

    def test_explicit_verdict_other_than_structure_fail(self, drift_kernel):
        """测试显式给出非 STRUCTURE_FAIL 的分类时拒绝"""
        model = build_model("pure-drift")
        bundle = drift_kernel.bundle
        for verdict in (Na1Verdict.NA1_OK, Na1Verdict.MASS_DIVERGES):
            with pytest.raises(PreconditionError) as exc:
                kernel_direction(model, bundle, verdict=verdict)
            assert exc.value.precondition == "structure_fail"

    def test_invalid_scales(self, drift_kernel):
        """测试非法倍数"""
        with pytest.raises(ValidationError):
            scaled_drift_arbitrage(drift_kernel, ())
        with pytest.raises(ValidationError):
            scaled_drift_arbitrage(drift_kernel, (1.0, -2.0))


class TestUnboundedness:
    """测试 NUPBR 检验"""

    def test_kernel_family_unbounded(self, drift_kernel):
        """测试核方向财富族依概率无界"""
        report = unboundedness_test(scaled_drift_arbitrage(drift_kernel, SCALES))
        assert report.verdict is NupbrVerdict.UNBOUNDED
        assert report.to_dict()["largest_scale_probabilities"] == [1.0, 1.0]

    def test_constant_family_bounded(self):
        """测试常数财富族有界"""
        report = unboundedness_test(_family(np.ones((50, 3))))
        assert report.verdict is NupbrVerdict.BOUNDED

    def test_inconclusive(self):
        """测试部分路径超过阈值时无法判定"""
        terminal = np.ones((100, 3))
        terminal[:50] = 4.0
        assert unboundedness_test(_family(terminal)).verdict is NupbrVerdict.INCONCLUSIVE

    def test_decreasing_probability_not_unbounded(self):
        """测试概率随 k 明显下降时不判为无界"""
        terminal = np.full((100, 3), 5.0)
        terminal[:40, 1] = 1.0
        report = unboundedness_test(_family(terminal))
        assert report.verdict is not NupbrVerdict.UNBOUNDED

    def test_frame(self):
        """测试结果表"""
        frame = unboundedness_test(_family(np.ones((10, 3))), (3.5, 1.5)).to_frame()
        assert list(frame.columns) == ["k", "M", "p", "se"]
        assert len(frame) == 6
        assert list(frame["M"][:2]) == [1.5, 3.5]

    def test_preconditions(self):
        """测试前置条件"""
        with pytest.raises(ValidationError):
            unboundedness_test(_family(np.ones((5, 2)), scales=(1.0, 2.0)))
        with pytest.raises(ValidationError):
            unboundedness_test(_family(np.ones((5, 3))), ())
        with pytest.raises(PreconditionError):
            unboundedness_test(_family(np.ones((5, 3)), initial=2.0))
        negative = WealthFamily(scales=(1.0, 2.0, 3.0), terminal=np.ones((5, 3)), minimum=-np.ones((5, 3)))
        with pytest.raises(PreconditionError):
            unboundedness_test(negative)

    def test_family_concat(self):
        """测试财富族拼接"""
        joined = WealthFamily.concat([_family(np.ones((2, 3))), _family(np.full((3, 3), 2.0))])
        assert joined.paths == 5
        np.testing.assert_array_equal(joined.quantiles(1.0), 2.0)
        with pytest.raises(ValidationError):
            WealthFamily.concat([_family(np.ones((2, 3))), _family(np.ones((2, 3)), initial=2.0)])
        with pytest.raises(ValidationError):
            WealthFamily.concat([])

    def test_shape_checked(self):
        """测试终值矩阵形状"""
        with pytest.raises(ValidationError):
            _family(np.ones((5, 2)))


class TestLadder:
    """测试截断杠杆阶梯"""

    def test_black_scholes_ladder(self, bs_report, bs_bundle):
        """测试无截断时质量等于 K_T"""
        ladder = truncated_leverage(bs_report, bs_bundle, (0.1, 1.0, 16.0))
        assert ladder.mass_monotone
        assert ladder.positive
        assert ladder.skipped == (0.1,)
        assert np.isnan(ladder.ratio_median[0])
        np.testing.assert_allclose(ladder.truncated_mass[:, -1], bs_report.mass_terminal, atol=1e-12)
        rows = ladder.rows()
        assert rows[0]["skipped"] and not rows[-1]["skipped"]

    def test_exploding_ladder(self):
        """测试质量发散时 log X / E 接近 1/2"""
        model = build_model("exploding-sharpe", horizon=1.0)
        bundle = simulate(model, make_grid(1.0, 1000), 400, seed=12)
        ladder = truncated_leverage(risk_premium(model, bundle), bundle, SCALES)
        harmonic = sum(1.0 / k for k in range(1, 1001))
        np.testing.assert_allclose(ladder.truncated_mass[:, -1], harmonic, rtol=1e-9)
        # k = 16 截去最后3个节点: |ρ|² = n/j ≤ 256
        np.testing.assert_allclose(ladder.truncated_mass[:, 2], harmonic - 1.0 - 0.5 - 1.0 / 3.0, rtol=1e-9)
        assert ladder.mass_monotone
        assert ladder.ratio_median[2] == pytest.approx(0.5, abs=0.1)
        assert np.median(ladder.log_wealth[:, -1]) > np.median(ladder.log_wealth[:, 0])

    def test_concat_matches_whole(self, bs_model, bs_bundle, bs_report):
        """测试分块构造的阶梯与整体一致"""
        levels = (1.0, 4.0, 16.0)
        whole = truncated_leverage(bs_report, bs_bundle, levels)
        mask = np.arange(bs_bundle.paths) < 700
        parts = []
        for selector in (mask, ~mask):
            part = bs_bundle.select(selector)
            parts.append(truncated_leverage(risk_premium(bs_model, part), part, levels))
        joined = LeverageLadder.concat(parts)
        np.testing.assert_array_equal(joined.truncated_mass, whole.truncated_mass)
        np.testing.assert_array_equal(joined.ratio_median, whole.ratio_median)
        np.testing.assert_array_equal(joined.family.minimum, whole.family.minimum)

    def test_structure_failure_refused(self, unit_grid):
        """测试结构条件不成立时拒绝"""
        model = build_model("pure-drift")
        bundle = simulate(model, unit_grid, 5, seed=0)
        with pytest.raises(PreconditionError):
            truncated_leverage(risk_premium(model, bundle), bundle)

    def test_invalid_levels(self, bs_report, bs_bundle):
        """测试非法截断水平"""
        for levels in ((), (0.0, 1.0), (4.0, 1.0)):
            with pytest.raises(ValidationError):
                truncated_leverage(bs_report, bs_bundle, levels)


def _switching_model():
    """S < 0 处无噪声、S ≥ 0 处单位噪声, 漂移恒为1"""
    return MarketModel(
        name="switching",
        dim=1,
        initial=np.array([1.0]),
        drift=lambda t, s: np.ones_like(s),
        covariance=lambda t, s: np.where(s < 0, 0.0, 1.0)[..., None],
    )


def _switching_bundle(negative: int, paths: int = 200):
    grid = make_grid(1.0, 10)
    values = np.ones((paths, grid.steps + 1, 1))
    values[:negative] = -1.0
    return PathBundle(grid=grid, values=values, seed=0, stream_ids=np.arange(paths))


class TestKernelVerdict:
    """测试未给出分类时由核方向收益推断结构条件"""

    def test_sparse_kernel_refused(self):
        """测试核方向收益为正的路径比例不超过阈值时拒绝"""
        model, bundle = _switching_model(), _switching_bundle(1)
        with pytest.raises(PreconditionError) as exc:
            kernel_direction(model, bundle)
        assert exc.value.precondition == "structure_fail"

    def test_sparse_kernel_with_verdict(self):
        """测试显式 STRUCTURE_FAIL 时接受少量核方向路径"""
        kernel = kernel_direction(_switching_model(), _switching_bundle(1), verdict=Na1Verdict.STRUCTURE_FAIL)
        np.testing.assert_allclose(kernel.gain[0, -1], 1.0, atol=1e-12)
        np.testing.assert_array_equal(kernel.gain[1:, -1], 0.0)
        assert kernel.max_quadratic == 0.0

    def test_frequent_kernel_derived(self):
        """测试核方向路径比例超过阈值时无需显式分类"""
        kernel = kernel_direction(_switching_model(), _switching_bundle(5))
        assert float(np.mean(kernel.gain[:, -1] > 0)) == pytest.approx(5 / 200)
        assert kernel.active_fraction > STRUCTURE_FAIL_FRACTION
