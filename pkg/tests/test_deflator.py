"""
紧缩因子、财富过程、鞅检验与局部化测试
"""

import numpy as np
import pytest

from na1lab.deflator.deflator import (
    DUALITY_TOL,
    NumerairePortfolio,
    build_deflator,
    numeraire_portfolio,
)
from na1lab.deflator.localization import (
    LocalizationSamples,
    first_passage,
    localization_demo,
    survival_trend,
    validate_levels,
)
from na1lab.deflator.testing import (
    MartingaleSamples,
    checkpoint_indices,
    deflated_wealth_check,
    martingale_test,
    stopped,
)
from na1lab.deflator.wealth import (
    StrategyKind,
    StrategySpec,
    constant_strategy,
    random_fractional_strategies,
    wealth,
)
from na1lab.exceptions import PreconditionError, ValidationError
from na1lab.grid.engine import make_grid
from na1lab.market.catalog import build_model
from na1lab.market.model import simulate
from na1lab.structure.premium import Na1Verdict, risk_premium


@pytest.fixture
def bs_ok(bs_report):
    return bs_report.with_classification(Na1Verdict.NA1_OK)


@pytest.fixture
def bessel_inverse(unit_grid):
    """Y = s0/S, 三维Bessel过程的严格局部鞅"""
    bundle = simulate(build_model("bessel3"), unit_grid, 4000, seed=21)
    return 1.0 / bundle.values[:, :, 0]


class TestDeflator:
    """测试紧缩因子构造"""

    def test_positive_and_starts_at_one(self, bs_ok, bs_bundle):
        """测试 Y > 0 且 Y_0 = 1"""
        deflator = build_deflator(bs_ok, bs_bundle)
        assert deflator.positive
        np.testing.assert_array_equal(deflator.values[:, 0], 1.0)
        assert not deflator.flagged

    def test_unclassified_is_flagged(self, bs_report, bs_bundle):
        """测试未分类时置位标记"""
        deflator = build_deflator(bs_report, bs_bundle)
        assert deflator.flagged
        assert deflator.summary()["classification"] is None

    def test_structure_failure_refused(self, unit_grid):
        """测试结构条件不成立时拒绝构造"""
        model = build_model("pure-drift")
        bundle = simulate(model, unit_grid, 5, seed=0)
        with pytest.raises(PreconditionError) as exc:
            build_deflator(risk_premium(model, bundle), bundle)
        assert exc.value.precondition == "structure_condition"

    def test_bundle_mismatch(self, bs_report, bs_model, unit_grid):
        """测试报告与路径束不匹配"""
        other = simulate(bs_model, unit_grid, 10, seed=1)
        with pytest.raises(ValidationError):
            build_deflator(bs_report, other)

    def test_black_scholes_is_martingale(self, bs_ok, bs_bundle):
        """测试几何布朗运动的紧缩因子通过鞅检验"""
        deflator = build_deflator(bs_ok, bs_bundle)
        report = martingale_test(deflator.values, bs_bundle.grid)
        assert report.passed
        assert not report.strict
        assert deflator.terminal_mean == pytest.approx(1.0, abs=5 * deflator.terminal_se)

    def test_bessel_deflator_is_inverse_price(self, unit_grid):
        """测试Bessel过程的紧缩因子逐路径等于 s0/S"""
        model = build_model("bessel3")
        bundle = simulate(model, unit_grid, 4000, seed=6)
        report = risk_premium(model, bundle)
        deflator = build_deflator(report, bundle, model)
        assert deflator.positive
        np.testing.assert_array_equal(deflator.values[:, 0], 1.0)
        np.testing.assert_allclose(deflator.values * bundle.values[:, :, 0], 1.0, rtol=1e-12)
        expected = model.closed("deflator_mean", 1.0)
        assert deflator.terminal_mean == pytest.approx(expected, abs=4 * deflator.terminal_se)

    def test_model_without_closed_form(self, bs_ok, bs_bundle, bs_model):
        """测试没有闭式紧缩因子的模型使用左端点和"""
        with_model = build_deflator(bs_ok, bs_bundle, bs_model)
        np.testing.assert_array_equal(with_model.values, build_deflator(bs_ok, bs_bundle).values)
        assert with_model.crossing is None

    def test_deflated_price_is_martingale(self, bs_ok, bs_bundle):
        """测试几何布朗运动的 Y·S 通过鞅检验"""
        deflator = build_deflator(bs_ok, bs_bundle)
        report = martingale_test(deflator.values * bs_bundle.values[:, :, 0], bs_bundle.grid)
        assert report.passed
        assert not report.strict


class TestNumeraire:
    """测试计价组合"""

    def test_duality(self, bs_ok, bs_bundle):
        """测试 Y·X 在每个节点上与1的偏差不超过舍入容差"""
        portfolio = numeraire_portfolio(bs_ok, bs_bundle)
        assert portfolio.duality_holds
        assert portfolio.duality_gap <= DUALITY_TOL
        assert portfolio.summary()["duality_holds"] is True

    def test_duality_detects_mismatch(self, bs_ok, bs_bundle):
        """测试计价组合与紧缩因子不对偶时检查失败"""
        portfolio = numeraire_portfolio(bs_ok, bs_bundle)
        skewed = NumerairePortfolio(values=portfolio.values * (1.0 + 1e-9), deflator=portfolio.deflator)
        assert not skewed.duality_holds
        assert skewed.duality_gap == pytest.approx(1e-9, rel=1e-3)

    def test_matches_exponential_wealth(self, bs_ok, bs_bundle, bs_model):
        """测试计价组合等于持有 ρ 的 exponential 财富"""
        portfolio = numeraire_portfolio(bs_ok, bs_bundle)
        spec = StrategySpec(StrategyKind.RELATIVE, bs_ok.rho, 1.0, "exponential")
        np.testing.assert_allclose(wealth(spec, bs_bundle, bs_model).values, portfolio.values, rtol=1e-12)

    def test_requires_na1_ok(self, bs_report, bs_bundle):
        """测试未分类为 NA1_OK 时拒绝"""
        with pytest.raises(PreconditionError):
            numeraire_portfolio(bs_report, bs_bundle)


class TestWealth:
    """测试财富过程"""

    def test_absolute_buy_and_hold(self, bs_bundle):
        """测试买入持有一单位资产"""
        result = wealth(constant_strategy(StrategyKind.ABSOLUTE, [1.0], capital=1.0), bs_bundle)
        np.testing.assert_allclose(result.terminal, bs_bundle.values[:, -1, 0], atol=1e-12)
        assert result.admissible

    def test_fractional_full_investment(self, bs_bundle):
        """测试全仓比例策略的 simple 格式等于价格比"""
        result = wealth(constant_strategy(StrategyKind.FRACTIONAL, [1.0], capital=2.0), bs_bundle)
        np.testing.assert_allclose(result.terminal, 2.0 * bs_bundle.values[:, -1, 0], rtol=1e-10)

    def test_exponential_zero_position(self, bs_bundle, bs_model):
        """测试零仓位的 exponential 财富为常数"""
        spec = constant_strategy(StrategyKind.FRACTIONAL, [0.0], capital=3.0, scheme="exponential")
        np.testing.assert_array_equal(wealth(spec, bs_bundle, bs_model).values, 3.0)

    def test_exponential_requires_model(self, bs_bundle):
        """测试 exponential 格式需要模型"""
        spec = constant_strategy(StrategyKind.FRACTIONAL, [0.5], scheme="exponential")
        with pytest.raises(ValidationError):
            wealth(spec, bs_bundle)

    def test_crossing_flagged(self, unit_grid):
        """测试财富跌破0的路径被标记"""
        bundle = simulate(build_model("brownian"), unit_grid, 200, seed=3)
        result = wealth(constant_strategy(StrategyKind.ABSOLUTE, [1.0], capital=0.5), bundle)
        assert not result.admissible
        assert 0 < result.crossed_count < 200

    def test_fractional_zero_price(self, unit_grid):
        """测试比例策略遇到零价格"""
        bundle = simulate(build_model("brownian"), unit_grid, 5, seed=3)
        with pytest.raises(ValidationError):
            wealth(constant_strategy(StrategyKind.FRACTIONAL, [1.0]), bundle)

    def test_invalid_specs(self):
        """测试非法策略"""
        with pytest.raises(ValidationError):
            constant_strategy(StrategyKind.ABSOLUTE, [1.0], capital=-1.0)
        with pytest.raises(ValidationError):
            constant_strategy(StrategyKind.ABSOLUTE, [1.0], scheme="exponential")
        with pytest.raises(ValidationError):
            constant_strategy(StrategyKind.RELATIVE, [1.0], scheme="implicit")

    def test_random_strategies(self, bs_bundle, bs_model):
        """测试随机比例策略可复现且财富为正"""
        first = random_fractional_strategies(3, 1, seed=4)
        second = random_fractional_strategies(3, 1, seed=4)
        assert [s.name for s in first] == ["random-0", "random-1", "random-2"]
        for a, b in zip(first, second):
            np.testing.assert_array_equal(
                wealth(a, bs_bundle, bs_model).values, wealth(b, bs_bundle, bs_model).values
            )
            assert (wealth(a, bs_bundle, bs_model).values > 0).all()
        with pytest.raises(ValidationError):
            random_fractional_strategies(0, 1, seed=4)

    def test_deflated_wealth_is_supermartingale(self, bs_ok, bs_bundle, bs_model):
        """测试紧缩后财富的上鞅信号"""
        deflator = build_deflator(bs_ok, bs_bundle)
        for spec in random_fractional_strategies(3, 1, seed=8):
            check = deflated_wealth_check(deflator, wealth(spec, bs_bundle, bs_model))
            assert check.passed
            assert check.initial == 1.0


class TestMartingaleTest:
    """测试鞅检验"""

    def test_checkpoints(self):
        """测试检查点位置"""
        np.testing.assert_array_equal(checkpoint_indices(100, 8), [11, 22, 33, 44, 56, 67, 78, 89, 100])
        np.testing.assert_array_equal(checkpoint_indices(3, 8), [1, 2, 3])

    def test_stopped(self):
        """测试停止过程"""
        values = np.array([[0.0, 1.0, 2.0, 3.0], [0.0, -1.0, -2.0, -3.0]])
        np.testing.assert_array_equal(stopped(values, np.array([1, 9])), [[0, 1, 1, 1], [0, -1, -2, -3]])
        with pytest.raises(ValidationError):
            stopped(values, np.array([1]))

    def test_constant_process(self, unit_grid):
        """测试常数过程通过检验且无亏损"""
        report = martingale_test(np.ones((50, 101)), unit_grid)
        assert report.passed
        assert report.deficit == 0.0
        assert not report.strict

    def test_bessel_strictness(self, bessel_inverse, unit_grid):
        """测试 1/S 的期望亏损约为 1 - (2Φ(1) - 1)"""
        report = martingale_test(bessel_inverse, unit_grid)
        assert not report.passed
        assert report.strict
        assert report.deficit == pytest.approx(1.0 - 0.682689, abs=5 * report.deficit_se)

    def test_samples_concat(self, bessel_inverse, unit_grid):
        """测试分块样本拼接与整体一致"""
        whole = MartingaleSamples.from_paths(bessel_inverse, unit_grid)
        parts = [MartingaleSamples.from_paths(bessel_inverse[i : i + 1000], unit_grid) for i in range(0, 4000, 1000)]
        joined = MartingaleSamples.concat(parts)
        np.testing.assert_array_equal(joined.samples, whole.samples)
        assert martingale_test(joined).to_dict() == martingale_test(whole).to_dict()

    def test_invalid_inputs(self, unit_grid):
        """测试非法输入"""
        with pytest.raises(ValidationError):
            martingale_test(np.ones((5, 101)), unit_grid, alpha=1.5)
        with pytest.raises(ValidationError):
            martingale_test(np.ones((5, 101)))
        with pytest.raises(ValidationError):
            martingale_test(np.arange(10.0).reshape(5, 2), make_grid(1.0, 1))
        with pytest.raises(ValidationError):
            MartingaleSamples.concat([])


class TestLocalization:
    """测试局部化与质量分解"""

    def test_first_passage(self):
        """测试首达时刻"""
        tau = first_passage(np.array([[1.0, 2.5, 5.0], [1.0, 0.5, 0.2]]), (2.0, 4.0, 8.0))
        np.testing.assert_array_equal(tau, [[1, 2, 3], [3, 3, 3]])

    def test_validate_levels(self):
        """测试水平校验"""
        assert validate_levels([2, 4]) == (2.0, 4.0)
        for bad in ([], [1.0], [4.0, 2.0], [2.0, 2.0]):
            with pytest.raises(ValidationError):
                validate_levels(bad)

    def test_black_scholes_is_regular(self, bs_ok, bs_bundle):
        """测试真鞅紧缩因子的奇异质量可忽略"""
        schedule, split = localization_demo(build_deflator(bs_ok, bs_bundle), (2.0, 4.0, 8.0))
        assert schedule.tau_monotone
        assert schedule.survival_monotone
        assert split.countably_additive
        assert split.regular + split.singular == pytest.approx(1.0)

    def test_bessel_has_singular_part(self, bessel_inverse):
        """测试严格局部鞅的质量分解出现奇异部分"""
        schedule, split = localization_demo(bessel_inverse, (2.0, 4.0, 8.0, 16.0))
        assert schedule.tau_monotone
        assert schedule.survival_monotone
        assert not split.countably_additive
        assert split.singular > 0.2
        assert schedule.survival_mass[-1] <= split.regular + 1e-12
        never = schedule.never_stopped()
        assert (np.diff(never) >= 0).all()

    def test_samples_concat(self, bessel_inverse):
        """测试分块局部化样本拼接"""
        levels = (2.0, 4.0)
        whole = LocalizationSamples.from_paths(bessel_inverse, levels)
        head = LocalizationSamples.from_paths(bessel_inverse[:1500], levels)
        tail = LocalizationSamples.from_paths(bessel_inverse[1500:], levels)
        joined = LocalizationSamples.concat([head, tail])
        np.testing.assert_array_equal(joined.tau, whole.tau)
        with pytest.raises(ValidationError):
            LocalizationSamples.concat([whole, LocalizationSamples.from_paths(bessel_inverse, (3.0,))])


class TestContinuousMonitoring:
    """测试按步内穿越概率的连续监测局部化"""

    @pytest.fixture
    def bessel_deflator(self, unit_grid):
        model = build_model("bessel3")
        bundle = simulate(model, unit_grid, 20000, seed=31)
        return build_deflator(risk_premium(model, bundle), bundle, model)

    def test_crossing_probability_range(self, bessel_deflator):
        """测试穿越概率在 [0, 1] 内且随水平不增"""
        previous = None
        for level in (2.0, 4.0, 8.0):
            prob = bessel_deflator.crossing_probability(level)
            assert prob.shape == (bessel_deflator.paths, bessel_deflator.grid.steps)
            assert ((prob >= 0.0) & (prob <= 1.0)).all()
            if previous is not None:
                assert (prob <= previous + 1e-12).all()
            previous = prob

    def test_crossing_at_reached_level(self, bessel_deflator):
        """测试右端点已到达水平的步概率为1"""
        level = 2.0
        prob = bessel_deflator.crossing_probability(level)
        reached = bessel_deflator.values[:, 1:] >= level
        assert reached.any()
        assert (prob[reached] == 1.0).all()

    def test_total_mass_is_one(self, bessel_deflator):
        """测试每个水平上 Qⁿ[Ω] 与1相差不超过4倍标准误"""
        schedule, split = localization_demo(bessel_deflator, (2.0, 4.0, 8.0, 16.0, 32.0))
        for mass, se in zip(schedule.total_mass, schedule.total_se):
            assert mass == pytest.approx(1.0, abs=4 * se)
        assert schedule.survival_monotone
        assert split.singular == pytest.approx(1.0 - 0.682689, abs=4 * split.se)

    def test_default_log_bridge(self, bs_ok, bs_bundle):
        """测试无模型桥时按 log Y 布朗桥给出穿越概率"""
        deflator = build_deflator(bs_ok, bs_bundle)
        assert deflator.crossing is None
        low, high = deflator.crossing_probability(1.05), deflator.crossing_probability(2.0)
        assert ((low >= 0.0) & (low <= 1.0)).all()
        assert (high <= low + 1e-12).all()
        assert low.max() == 1.0

    def test_from_deflator_matches_demo(self, bessel_deflator):
        """测试由 DeflatorPath 构造的样本与演示结果一致"""
        levels = (2.0, 4.0)
        samples = LocalizationSamples.from_deflator(bessel_deflator, levels)
        schedule, _ = localization_demo(samples)
        direct, _ = localization_demo(bessel_deflator, levels)
        np.testing.assert_array_equal(schedule.total_mass, direct.total_mass)
        assert (samples.survived <= samples.terminal[:, None] + 1e-15).all()

    def test_survival_trend(self):
        """测试末两个水平上的 1/n 外推"""
        assert survival_trend((16.0, 32.0), (0.6516, 0.6673)) == pytest.approx(0.683, abs=1e-3)
        assert survival_trend((2.0, 16.0, 32.0), (0.3, 0.6516, 0.6673)) == pytest.approx(0.6830)
        assert survival_trend((8.0,), (0.5,)) == 0.5


@pytest.mark.slow
class TestBesselLocalizationAtScale:
    """测试10万条路径上的Bessel局部化"""

    def test_mass_split(self):
        """测试奇异质量约0.317, 各水平总质量为1, 存活质量趋于0.683"""
        model = build_model("bessel3")
        grid = make_grid(1.0, 100)
        levels = (2.0, 4.0, 8.0, 16.0, 32.0)
        parts = []
        for block in range(10):
            bundle = simulate(model, grid, 10000, seed=41, first_stream=block * 10000)
            deflator = build_deflator(risk_premium(model, bundle), bundle, model)
            parts.append(LocalizationSamples.from_deflator(deflator, levels))
        schedule, split = localization_demo(LocalizationSamples.concat(parts))

        assert split.singular == pytest.approx(0.317, abs=0.01)
        for mass, se in zip(schedule.total_mass, schedule.total_se):
            assert abs(mass - 1.0) <= 3 * se
        assert schedule.survival_monotone
        assert split.limit_survival == pytest.approx(0.683, abs=0.01)
