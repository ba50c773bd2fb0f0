"""
deflate 命令
构造紧缩因子与计价组合, 做鞅检验, 并对随机可行策略检查紧缩后财富的上鞅性质
"""

from typing import Dict, List
import logging

import numpy as np
import pandas as pd

from na1lab.cli.commands.base import BaseCommand
from na1lab.cli.report import CommandResult
from na1lab.config import ExperimentConfig
from na1lab.deflator.deflator import build_deflator, numeraire_portfolio
from na1lab.deflator.testing import MartingaleSamples, deflated_wealth_check, martingale_test
from na1lab.deflator.wealth import StrategyKind, random_fractional_strategies, wealth
from na1lab.grid.streams import derive_seed
from na1lab.market.model import MarketModel
from na1lab.structure.premium import Na1Verdict, risk_premium
from na1lab.utils.datastructure import ReportMap


logger = logging.getLogger(__name__)


# 价格恒为正的模型使用比例策略, 其余使用相对形式
POSITIVE_PRICE_MODELS = ("black-scholes", "correlated-bs", "bessel3")

STRATEGY_SALT = 0x5EED


def strategy_kind(model: MarketModel) -> StrategyKind:
    return StrategyKind.FRACTIONAL if model.name in POSITIVE_PRICE_MODELS else StrategyKind.RELATIVE


class DeflateCommand(BaseCommand):
    """紧缩因子报告 + 鞅检验表"""

    name = "deflate"
    help = "构造并检验局部鞅紧缩因子"

    def execute(self, config: ExperimentConfig) -> CommandResult:
        model, grid = self.model_and_grid(config)
        classification = self.classify_to(config, model, grid)
        verdict = classification.verdict
        options = config.deflate

        strategies = []
        if options.strategies:
            strategies = random_fractional_strategies(
                options.strategies,
                model.dim,
                derive_seed(config.seed, STRATEGY_SALT),
                bound=options.strategy_bound,
                kind=strategy_kind(model),
            )

        parts: List[MartingaleSamples] = []
        terminal_y: List[np.ndarray] = []
        terminal_x: Dict[int, List[np.ndarray]] = {i: [] for i in range(len(strategies))}
        duality, gap = True, 0.0
        for bundle in self.bundles(config, model, grid):
            report = risk_premium(model, bundle, config.check.tol, workers=config.workers)
            if report.structure_holds:
                report = report.with_classification(verdict, classification.diagnostics)
            deflator = build_deflator(report, bundle, model)
            parts.append(
                MartingaleSamples.from_paths(deflator.values, grid, checkpoints=options.checkpoints)
            )
            terminal_y.append(deflator.terminal)
            if verdict is Na1Verdict.NA1_OK:
                portfolio = numeraire_portfolio(report, bundle, deflator)
                duality = duality and portfolio.duality_holds
                gap = max(gap, portfolio.duality_gap)
            for i, spec in enumerate(strategies):
                terminal_x[i].append(wealth(spec, bundle, model).terminal)

        test = martingale_test(MartingaleSamples.concat(parts), alpha=options.alpha)
        y_t = np.concatenate(terminal_y)

        checks = []
        for i, spec in enumerate(strategies):
            x_t = np.concatenate(terminal_x[i])
            check = deflated_wealth_check(
                np.column_stack([np.ones_like(y_t), y_t]),
                np.column_stack([np.full_like(x_t, spec.capital), x_t]),
            )
            checks.append({"strategy": spec.name, **check.to_dict()})

        result = (
            ReportMap()
            .set("model", model.name)
            .set("parameters", dict(model.parameters))
            .set("classification", classification.to_dict())
            .set("flagged", verdict is not Na1Verdict.NA1_OK)
            .set("deflator_terminal_mean", float(y_t.mean()))
            .set("closed_deflator_mean", model.closed("deflator_mean", grid.horizon))
            .set("positive", bool(np.all(y_t > 0)))
            .set("martingale_test", test.to_dict())
        )
        if verdict is Na1Verdict.NA1_OK:
            result.set("numeraire", {"duality_holds": duality, "duality_gap": gap})
        else:
            logger.warning(f"模型分类为 {verdict.value}, 未构造计价组合")
        tables = {"martingale": test.to_frame()}
        if checks:
            result.set("supermartingale_passed", all(c["passed"] for c in checks))
            tables["strategies"] = pd.DataFrame(checks)
        return CommandResult.success(self.name, result, tables)
