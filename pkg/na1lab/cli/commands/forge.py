"""
forge 命令
NA₁ 不成立时构造第一类套利:
- STRUCTURE_FAIL: 核方向财富族 X = 1 + k∫θdS
- 其他: 截断杠杆阶梯
并对财富族做依概率无界检验
"""

import logging

import pandas as pd

from na1lab.cli.commands.base import BaseCommand
from na1lab.cli.report import CommandResult
from na1lab.config import ExperimentConfig
from na1lab.exceptions import PreconditionError
from na1lab.forge.family import WealthFamily, unboundedness_test
from na1lab.forge.kernel import kernel_direction, scaled_drift_arbitrage
from na1lab.forge.ladder import LeverageLadder, truncated_leverage
from na1lab.structure.premium import Na1Verdict, risk_premium
from na1lab.utils.datastructure import ReportMap


logger = logging.getLogger(__name__)


class ForgeCommand(BaseCommand):
    """套利阶梯报告 + NUPBR 判定"""

    name = "forge"
    help = "在 NA₁ 不成立的模型中构造第一类套利"

    def execute(self, config: ExperimentConfig) -> CommandResult:
        model, grid = self.model_and_grid(config)
        classification = self.classify_to(config, model, grid)
        verdict = classification.verdict
        if verdict is Na1Verdict.NA1_OK:
            raise PreconditionError(f"模型 {model.name} 分类为 NA1_OK, 不存在第一类套利", "na1_failure")

        scales = config.forge.scales
        result = (
            ReportMap()
            .set("model", model.name)
            .set("parameters", dict(model.parameters))
            .set("classification", classification.to_dict())
        )
        tables = {}
        if verdict is Na1Verdict.STRUCTURE_FAIL:
            families = []
            for bundle in self.bundles(config, model, grid):
                kernel = kernel_direction(model, bundle, config.check.tol, verdict)
                families.append(scaled_drift_arbitrage(kernel, scales))
            family = WealthFamily.concat(families)
            result.set("method", "kernel")
            tables["family"] = pd.DataFrame(
                {
                    "k": list(family.scales),
                    "terminal_q05": family.quantiles(0.05),
                    "terminal_median": family.quantiles(0.5),
                    "terminal_q95": family.quantiles(0.95),
                    "minimum_min": family.minimum.min(axis=0),
                }
            )
        else:
            ladders = []
            for bundle in self.bundles(config, model, grid):
                report = risk_premium(model, bundle, config.check.tol, workers=config.workers)
                ladders.append(truncated_leverage(report, bundle, scales))
            ladder = LeverageLadder.concat(ladders)
            family = ladder.family
            result.set("method", "leverage")
            result.set("mass_monotone", ladder.mass_monotone)
            result.set("ratio_median_largest", float(ladder.ratio_median[-1]))
            tables["ladder"] = pd.DataFrame(ladder.rows())

        nupbr = unboundedness_test(family, config.forge.thresholds)
        result.set("nupbr", nupbr.to_dict())
        tables["nupbr"] = nupbr.to_frame()
        return CommandResult.success(self.name, result, tables)
