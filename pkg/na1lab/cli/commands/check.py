"""
check-na1 命令
以配置网格为最细层级做加密分类, 并输出该网格上 λ 与 K 的分位数序列
"""

import logging

import pandas as pd

from na1lab.cli.commands.base import BaseCommand
from na1lab.cli.report import CommandResult
from na1lab.config import ExperimentConfig
from na1lab.market.model import simulate
from na1lab.structure.premium import risk_premium
from na1lab.utils.datastructure import ReportMap


logger = logging.getLogger(__name__)


# 分位数序列只取前若干条路径
PREMIUM_SAMPLE = 1024


class CheckNa1Command(BaseCommand):
    """NA₁ 分类报告"""

    name = "check-na1"
    help = "按 NA₁ 判据对模型分类"

    def execute(self, config: ExperimentConfig) -> CommandResult:
        model, grid = self.model_and_grid(config)
        classification = self.classify_to(config, model, grid)

        sample = simulate(model, grid, min(config.paths, PREMIUM_SAMPLE), config.seed, workers=config.workers)
        premium = risk_premium(model, sample, config.check.tol, workers=config.workers)

        diagnostics = classification.diagnostics
        levels = pd.DataFrame(
            {
                "steps": list(diagnostics.steps),
                "median_mass": list(diagnostics.median_mass),
            }
        )
        report = (
            ReportMap()
            .set("model", model.name)
            .set("parameters", dict(model.parameters))
            .set("classification", classification.to_dict())
            .set("premium", premium.summary())
            .set("closed_sharpe", model.closed("sharpe", grid.horizon))
            .set("closed_mass", model.closed("mass", grid.horizon))
        )
        return CommandResult.success(
            self.name,
            report,
            {"levels": levels, "premium": premium.quantile_frame()},
        )
