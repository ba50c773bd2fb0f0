"""
localize 命令
按首达时刻局部化紧缩因子, 输出 Qⁿ 质量表与正则/奇异分解
"""

from typing import List
import logging

import pandas as pd

from na1lab.cli.commands.base import BaseCommand
from na1lab.cli.report import CommandResult
from na1lab.config import ExperimentConfig
from na1lab.deflator.deflator import build_deflator
from na1lab.deflator.localization import LocalizationSamples, localization_demo, validate_levels
from na1lab.structure.premium import risk_premium
from na1lab.utils.datastructure import ReportMap


logger = logging.getLogger(__name__)


class LocalizeCommand(BaseCommand):
    """质量分解报告"""

    name = "localize"
    help = "演示紧缩因子的局部化与测度分解"

    def execute(self, config: ExperimentConfig) -> CommandResult:
        model, grid = self.model_and_grid(config)
        levels = validate_levels(config.localize.levels)

        parts: List[LocalizationSamples] = []
        for bundle in self.bundles(config, model, grid):
            report = risk_premium(model, bundle, config.check.tol, workers=config.workers)
            deflator = build_deflator(report, bundle, model)
            parts.append(LocalizationSamples.from_deflator(deflator, levels))

        schedule, split = localization_demo(LocalizationSamples.concat(parts), levels)
        frame = pd.DataFrame(list(schedule.rows()))
        frame["never_stopped"] = schedule.never_stopped()
        result = (
            ReportMap()
            .set("model", model.name)
            .set("parameters", dict(model.parameters))
            .set("split", split.to_dict())
            .set("closed_deflator_mean", model.closed("deflator_mean", grid.horizon))
            .set("tau_monotone", schedule.tau_monotone)
            .set("survival_monotone", schedule.survival_monotone)
        )
        return CommandResult.success(self.name, result, {"localization": frame})
