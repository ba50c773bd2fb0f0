"""
simulate 命令
分块模拟价格路径, 输出检查点上的路径统计量与二次变差
"""

from typing import List
import logging

import numpy as np
import pandas as pd

from na1lab.cli.commands.base import BaseCommand
from na1lab.cli.report import CommandResult
from na1lab.config import ExperimentConfig
from na1lab.deflator.testing import checkpoint_indices
from na1lab.market.model import quadratic_variation
from na1lab.utils.datastructure import ReportMap


logger = logging.getLogger(__name__)


# 输出统计量的检查点数
STAT_POINTS = 20

QUANTILES = (0.05, 0.5, 0.95)


class SimulateCommand(BaseCommand):
    """路径统计: 每个检查点、每个资产的均值/标准差/分位数"""

    name = "simulate"
    help = "模拟价格路径并输出路径统计量"

    def execute(self, config: ExperimentConfig) -> CommandResult:
        model, grid = self.model_and_grid(config)
        points = np.concatenate([[0], checkpoint_indices(grid.steps, STAT_POINTS)])

        samples: List[np.ndarray] = []
        realized: List[np.ndarray] = []
        implied: List[np.ndarray] = []
        excluded = 0
        for bundle in self.bundles(config, model, grid):
            samples.append(bundle.values[:, points, :])
            qv = quadratic_variation(bundle, model)
            realized.append(np.trace(qv.terminal, axis1=1, axis2=2))
            implied.append(np.trace(qv.implied[:, -1], axis1=1, axis2=2))
            excluded += bundle.excluded

        values = np.concatenate(samples)
        rows = []
        for j, index in enumerate(points):
            for asset in range(model.dim):
                column = values[:, j, asset]
                row = {"t": float(grid.nodes[index]), "asset": asset, "mean": column.mean(), "std": column.std(ddof=1)}
                for q in QUANTILES:
                    row[f"q{int(round(q * 100)):02d}"] = float(np.quantile(column, q))
                rows.append(row)
        frame = pd.DataFrame(rows)

        terminal_mean = values[:, -1, :].mean(axis=0)
        report = (
            ReportMap()
            .set("model", model.name)
            .set("parameters", dict(model.parameters))
            .set("dim", model.dim)
            .set("steps", grid.steps)
            .set("paths", int(values.shape[0]))
            .set("excluded", excluded)
            .set("terminal_mean", terminal_mean)
            .set("closed_mean_terminal", model.closed("mean_terminal", grid.horizon))
            .set("realized_qv_mean", float(np.concatenate(realized).mean()))
            .set("implied_qv_mean", float(np.concatenate(implied).mean()))
        )
        logger.info(f"模拟完成: {model.name}, m={values.shape[0]}, n={grid.steps}")
        return CommandResult.success(self.name, report, {"paths": frame})
