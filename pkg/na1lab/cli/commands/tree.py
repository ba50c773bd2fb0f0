"""
tree 命令
读取树描述文件, 运行精确判定: 紧缩因子可行性、单步套利搜索、
等价鞅测度下的财富鞅性、密度拼接一致性、分离测度检验与停时穷举
"""

import logging

import pandas as pd

from na1lab.cli.commands.base import BaseCommand
from na1lab.cli.report import CommandResult
from na1lab.config import ExperimentConfig
from na1lab.tree.builders import martingale_process, random_process
from na1lab.tree.model import TreeMeasure, TreeModel, format_number
from na1lab.tree.oracle import (
    count_stopping_times,
    deflator_feasibility,
    enumerate_stopping_times,
    no_arbitrage_by_search,
    patching_consistency,
    deflated_martingale_check,
    wealth_martingale_check,
    separating_check,
)
from na1lab.utils.datastructure import ReportMap


logger = logging.getLogger(__name__)


class TreeCommand(BaseCommand):
    """有限树判定报告"""

    name = "tree"
    help = "在有限树模型上做精确判定"

    def execute(self, config: ExperimentConfig) -> CommandResult:
        tree = TreeModel.from_file(config.require_tree_file())
        options = config.tree

        feasibility = deflator_feasibility(tree)
        search = no_arbitrage_by_search(tree)
        result = (
            ReportMap()
            .set("nodes", len(tree))
            .set("depth", tree.depth)
            .set("dim", tree.dim)
            .set("exact", tree.exact)
            .set("feasible", feasibility.feasible)
            .set("arbitrage_search_clean", search)
            .set("oracles_agree", feasibility.feasible == search)
        )

        if feasibility.feasible:
            measure = feasibility.measure(tree)
            wealth_check = wealth_martingale_check(tree, measure, trials=options.trials, seed=config.seed)
            patching = patching_consistency(tree, measure)
            result.set(
                "martingale_measure",
                {
                    "price_martingale": wealth_check.price_martingale,
                    "wealth_martingale": wealth_check.wealth_martingale,
                    "strategies": wealth_check.strategies,
                },
            )
            result.set("patching", {"consistent": patching.consistent, "max_discrepancy": patching.max_discrepancy})
        else:
            measure = TreeMeasure.reference(tree)
            result.set(
                "certificate",
                {"node": feasibility.certificate_node, "strategy": list(feasibility.certificate or ())},
            )

        separating = separating_check(tree, measure, options.bound)
        result.set(
            "separating",
            {
                "measure": "martingale" if feasibility.feasible else "reference",
                "separating": separating.separating,
                "max_gain": separating.max_gain,
            },
        )

        cuts = count_stopping_times(tree)
        result.set("stopping_times", cuts)
        if cuts <= options.cap and feasibility.feasible:
            enumerated = enumerate_stopping_times(tree, options.cap)
            terminal = random_process(tree, config.seed)
            martingale = martingale_process(tree, measure, {leaf: terminal[leaf] for leaf in tree.leaves()})
            positive = deflated_martingale_check(tree, measure, martingale, enumerated)
            negative = deflated_martingale_check(tree, measure, terminal, enumerated)
            result.set(
                "deflated_martingale",
                {
                    "martingale_case_holds": positive.holds and positive.q_martingale,
                    "random_case_holds": negative.holds,
                },
            )
        elif cuts > options.cap:
            logger.warning(f"停时数量 {cuts} 超过上限 {options.cap}, 跳过穷举")

        rows = []
        density = feasibility.density
        for node_id in tree.preorder():
            node = tree.node(node_id)
            row = {
                "id": node_id,
                "parent": node.parent if node.parent is not None else "",
                "depth": node.depth,
                "prob": str(format_number(node.prob)),
                "price": " ".join(str(format_number(v)) for v in node.price),
            }
            if feasibility.feasible:
                row["q"] = str(format_number(feasibility.weights.get(node_id, tree.one())))
                row["density"] = str(format_number(density[node_id]))
            rows.append(row)
        return CommandResult.success(self.name, result, {"nodes": pd.DataFrame(rows)})
