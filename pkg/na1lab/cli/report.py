"""
命令结果与报告输出
定义统一的退出码与报告格式: report.json(规范化JSON) + CSV附表
报告中不含时间戳, 相同配置与种子得到逐字节相同的文件
"""

from typing import Any, Dict, Optional
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
import logging

import pandas as pd

from na1lab import __version__
from na1lab.exceptions import Na1Error
from na1lab.utils.datastructure import ReportMap, canonical_dumps
from na1lab.utils.digest import config_digest


logger = logging.getLogger(__name__)


REPORT_FILE = "report.json"
ERROR_FILE = "error.json"
CSV_FLOAT_FORMAT = "%.12g"


class ExitCode(IntEnum):
    """退出码"""

    SUCCESS = 0
    RUNTIME_ERROR = 1
    INVALID_CONFIG = 2
    PRECONDITION_REFUSED = 3


@dataclass
class CommandResult:
    """
    命令结果
    遵循单一职责原则(SRP): 只负责结果数据的封装
    """

    command: str
    exit_code: ExitCode = ExitCode.SUCCESS
    report: ReportMap = field(default_factory=ReportMap)
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)
    error: Optional[Dict[str, Any]] = None

    @property
    def ok(self) -> bool:
        return self.exit_code == ExitCode.SUCCESS

    @classmethod
    def success(cls, command: str, report: ReportMap, tables: Optional[Dict[str, pd.DataFrame]] = None) -> "CommandResult":
        return cls(command=command, report=report, tables=dict(tables or {}))

    @classmethod
    def failure(cls, command: str, exit_code: ExitCode, error: Na1Error) -> "CommandResult":
        return cls(command=command, exit_code=exit_code, error=error.to_dict())


class ReportWriter:
    """
    报告写入器
    每份报告嵌入命令名、工具版本与配置指纹
    """

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)

    def _header(self, command: str, fingerprint: Dict[str, Any]) -> ReportMap:
        return (
            ReportMap()
            .set("command", command)
            .set("tool_version", __version__)
            .set("config_hash", config_digest(fingerprint))
            .set("config", fingerprint)
        )

    def write(self, result: CommandResult, fingerprint: Dict[str, Any]) -> Path:
        """写出 report.json 与 CSV 附表, 失败结果写出 error.json"""
        self.out_dir.mkdir(parents=True, exist_ok=True)
        document = self._header(result.command, fingerprint).set("exit_code", int(result.exit_code))
        if not result.ok:
            path = self.out_dir / ERROR_FILE
            document.set("error", result.error)
            path.write_text(canonical_dumps(document), encoding="utf-8")
            logger.debug(f"写出错误报告: {path}")
            return path

        for name, frame in sorted(result.tables.items()):
            frame.to_csv(
                self.out_dir / f"{name}.csv",
                index=False,
                float_format=CSV_FLOAT_FORMAT,
                lineterminator="\n",
            )
        document.set("tables", sorted(f"{name}.csv" for name in result.tables))
        document.set("result", result.report)
        path = self.out_dir / REPORT_FILE
        path.write_text(canonical_dumps(document), encoding="utf-8")
        logger.debug(f"写出报告: {path}")
        return path
