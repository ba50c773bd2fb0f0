"""
命令行模块
配置驱动的实验入口: simulate | check-na1 | deflate | localize | forge | tree
"""

from na1lab.cli.app import build_parser, main
from na1lab.cli.report import CommandResult, ExitCode, ReportWriter

__all__ = ["build_parser", "main", "CommandResult", "ExitCode", "ReportWriter"]
