"""
命令行入口
na1lab <command> --config PATH --out DIR [--seed U64] [--paths M] [--steps N] [--workers W]
"""

from contextlib import contextmanager
from typing import Iterator, List, Optional
from pathlib import Path
import argparse
import logging
import sys

from na1lab import __version__
from na1lab.cli.commands import COMMANDS
from na1lab.cli.middleware import ErrorHandler
from na1lab.cli.report import CommandResult, ExitCode, ReportWriter
from na1lab.config import ExperimentConfig
from na1lab.exceptions import Na1Error


logger = logging.getLogger(__name__)


def _u64(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"无效的种子: {text}")
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError(f"种子必须在 [0, 2^64) 内: {text}")
    return value


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"需要正整数: {text}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"需要正整数: {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="na1lab", description="NA₁ 判据、紧缩因子与第一类套利实验")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, command in COMMANDS.items():
        sub = subparsers.add_parser(name, help=command.help)
        sub.add_argument("--config", required=True, help="JSON 配置文件")
        sub.add_argument("--out", default="out", help="输出目录 (默认: out)")
        sub.add_argument("--seed", type=_u64, default=None, help="覆盖配置中的种子")
        sub.add_argument("--paths", type=_positive, default=None, help="覆盖配置中的路径数")
        sub.add_argument("--steps", type=_positive, default=None, help="覆盖配置中的网格步数")
        sub.add_argument("--workers", type=_positive, default=None, help="线程数, 不影响结果")
        sub.add_argument("--log-level", default=None, help="日志级别 (DEBUG/INFO/WARNING)")
    return parser


@contextmanager
def _logging_scope(config: ExperimentConfig) -> Iterator[None]:
    """
    命令执行期间按配置设置 na1lab 日志级别, 结束后恢复
    关闭日志时只影响 na1lab 下的记录器
    """
    package = logging.getLogger("na1lab")
    previous = package.level
    if config.enable_log:
        logging.basicConfig(
            level=config.log_level.upper(),
            format="%(asctime)s %(levelname)s %(name)s: %(message)s",
            stream=sys.stderr,
        )
        package.setLevel(config.log_level.upper())
    else:
        package.setLevel(logging.CRITICAL + 1)
    try:
        yield
    finally:
        package.setLevel(previous)


def main(argv: Optional[List[str]] = None) -> int:
    """
    执行一条命令
    :return: 退出码 0 成功 / 1 运行失败 / 2 配置错误 / 3 前置条件被拒绝
    """
    args = build_parser().parse_args(argv)
    writer = ReportWriter(Path(args.out))

    try:
        config = ExperimentConfig.from_file(args.config).with_overrides(
            seed=args.seed,
            paths=args.paths,
            steps=args.steps,
            workers=args.workers,
            log_level=args.log_level,
        )
    except Na1Error as e:
        code = ErrorHandler.exit_code_for(e)
        logger.error(f"配置加载失败: {e}")
        writer.write(CommandResult.failure(args.command, code, e), {})
        return int(code)

    with _logging_scope(config):
        result = COMMANDS[args.command]().run(config)
        writer.write(result, config.fingerprint_dict())
        if result.exit_code != ExitCode.SUCCESS:
            logger.error(f"命令 {args.command} 退出码: {int(result.exit_code)}")
    return int(result.exit_code)


if __name__ == "__main__":
    sys.exit(main())
