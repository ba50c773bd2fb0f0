"""
CLI命令
每个命令对应一个实验, 通过 COMMANDS 按名称查找
"""

from typing import Dict, Type

from na1lab.cli.commands.base import BaseCommand
from na1lab.cli.commands.check import CheckNa1Command
from na1lab.cli.commands.deflate import DeflateCommand
from na1lab.cli.commands.forge import ForgeCommand
from na1lab.cli.commands.localize import LocalizeCommand
from na1lab.cli.commands.simulate import SimulateCommand
from na1lab.cli.commands.tree import TreeCommand

COMMANDS: Dict[str, Type[BaseCommand]] = {
    command.name: command
    for command in (
        SimulateCommand,
        CheckNa1Command,
        DeflateCommand,
        LocalizeCommand,
        ForgeCommand,
        TreeCommand,
    )
}

__all__ = [
    "BaseCommand",
    "CheckNa1Command",
    "DeflateCommand",
    "ForgeCommand",
    "LocalizeCommand",
    "SimulateCommand",
    "TreeCommand",
    "COMMANDS",
]
