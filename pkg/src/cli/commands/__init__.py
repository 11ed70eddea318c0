"""
CLI subcommands; each module exposes ``run(ctx) -> RunSummary``.
"""

from src.cli.commands import bridge, glue, modes, search, verify

COMMANDS = {
    "modes": modes.run,
    "search": search.run,
    "bridge": bridge.run,
    "glue": glue.run,
    "verify": verify.run,
}

__all__ = ["COMMANDS"]
