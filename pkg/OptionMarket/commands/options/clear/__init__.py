"""
Centralized option clearing by the market maker M.

Writes trades.csv, exercise.csv, ms.csv and ledger.csv; zero-ms on the
two-participant example also writes newton.csv.
"""

from commands import register_command
from core.clearing.clearing import OBJECTIVES
from core.experiment.run_manager import cmd_clear


def clear(args) -> int:
    return cmd_clear(args.config, mode=args.mode, output_dir=args.output_dir)


CLEAR_SCHEMA = {
    "type": "command",
    "function": {
        "name": "clear",
        "description": "Clear the centralized option market under max-ms or zero-ms",
        "arguments": [
            {"flags": ["--mode"], "type": "str", "choices": list(OBJECTIVES), "default": None,
             "help": "Clearing objective; defaults to option.objective"},
        ],
    },
}

register_command("clear", clear, CLEAR_SCHEMA)
