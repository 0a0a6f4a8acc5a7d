"""
Day-ahead and real-time dispatch of the configured market.

Writes forward.csv (id, X, P_star) and, with --omega, realtime.csv
(id, x, p, payment).
"""

from commands import register_command
from core.experiment.run_manager import cmd_dispatch


def dispatch(args) -> int:
    return cmd_dispatch(args.config, omega=args.omega, output_dir=args.output_dir)


DISPATCH_SCHEMA = {
    "type": "command",
    "function": {
        "name": "dispatch",
        "description": "Clear the day-ahead market and optionally one real-time scenario",
        "arguments": [
            {"flags": ["--omega"], "type": "float", "default": None,
             "help": "Realised wind availability (MW) for the real-time dispatch"},
        ],
    },
}

register_command("dispatch", dispatch, DISPATCH_SCHEMA)
