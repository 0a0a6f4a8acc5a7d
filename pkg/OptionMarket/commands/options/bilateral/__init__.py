"""Bilateral option game between W (buyer) and P (seller) on the example market."""

from commands import register_command
from core.experiment.run_manager import cmd_bilateral


def bilateral(args) -> int:
    return cmd_bilateral(args.config, q=args.q, K=args.strike, delta=args.delta, output_dir=args.output_dir)


BILATERAL_SCHEMA = {
    "type": "command",
    "function": {
        "name": "bilateral",
        "description": "Best response, equilibrium class and variance change of a posted (q, K)",
        "arguments": [
            {"flags": ["--q"], "type": "float", "required": True, "help": "Option price ($/MW)"},
            {"flags": ["--strike", "-K"], "type": "float", "required": True, "help": "Strike price ($/MWh)"},
            {"flags": ["--delta"], "type": "float", "default": None,
             "help": "Option volume (MW); defaults to the cap sqrt(3) sigma"},
        ],
    },
}

register_command("bilateral", bilateral, BILATERAL_SCHEMA)
