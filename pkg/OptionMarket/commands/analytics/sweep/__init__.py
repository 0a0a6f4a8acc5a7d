"""Variance-reduction sensitivity of the N2 trade to rho or sigma."""

from commands import register_command
from core.analytics.analytics import SWEEP_PARAMETERS
from core.experiment.run_manager import cmd_sweep


def sweep(args) -> int:
    return cmd_sweep(args.config, parameter=args.parameter, values=args.values, q=args.q,
                     output_dir=args.output_dir)


SWEEP_SCHEMA = {
    "type": "command",
    "function": {
        "name": "sweep",
        "description": "Analytic and simulated variance change across rho or sigma",
        "arguments": [
            {"flags": ["--parameter"], "type": "str", "choices": list(SWEEP_PARAMETERS), "default": None,
             "help": "Swept parameter; defaults to run.sweep.parameter"},
            {"flags": ["--values"], "type": "float", "nargs": "+", "default": None,
             "help": "Parameter values; default run.sweep.values"},
            {"flags": ["--q"], "type": "float", "default": None,
             "help": "Option price held fixed across the sweep"},
        ],
    },
}

register_command("sweep", sweep, SWEEP_SCHEMA)
