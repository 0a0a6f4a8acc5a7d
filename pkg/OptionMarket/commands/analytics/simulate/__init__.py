"""Payment distributions with and without the configured option."""

from commands import register_command
from core.experiment.run_manager import cmd_simulate


def simulate(args) -> int:
    return cmd_simulate(args.config, n=args.n, seed=args.seed, output_dir=args.output_dir)


SIMULATE_SCHEMA = {
    "type": "command",
    "function": {
        "name": "simulate",
        "description": "Simulate per-scenario payments and write payments.csv and moments.csv",
        "arguments": [
            {"flags": ["--n"], "type": "int", "default": None,
             "help": "Number of scenarios; defaults to run.scenarios"},
            {"flags": ["--seed"], "type": "int", "default": None,
             "help": "Seed for Monte Carlo sampling; quadrature when omitted"},
        ],
    },
}

register_command("simulate", simulate, SIMULATE_SCHEMA)
