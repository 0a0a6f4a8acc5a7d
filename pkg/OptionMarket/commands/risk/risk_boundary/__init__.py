"""CVaR acceptability frontier of one participant, traced by bisection."""

from commands import register_command
from core.experiment.run_manager import cmd_risk_boundary


def risk_boundary(args) -> int:
    return cmd_risk_boundary(args.config, side=args.side, alpha=args.alpha, delta=args.delta,
                             output_dir=args.output_dir)


RISK_BOUNDARY_SCHEMA = {
    "type": "command",
    "function": {
        "name": "risk-boundary",
        "description": "Trace the (K, q) boundary of CVaR-acceptable trades",
        "arguments": [
            {"flags": ["--side"], "type": "str", "choices": ["buyer", "seller"], "default": None,
             "help": "Participant side; defaults to risk.side"},
            {"flags": ["--alpha"], "type": "float", "default": None,
             "help": "Risk level in [0, 1); defaults to every risk.alphas entry"},
            {"flags": ["--delta"], "type": "float", "default": None,
             "help": "Trade volume (MW); defaults to risk.delta_cap_mw"},
        ],
    },
}

register_command("risk-boundary", risk_boundary, RISK_BOUNDARY_SCHEMA)
