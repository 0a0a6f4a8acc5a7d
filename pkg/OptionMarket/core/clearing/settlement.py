"""
Settlement of a cleared option market. Day-ahead, buyers pay their premiums
to M and M pays the sellers theirs; in real time M pays in-the-money buyers
and collects from the sellers the exercise it allocated to them. Every ledger
includes M, so its entries sum to zero.
"""

import math
from dataclasses import dataclass
from typing import Dict

import numpy as np

from core.clearing.acceptability import Side
from core.clearing.clearing import ClearingSolution
from core.dispatch.cost import MARKET_MAKER_ID


@dataclass(frozen=True)
class Ledger:
    """Cash received by each participant (negative when paying), M included."""
    stage: str
    entries: Dict[str, float]
    omega: float = math.nan

    @property
    def ms(self) -> float:
        return self.entries.get(MARKET_MAKER_ID, 0.0)

    def total(self) -> float:
        return math.fsum(self.entries.values())


def settle_day_ahead(solution: ClearingSolution) -> Ledger:
    """
    Premium flows.

    Returns:
        Ledger whose M entry is the day-ahead surplus sum_r q_r delta_r - sum_g q_g delta_g
    """
    entries = {}
    for pid, trade in solution.trades.items():
        premium = trade.q * trade.delta
        entries[pid] = -premium if solution.sides[pid] is Side.BUYER else premium
    entries[MARKET_MAKER_ID] = -math.fsum(entries.values()) if entries else 0.0
    return Ledger(stage="day_ahead", entries=entries)


def settle_real_time(solution: ClearingSolution, omega: float, spot: float) -> Ledger:
    """
    Exercise flows in one scenario.

    Args:
        solution: Cleared solution
        omega: Realised scenario (recorded on the ledger)
        spot: Real-time price in that scenario

    Returns:
        Ledger whose M entry is -sum_r (p - K_r)^+ delta_r + sum_g (p - K_g)^+ delta_g
    """
    allocation = solution.exercise_for_spot(spot)
    entries = {}
    for pid, trade in solution.trades.items():
        payoff = max(spot - trade.K, 0.0)
        if solution.sides[pid] is Side.BUYER:
            entries[pid] = payoff * trade.delta
        else:
            entries[pid] = -payoff * allocation.get(pid, 0.0)
    entries[MARKET_MAKER_ID] = -math.fsum(entries.values()) if entries else 0.0
    return Ledger(stage="real_time", entries=entries, omega=omega)


def option_flows(solution: ClearingSolution) -> Dict[str, np.ndarray]:
    """
    Total option cash flow (premium plus exercise) per participant and scenario,
    aligned with the solution's scenario set. M is included.
    """
    day_ahead = settle_day_ahead(solution)
    n = len(solution.scenarios)
    flows = {pid: np.full(n, amount) for pid, amount in day_ahead.entries.items()}
    cache = {}
    for k, (omega, p) in enumerate(zip(solution.scenarios.omegas.tolist(), solution.spot.tolist())):
        if p not in cache:
            cache[p] = settle_real_time(solution, omega, p).entries
        for pid, amount in cache[p].items():
            flows[pid][k] += amount
    return flows
