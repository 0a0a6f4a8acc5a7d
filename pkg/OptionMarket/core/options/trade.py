"""
Cash-settled call options shared by the bilateral game and the centralized
market: the (q, K, delta) trade triple and its per-scenario cash flows.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from core.utils.errors import ConfigError


@dataclass(frozen=True)
class TradeTriple:
    """Option price q ($/MW), strike K ($/MWh) and volume delta (MW)."""
    q: float
    K: float
    delta: float

    def __post_init__(self):
        if self.q < 0 or self.K < 0 or self.delta < 0:
            raise ConfigError(f"trade needs q, K, delta >= 0 (got {self})")

    def check_cap(self, cap: float, tol: float = 1e-12) -> "TradeTriple":
        """Raise ConfigError when delta exceeds the volume cap."""
        if self.delta > cap + tol:
            raise ConfigError(f"trade volume {self.delta} exceeds the cap {cap}")
        return self

    def with_delta(self, delta: float) -> "TradeTriple":
        return TradeTriple(self.q, self.K, delta)

    @property
    def premium(self) -> float:
        return self.q * self.delta


NO_TRADE = TradeTriple(0.0, 0.0, 0.0)


def option_cashflows(spot: float, trade: TradeTriple,
                     exercised: Optional[float] = None) -> Tuple[float, float]:
    """
    Cash flows of one option contract in one scenario.

    Args:
        spot: Real-time price
        trade: Trade triple
        exercised: Volume the seller delivers on exercise; defaults to delta

    Returns:
        (buyer_flow, seller_flow); they sum to zero when exercised == delta
    """
    volume = trade.delta if exercised is None else exercised
    payoff = max(spot - trade.K, 0.0)
    buyer = -trade.q * trade.delta + payoff * trade.delta
    seller = trade.q * trade.delta - payoff * volume
    return buyer, seller


def buyer_option_values(spots: np.ndarray, trade: TradeTriple) -> np.ndarray:
    """Vectorised buyer flow V over an array of spot prices."""
    return (np.maximum(np.asarray(spots, dtype=float) - trade.K, 0.0) - trade.q) * trade.delta


@dataclass(frozen=True)
class BilateralContract:
    """An option written by seller and held by buyer."""
    buyer: str
    seller: str
    trade: TradeTriple

    def __post_init__(self):
        if self.buyer == self.seller:
            raise ConfigError("buyer and seller of a contract must differ")

    def flows(self, spots: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(buyer, seller) cash flows per spot price; they cancel exactly."""
        buyer = buyer_option_values(spots, self.trade)
        return buyer, -buyer
