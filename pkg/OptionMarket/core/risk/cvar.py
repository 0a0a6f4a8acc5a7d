"""
CVaR Module

Exact conditional value at risk of discrete weighted losses, and the
risk-averse acceptability test built on it: a participant accepts an option
trade when the CVaR of its losses with the trade does not exceed the CVaR of
its losses without it.
"""

import math
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from core.options.trade import TradeTriple
from core.scenario.scenario import ScenarioSet
from core.utils.config import FEASIBILITY_TOL, WEIGHT_SUM_TOL
from core.utils.errors import ConfigError, NumericalError

logger = logging.getLogger(__name__)

# Agreement required between the sorted-tail and minimisation forms
FORM_AGREEMENT_TOL = 1e-10

BUYER = "buyer"
SELLER = "seller"


@dataclass(frozen=True)
class RiskLevel:
    alpha: float

    def __post_init__(self):
        if not (0 <= self.alpha < 1):
            raise ConfigError(f"alpha must lie in [0, 1) (got alpha={self.alpha})")


@dataclass(frozen=True)
class WeightedLossSample:
    """Losses z with positive probabilities summing to one."""
    losses: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        losses = np.asarray(self.losses, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if losses.ndim != 1 or losses.shape != weights.shape or losses.size == 0:
            raise ConfigError("losses and weights must be non-empty 1-D arrays of equal length")
        if np.any(weights <= 0):
            raise ConfigError("loss weights must be strictly positive")
        total = math.fsum(weights)
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ConfigError(f"loss weights must sum to 1 (sum={total!r})")
        object.__setattr__(self, "losses", losses)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_scenarios(cls, scenarios: ScenarioSet, losses: np.ndarray) -> "WeightedLossSample":
        return cls(losses=np.asarray(losses, dtype=float), weights=scenarios.weights)


def _level(level) -> RiskLevel:
    return level if isinstance(level, RiskLevel) else RiskLevel(float(level))


def cvar_with_var(sample: WeightedLossSample, level) -> Tuple[float, float]:
    """
    CVaR and VaR of a discrete loss distribution.

    Losses are sorted in descending order and the top 1 - alpha probability
    mass is averaged; the atom straddling the alpha-quantile contributes only
    the fraction of its mass that is still needed. The result is checked
    against t + E[(z - t)^+]/(1 - alpha) evaluated at the VaR t.

    Args:
        sample: Weighted losses
        level: RiskLevel or alpha

    Returns:
        (cvar, var)
    """
    alpha = _level(level).alpha
    tail = 1.0 - alpha
    order = np.argsort(-sample.losses, kind="stable")
    z = sample.losses[order]
    w = sample.weights[order]
    cumulative = np.cumsum(w)

    idx = min(int(np.searchsorted(cumulative, tail, side="left")), z.size - 1)
    taken = cumulative[idx - 1] if idx > 0 else 0.0
    partial = min(max(tail - taken, 0.0), w[idx])
    var = float(z[idx])
    sorted_tail = (math.fsum(w[:idx] * z[:idx]) + partial * var) / tail

    excess = math.fsum(w * np.maximum(z - var, 0.0))
    minimised = var + excess / tail

    scale = max(1.0, float(np.max(np.abs(z))))
    if abs(sorted_tail - minimised) > FORM_AGREEMENT_TOL * scale:
        raise NumericalError(
            f"CVaR forms disagree at alpha={alpha}: sorted tail {sorted_tail!r} vs minimum {minimised!r}",
            alpha=alpha,
        )
    return sorted_tail, var


def cvar(sample: WeightedLossSample, level) -> float:
    """Conditional value at risk at level alpha (the mean at alpha = 0)."""
    return cvar_with_var(sample, level)[0]


def option_values(spot: np.ndarray, trade: TradeTriple, side: str) -> np.ndarray:
    """
    Option cash flow per scenario for one side.

    The seller assumes the market maker exercises the full volume against it.
    """
    payoff = np.maximum(np.asarray(spot, dtype=float) - trade.K, 0.0)
    if side == BUYER:
        return (payoff - trade.q) * trade.delta
    if side == SELLER:
        return (trade.q - payoff) * trade.delta
    raise ConfigError(f"side must be '{BUYER}' or '{SELLER}' (got {side!r})")


def cvar_accepts(trade: TradeTriple, side: str, alpha, pi: np.ndarray, spot: np.ndarray,
                 scenarios: ScenarioSet) -> bool:
    """
    Risk-averse acceptability: CVaR_alpha[-Pi] <= CVaR_alpha[-pi].

    Args:
        trade: Trade triple
        side: "buyer" or "seller"
        alpha: RiskLevel or alpha
        pi: Energy payments without options, aligned with scenarios
        spot: Spot prices, aligned with scenarios
        scenarios: Scenario set

    Returns:
        True when the trade does not raise the participant's CVaR
    """
    if trade.delta == 0:
        return True
    pi = np.asarray(pi, dtype=float)
    base = cvar(WeightedLossSample.from_scenarios(scenarios, -pi), alpha)
    with_option = cvar(
        WeightedLossSample.from_scenarios(scenarios, -(pi + option_values(spot, trade, side))), alpha
    )
    return with_option <= base + FEASIBILITY_TOL


def cvar_q_frontier(side: str, alpha, pi: np.ndarray, spot: np.ndarray, scenarios: ScenarioSet,
                    K: float, delta: float) -> float:
    """
    Option price at which cvar_accepts flips, for fixed strike and volume.

    By translation invariance the buyer accepts exactly when
    q <= [CVaR(-pi) - CVaR(-pi - Y delta)]/delta and the seller exactly when
    q >= [CVaR(-pi + Y delta) - CVaR(-pi)]/delta, with Y = (p - K)^+.
    """
    if not delta > 0:
        raise ConfigError(f"the q frontier needs delta > 0 (got {delta})")
    pi = np.asarray(pi, dtype=float)
    payoff = np.maximum(np.asarray(spot, dtype=float) - K, 0.0) * delta
    base = cvar(WeightedLossSample.from_scenarios(scenarios, -pi), alpha)
    if side == BUYER:
        return (base - cvar(WeightedLossSample.from_scenarios(scenarios, -pi - payoff), alpha)) / delta
    if side == SELLER:
        return (cvar(WeightedLossSample.from_scenarios(scenarios, -pi + payoff), alpha) - base) / delta
    raise ConfigError(f"side must be '{BUYER}' or '{SELLER}' (got {side!r})")
