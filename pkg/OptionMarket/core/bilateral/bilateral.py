"""
Bilateral Option Module

Stackelberg game between the peaker P (leader, posts option price q and strike
K) and the wind farm W (follower, picks the volume delta up to sqrt(3) sigma)
on the example market. Provides the expected option payoffs, W's best
response, the equilibrium classification and the variance machinery used to
show that equilibrium trades reduce payment variance for both producers.
"""

import math
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from core.dispatch.example import Interval, check_rho, example_payments, example_spot_prices, loss_region
from core.options.trade import TradeTriple, buyer_option_values
from core.scenario.scenario import SQRT3, UniformScenarioModel, sample
from core.utils.config import EQUILIBRIUM_TOL
from core.utils.errors import ConfigError

logger = logging.getLogger(__name__)


class ResponseKind(str, Enum):
    ZERO = "zero"
    FULL = "full"
    INTERVAL = "interval"


@dataclass(frozen=True)
class BestResponseSet:
    """W's optimal volumes: {0}, {cap} or the whole interval [0, cap]."""
    kind: ResponseKind
    cap: float

    @property
    def values(self) -> Tuple[float, float]:
        """Closed interval (lower, upper) of optimal volumes."""
        if self.kind is ResponseKind.ZERO:
            return (0.0, 0.0)
        if self.kind is ResponseKind.FULL:
            return (self.cap, self.cap)
        return (0.0, self.cap)

    def contains(self, delta: float, tol: float = 1e-12) -> bool:
        lower, upper = self.values
        return lower - tol <= delta <= upper + tol

    def describe(self) -> str:
        if self.kind is ResponseKind.INTERVAL:
            return f"[0, {self.cap:.6g}]"
        return "{%.6g}" % self.values[0]


class EquilibriumClass(str, Enum):
    N1 = "N1"      # 2q + K > 1/rho, W does not trade
    N2 = "N2"      # 2q + K = 1/rho, W is indifferent
    NONE = "none"  # 2q + K < 1/rho, P would rather deviate


def volume_cap(model: UniformScenarioModel) -> float:
    return SQRT3 * model.sigma


def _boundary_gap(q: float, K: float, rho: float) -> float:
    return 2.0 * q + K - 1.0 / rho


def expected_buyer_option_payoff(model: UniformScenarioModel, rho: float, trade: TradeTriple) -> float:
    """
    E[V_W]: W's expected payoff from the option alone.

    The option is in the money with probability 1/2 (when omega <= mu) and then
    pays 1/rho - K per MW.

    Args:
        model: Scenario model
        rho: Cost ratio in (0, 1]
        trade: Trade triple

    Returns:
        -q delta if K > 1/rho, else -(delta/2)(2q + K - 1/rho)
    """
    check_rho(rho)
    if trade.K > 1.0 / rho:
        return -trade.q * trade.delta
    return -(trade.delta / 2.0) * _boundary_gap(trade.q, trade.K, rho)


def expected_seller_option_payoff(model: UniformScenarioModel, rho: float, trade: TradeTriple) -> float:
    """E[V_P] = -E[V_W]; the option is zero-sum."""
    return -expected_buyer_option_payoff(model, rho, trade)


def best_response(q: float, K: float, model: UniformScenarioModel, rho: float,
                  tol: float = EQUILIBRIUM_TOL) -> BestResponseSet:
    """
    W's best-response volumes to a posted (q, K).

    Args:
        q: Option price
        K: Strike price
        model: Scenario model (sets the cap sqrt(3) sigma)
        rho: Cost ratio
        tol: Tolerance on 2q + K = 1/rho, relative to 1/rho

    Returns:
        BestResponseSet
    """
    if q < 0 or K < 0:
        raise ConfigError(f"best_response needs q, K >= 0 (got q={q}, K={K})")
    check_rho(rho)
    cap = volume_cap(model)
    gap = _boundary_gap(q, K, rho)
    if K > 1.0 / rho:
        kind = ResponseKind.ZERO
    elif abs(gap) <= tol / rho:
        kind = ResponseKind.INTERVAL
    elif gap < 0:
        kind = ResponseKind.FULL
    else:
        kind = ResponseKind.ZERO
    return BestResponseSet(kind=kind, cap=cap)


def classify_equilibrium(q: float, K: float, rho: float, tol: float = EQUILIBRIUM_TOL) -> EquilibriumClass:
    """
    Classify a posted (q, K) as an N1 equilibrium, an N2 equilibrium or neither.

    Args:
        q: Option price
        K: Strike price
        rho: Cost ratio
        tol: Tolerance on 2q + K = 1/rho, relative to 1/rho

    Returns:
        EquilibriumClass
    """
    if not tol > 0:
        raise ConfigError(f"tol must be > 0 (got {tol})")
    check_rho(rho)
    gap = _boundary_gap(q, K, rho)
    if abs(gap) <= tol / rho:
        return EquilibriumClass.N2
    if gap > 0:
        return EquilibriumClass.N1
    return EquilibriumClass.NONE


def variance_delta_analytic(q: float, K: float, sigma: float) -> float:
    """
    var[Pi_W] - var[pi_W] at an N2 point with delta = sqrt(3) sigma.

    With pi_W = mu - (mu - omega)^+/rho and V_W = +-q sqrt(3) sigma, the sum
    2 cov(pi_W, V_W) + var[V_W] equals 3 q^2 sigma^2 - 3 q sigma^2/(2 rho),
    which is -(3/2) q K sigma^2 on 2q + K = 1/rho. The same value holds for P.
    """
    return -1.5 * q * K * sigma * sigma


def variance_delta_monte_carlo(model: UniformScenarioModel, rho: float, trade: TradeTriple,
                               n: int, seed: int, participant: str = "W") -> Tuple[float, float]:
    """
    Simulated var[Pi_i] - var[pi_i] with its standard error.

    The per-draw terms (Pi - mean Pi)^2 - (pi - mean pi)^2 average to the
    variance delta; their spread gives the standard error.

    Args:
        model: Scenario model
        rho: Cost ratio
        trade: Option trade (W buys, P sells)
        n: Number of draws
        seed: PCG64 seed
        participant: "W" or "P"

    Returns:
        (estimate, standard error)
    """
    if participant not in ("W", "P"):
        raise ConfigError(f"participant must be W or P (got {participant})")
    draws = sample(model, n, seed)
    omegas = draws.omegas
    # Demand does not enter W's or P's payments
    pi = example_payments(omegas, model.mu, model.mu, rho)[participant]
    v = buyer_option_values(example_spot_prices(omegas, model.mu, rho), trade)
    if participant == "P":
        v = -v
    total = pi + v
    terms = (total - total.mean()) ** 2 - (pi - pi.mean()) ** 2
    estimate = float(terms.mean())
    stderr = float(terms.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    logger.debug("Monte Carlo variance delta for %s: %.6g +- %.2g (n=%d)", participant, estimate, stderr, n)
    return estimate, stderr


def negative_region_with_option(q: float, mu: float, sigma: float, rho: float) -> Optional[Interval]:
    """
    Scenarios in which W's total payment stays negative after the N2 trade.

    With delta = sqrt(3) sigma, W is short only when
    (mu - omega)/rho > mu + q sqrt(3) sigma.

    Returns:
        [mu - sqrt(3) sigma, mu (1 - rho) - rho q sqrt(3) sigma) or None when empty
    """
    check_rho(rho)
    if q < 0:
        raise ConfigError(f"q must be >= 0 (got {q})")
    without = loss_region(mu, sigma, rho)
    if without is None:
        return None
    upper = mu * (1.0 - rho) - rho * q * SQRT3 * sigma
    if upper <= without.lower:
        return None
    return Interval(without.lower, upper)


def n2_trade(q: float, model: UniformScenarioModel, rho: float) -> TradeTriple:
    """Canonical N2 representative: K = 1/rho - 2q and delta = sqrt(3) sigma."""
    check_rho(rho)
    if not 0 <= q <= 1.0 / (2.0 * rho):
        raise ConfigError(f"q must lie in [0, 1/(2 rho)] = [0, {1.0 / (2.0 * rho)}] (got {q})")
    return TradeTriple(q=q, K=1.0 / rho - 2.0 * q, delta=volume_cap(model))
