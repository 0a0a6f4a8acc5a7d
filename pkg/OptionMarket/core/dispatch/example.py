"""
The stylised three-producer market: an inflexible baseload unit B (cost 1,
no ramping), a flexible peaker P (cost 1/rho, unbounded ramping) and a free
wind farm W whose available capacity is the scenario itself. Closed forms for
its spot price and loss regions are kept here next to the builder.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from core.dispatch.cost import CostCurve, DispatchableGen, MarketInstance, RenewableGen, UNBOUNDED
from core.scenario.scenario import SQRT3, UniformScenarioModel
from core.utils.errors import ConfigError

BASELOAD_ID = "B"
PEAKER_ID = "P"
WIND_ID = "W"


@dataclass(frozen=True)
class Interval:
    """Half-open scenario interval [lower, upper)."""
    lower: float
    upper: float

    @property
    def length(self) -> float:
        return self.upper - self.lower

    def contains(self, omega: float) -> bool:
        return self.lower <= omega < self.upper

    def is_subset_of(self, other: "Interval") -> bool:
        return other.lower <= self.lower and self.upper <= other.upper


def check_rho(rho: float) -> None:
    if not (0 < rho <= 1):
        raise ConfigError(f"rho must lie in (0, 1] (got rho={rho})")


def example_instance(demand: float, mu: float, sigma: float, rho: float,
                     extra_peakers: Sequence[Tuple[str, float]] = ()) -> MarketInstance:
    """
    Build the example market.

    Args:
        demand: Inflexible demand d (>= mu)
        mu: Mean wind availability
        sigma: Standard deviation of wind availability
        rho: Cost ratio; the peaker's marginal cost is 1/rho
        extra_peakers: (id, marginal cost) of additional unbounded peakers,
            each strictly more expensive than P

    Returns:
        MarketInstance
    """
    check_rho(rho)
    model = UniformScenarioModel(mu=mu, sigma=sigma)
    if demand < mu:
        raise ConfigError(f"the example market needs demand_mw >= mu_mw (got {demand} < {mu})")
    dispatchables = [
        DispatchableGen(BASELOAD_ID, cap=UNBOUNDED, ramp=0.0, cost=CostCurve.linear(1.0)),
        DispatchableGen(PEAKER_ID, cap=UNBOUNDED, ramp=UNBOUNDED, cost=CostCurve.linear(1.0 / rho)),
    ]
    for peaker_id, marginal_cost in extra_peakers:
        if not marginal_cost > 1.0 / rho:
            raise ConfigError(
                f"extra peaker {peaker_id} must cost more than P ({marginal_cost} <= {1.0 / rho})"
            )
        dispatchables.append(
            DispatchableGen(peaker_id, cap=UNBOUNDED, ramp=UNBOUNDED, cost=CostCurve.linear(marginal_cost))
        )
    wind = RenewableGen(WIND_ID, cap=mu + SQRT3 * sigma, cost=CostCurve.linear(0.0))
    return MarketInstance(demand=demand, dispatchables=dispatchables, renewables=[wind], model=model)


def spot_price_example(omega: float, mu: float, rho: float) -> float:
    """Real-time price of the example market: 1/rho when wind is short (omega <= mu), else 0."""
    check_rho(rho)
    return 1.0 / rho if omega <= mu else 0.0


def loss_region(mu: float, sigma: float, rho: float) -> Optional[Interval]:
    """
    Scenarios in which W's energy payment is negative, without options.

    W loses when (mu - omega)/rho > mu, i.e. omega < mu (1 - rho).

    Returns:
        [mu - sqrt(3) sigma, mu (1 - rho)) or None when empty
    """
    check_rho(rho)
    lower = mu - SQRT3 * sigma
    upper = mu * (1.0 - rho)
    if upper <= lower:
        return None
    return Interval(lower, upper)


def example_payments(omegas: np.ndarray, demand: float, mu: float, rho: float) -> Dict[str, np.ndarray]:
    """
    Vectorised two-settlement payments of the example market.

    Applies the settlement rules to the example's dispatch (B fixed at d - mu,
    W produces min(omega, mu), P covers the shortfall) for large scenario
    arrays where per-scenario dispatch would be slow.

    Returns:
        id -> payment array for B, P and W
    """
    omegas = np.asarray(omegas, dtype=float)
    spot = np.where(omegas <= mu, 1.0 / rho, 0.0)
    wind = np.minimum(omegas, mu)
    return {
        BASELOAD_ID: np.full(omegas.shape, demand - mu),
        PEAKER_ID: spot * (mu - wind),
        WIND_ID: mu + spot * (wind - mu),
    }


def example_spot_prices(omegas: np.ndarray, mu: float, rho: float) -> np.ndarray:
    return np.where(np.asarray(omegas, dtype=float) <= mu, 1.0 / rho, 0.0)
