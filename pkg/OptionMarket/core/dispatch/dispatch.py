"""
Dispatch Module

Two-settlement dispatch for block-offer markets. The day-ahead program caps
renewables at the certainty surrogate and stacks the merit order against the
inflexible demand; the real-time program re-dispatches every scenario inside
the ramp bands around the day-ahead set-points. Prices are the cost of serving
the next increment of demand (right derivative of the optimal cost).
"""

import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.dispatch.cost import (
    CONSUMER_ID, DispatchableGen, MarketInstance, RenewableGen, UNBOUNDED,
    identity_availability, is_unbounded,
)
from core.scenario.scenario import ScenarioSet, UniformScenarioModel, discretize, expect
from core.utils.config import FEASIBILITY_TOL, WORKERS
from core.utils.errors import InfeasibleError

logger = logging.getLogger(__name__)

# Spare capacity below this is treated as exhausted when locating the price
SPARE_TOL = 1e-12

# Quadrature size for renewables whose availability is not the scenario itself
SURROGATE_POINTS = 10000


@dataclass(frozen=True)
class ForwardResult:
    quantities: Dict[str, float]
    price: float
    cost: float = 0.0
    price_at_capacity: bool = False

    @property
    def total(self) -> float:
        return math.fsum(self.quantities.values())


@dataclass(frozen=True)
class RealTimeResult:
    omega: float
    quantities: Dict[str, float]
    price: float
    cost: float = 0.0
    price_at_capacity: bool = False


@dataclass(frozen=True)
class PaymentRecord:
    """Energy-market payment to one participant (negative for the consumer)."""
    id: str
    forward_pay: float
    realtime_pay: float
    total: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "total", self.forward_pay + self.realtime_pay)


@dataclass(frozen=True)
class _Band:
    unit_id: str
    lower: float
    upper: float
    unit: object


@dataclass
class _Slice:
    unit_id: str
    block: int
    capacity: float
    marginal_cost: float
    taken: float = 0.0

    @property
    def spare(self) -> float:
        if is_unbounded(self.capacity):
            return UNBOUNDED
        return self.capacity - self.taken


def certainty_surrogate(model: UniformScenarioModel, renewable: Optional[RenewableGen] = None) -> float:
    """
    Deterministic stand-in for available renewable capacity: E[availability].

    Args:
        model: Scenario model
        renewable: Producer whose availability is averaged; identity when omitted

    Returns:
        Surrogate capacity in MW (mu for the identity availability)
    """
    if renewable is None or renewable.availability is identity_availability:
        return model.mu
    grid = discretize(model, SURROGATE_POINTS)
    return expect(grid, renewable.available)


def _merit_order(bands: Sequence[_Band], demand: float) -> Tuple[Dict[str, float], float, float, bool]:
    """
    Stack block offers between per-unit lower and upper bounds.

    Lower bounds are must-run. Slices are taken by ascending marginal cost,
    then participant id, then block index.

    Returns:
        (quantities, price, cost, price_at_capacity)
    """
    must_run = math.fsum(b.lower for b in bands)
    upper_total = sum(b.upper for b in bands)
    if demand < must_run - FEASIBILITY_TOL or demand > upper_total + FEASIBILITY_TOL:
        raise InfeasibleError(
            f"demand {demand:.9g} MW outside the feasible range [{must_run:.9g}, {upper_total:.9g}] MW",
            demand=demand, lower=must_run, upper=upper_total,
        )

    slices: List[_Slice] = []
    for band in bands:
        for index, (start, end, mc) in enumerate(band.unit.cost.segments()):
            lo = max(start, band.lower)
            hi = min(end, band.upper)
            if hi > lo:
                slices.append(_Slice(band.unit_id, index, hi - lo, mc))
    slices.sort(key=lambda s: (s.marginal_cost, s.unit_id, s.block))

    residual = max(0.0, demand - must_run)
    for s in slices:
        if residual <= 0:
            break
        s.taken = min(s.capacity, residual)
        residual -= s.taken

    quantities = {b.unit_id: b.lower for b in bands}
    for s in slices:
        quantities[s.unit_id] += s.taken

    price_at_capacity = False
    price = None
    for s in slices:
        if s.spare > SPARE_TOL:
            price = s.marginal_cost
            break
    if price is None:
        # No increment can be served: report the most expensive block in use
        price_at_capacity = True
        used = [s.marginal_cost for s in slices if s.taken > 0]
        for band in bands:
            for start, end, mc in band.unit.cost.segments():
                if start < band.lower:
                    used.append(mc)
        price = max(used) if used else 0.0

    cost = math.fsum(b.unit.cost.cost(quantities[b.unit_id]) for b in bands)
    return quantities, price, cost, price_at_capacity


def day_ahead(instance: MarketInstance) -> ForwardResult:
    """
    Forward dispatch against the certainty surrogate.

    Args:
        instance: Market instance

    Returns:
        ForwardResult with set-points X_i and price P*
    """
    bands = [_Band(g.id, 0.0, g.effective_cap, g) for g in instance.dispatchables]
    for r in instance.renewables:
        surrogate = min(certainty_surrogate(instance.model, r), r.cost.total_capacity)
        bands.append(_Band(r.id, 0.0, surrogate, r))
    quantities, price, cost, at_cap = _merit_order(bands, instance.demand)
    if at_cap:
        logger.warning("Day-ahead demand meets total capacity; price taken from the last dispatched block")
    logger.debug("Day-ahead dispatch %s at P*=%s", quantities, price)
    return ForwardResult(quantities=quantities, price=price, cost=cost, price_at_capacity=at_cap)


def _ramp_band(unit: DispatchableGen, set_point: float) -> _Band:
    if is_unbounded(unit.ramp):
        return _Band(unit.id, 0.0, unit.effective_cap, unit)
    return _Band(unit.id, max(0.0, set_point - unit.ramp), min(unit.effective_cap, set_point + unit.ramp), unit)


def real_time(instance: MarketInstance, forward: ForwardResult, omega: float) -> RealTimeResult:
    """
    Re-dispatch one realised scenario inside the ramp bands.

    Args:
        instance: Market instance the forward result was computed on
        forward: Day-ahead result
        omega: Realised scenario

    Returns:
        RealTimeResult with quantities x_i and spot price p
    """
    bands = [_ramp_band(g, forward.quantities[g.id]) for g in instance.dispatchables]
    bands += [_Band(r.id, 0.0, r.available(omega), r) for r in instance.renewables]
    try:
        quantities, price, cost, at_cap = _merit_order(bands, instance.demand)
    except InfeasibleError as e:
        raise InfeasibleError(f"scenario omega={omega:.9g}: {e}", demand=e.demand, lower=e.lower, upper=e.upper)
    return RealTimeResult(omega=omega, quantities=quantities, price=price, cost=cost, price_at_capacity=at_cap)


def real_time_batch(instance: MarketInstance, forward: ForwardResult,
                    scenarios: ScenarioSet) -> List[RealTimeResult]:
    """Real-time results for every scenario, in scenario order."""
    omegas = scenarios.omegas.tolist()
    if WORKERS > 1:
        with ThreadPoolExecutor(max_workers=WORKERS) as pool:
            return list(pool.map(lambda w: real_time(instance, forward, w), omegas))
    return [real_time(instance, forward, w) for w in omegas]


def spot_prices(instance: MarketInstance, forward: ForwardResult, scenarios: ScenarioSet) -> np.ndarray:
    """Spot price p per scenario, aligned with the scenario set."""
    return np.array([rt.price for rt in real_time_batch(instance, forward, scenarios)], dtype=float)


def system_cost(instance: MarketInstance, quantities: Dict[str, float]) -> float:
    return math.fsum(u.cost.cost(quantities[u.id]) for u in instance.dispatchables + instance.renewables)


def payments(instance: MarketInstance, forward: ForwardResult, rt: RealTimeResult) -> List[PaymentRecord]:
    """
    Two-settlement energy payments.

    Producers receive P* X_i day-ahead and p (x_i - X_i) in real time. The
    consumer pays P* d and nothing in real time.

    Args:
        instance: Market instance
        forward: Day-ahead result
        rt: Real-time result for one scenario

    Returns:
        One record per producer in instance order, then the consumer record
    """
    records = []
    for unit_id in instance.participant_ids:
        X = forward.quantities[unit_id]
        x = rt.quantities[unit_id]
        records.append(PaymentRecord(unit_id, forward.price * X, rt.price * (x - X)))
    records.append(PaymentRecord(CONSUMER_ID, -forward.price * instance.demand, 0.0))
    return records


def payment_matrix(instance: MarketInstance, forward: ForwardResult,
                   scenarios: ScenarioSet) -> Tuple[Dict[str, np.ndarray], np.ndarray]:
    """
    Total energy payment per producer and scenario.

    Returns:
        (id -> payments aligned with the scenario set, spot prices)
    """
    results = real_time_batch(instance, forward, scenarios)
    table = {unit_id: np.empty(len(scenarios)) for unit_id in instance.participant_ids}
    prices = np.empty(len(scenarios))
    for k, rt in enumerate(results):
        prices[k] = rt.price
        for record in payments(instance, forward, rt):
            if record.id in table:
                table[record.id][k] = record.total
    return table, prices
