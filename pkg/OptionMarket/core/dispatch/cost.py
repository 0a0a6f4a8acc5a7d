"""
Market description types: block cost curves, dispatchable and renewable
generators, and the market instance the system operator dispatches.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from core.scenario.scenario import UniformScenarioModel, support
from core.utils.errors import ConfigError

# Sentinel for unbounded capacity, ramp or block size. Quantities are clipped
# against it with min(); it is never multiplied.
UNBOUNDED = math.inf

# Ids reserved for settlement ledgers
CONSUMER_ID = "demand"
MARKET_MAKER_ID = "M"


def is_unbounded(value: float) -> bool:
    return math.isinf(value)


@dataclass(frozen=True)
class CostBlock:
    capacity: float
    marginal_cost: float


@dataclass(frozen=True)
class CostCurve:
    """
    Piecewise-linear convex cost: ordered blocks of (capacity MW, $/MWh).

    Only the final block may be UNBOUNDED.
    """
    blocks: Tuple[CostBlock, ...]

    def __post_init__(self):
        blocks = tuple(b if isinstance(b, CostBlock) else CostBlock(*b) for b in self.blocks)
        if not blocks:
            raise ConfigError("a cost curve needs at least one block")
        for i, block in enumerate(blocks):
            if not (block.capacity > 0):
                raise ConfigError(f"cost block {i} capacity must be > 0 (got {block.capacity})")
            if is_unbounded(block.capacity) and i != len(blocks) - 1:
                raise ConfigError("only the final cost block may be unbounded")
            if i and block.marginal_cost < blocks[i - 1].marginal_cost:
                raise ConfigError(
                    f"marginal costs must be nondecreasing (block {i}: {block.marginal_cost} "
                    f"< {blocks[i - 1].marginal_cost})"
                )
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def linear(cls, marginal_cost: float) -> "CostCurve":
        """Single unbounded block at a constant marginal cost."""
        return cls(blocks=(CostBlock(UNBOUNDED, marginal_cost),))

    @property
    def total_capacity(self) -> float:
        if is_unbounded(self.blocks[-1].capacity):
            return UNBOUNDED
        return math.fsum(b.capacity for b in self.blocks)

    def segments(self) -> List[Tuple[float, float, float]]:
        """Blocks as (start MW, end MW, marginal cost); end may be UNBOUNDED."""
        out = []
        start = 0.0
        for block in self.blocks:
            end = UNBOUNDED if is_unbounded(block.capacity) else start + block.capacity
            out.append((start, end, block.marginal_cost))
            start = end
        return out

    def cost(self, x: float) -> float:
        """Production cost of x MW (integral of the marginal cost from 0)."""
        if x < 0:
            raise ConfigError(f"production must be >= 0 (got {x})")
        total = 0.0
        for start, end, mc in self.segments():
            if x <= start:
                break
            total += (min(x, end) - start) * mc
        return total


@dataclass(frozen=True)
class DispatchableGen:
    """Dispatchable generator g with capacity x_g^cap and ramp limit l_g."""
    id: str
    cap: float
    ramp: float
    cost: CostCurve

    def __post_init__(self):
        if self.cap < 0:
            raise ConfigError(f"{self.id}: cap must be >= 0")
        if self.ramp < 0:
            raise ConfigError(f"{self.id}: ramp must be >= 0")

    @property
    def effective_cap(self) -> float:
        return min(self.cap, self.cost.total_capacity)


def identity_availability(omega: float) -> float:
    return omega


@dataclass(frozen=True)
class RenewableGen:
    """Variable producer r; availability maps a scenario to available MW."""
    id: str
    cap: float
    cost: CostCurve
    availability: Callable[[float], float] = field(default=identity_availability)

    def __post_init__(self):
        if self.cap < 0:
            raise ConfigError(f"{self.id}: installed cap must be >= 0")

    def available(self, omega: float) -> float:
        return min(self.availability(omega), self.cost.total_capacity)


@dataclass(frozen=True)
class MarketInstance:
    """Inflexible demand d, generators and the wind scenario model."""
    demand: float
    dispatchables: Tuple[DispatchableGen, ...]
    renewables: Tuple[RenewableGen, ...]
    model: UniformScenarioModel

    def __post_init__(self):
        object.__setattr__(self, "dispatchables", tuple(self.dispatchables))
        object.__setattr__(self, "renewables", tuple(self.renewables))
        if self.demand < 0:
            raise ConfigError(f"demand must be >= 0 (got {self.demand})")
        ids = [u.id for u in self.dispatchables] + [r.id for r in self.renewables]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"participant ids must be unique (got {ids})")
        for reserved in (CONSUMER_ID, MARKET_MAKER_ID):
            if reserved in ids:
                raise ConfigError(f"participant id '{reserved}' is reserved")
        lo, hi = support(self.model)
        omegas = np.linspace(lo, hi, 101)
        for r in self.renewables:
            for omega in omegas:
                a = r.availability(float(omega))
                if a < 0 or a > r.cap:
                    raise ConfigError(
                        f"{r.id}: availability({omega:.6g}) = {a:.6g} outside [0, {r.cap}]"
                    )

    @property
    def participant_ids(self) -> List[str]:
        return [u.id for u in self.dispatchables] + [r.id for r in self.renewables]

    def unit(self, unit_id: str):
        for u in self.dispatchables + self.renewables:
            if u.id == unit_id:
                return u
        raise KeyError(unit_id)

    def is_dispatchable(self, unit_id: str) -> bool:
        return any(u.id == unit_id for u in self.dispatchables)


def cost_curve_from_blocks(blocks: Sequence[Tuple[Optional[float], float]]) -> CostCurve:
    """Build a CostCurve from (capacity or None for unbounded, marginal cost) pairs."""
    return CostCurve(blocks=tuple(
        CostBlock(UNBOUNDED if cap is None else float(cap), float(mc)) for cap, mc in blocks
    ))
