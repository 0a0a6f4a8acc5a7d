"""
Acceptability Module

The market maker's allowable-trade box and the participants' sets of
acceptable trades. A set is described by linear inequalities in (q, K, delta),
by a membership oracle paired with its price frontier, or by both. Every set
exposes q_interval(K), the option prices acceptable at strike K for every
volume in the box, which is what the clearing search needs.
"""

import math
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from core.options.trade import TradeTriple
from core.risk.cvar import BUYER, SELLER, cvar_accepts, cvar_q_frontier, option_values
from core.scenario.scenario import ScenarioSet, expect
from core.utils.config import BOX_EPSILON, FEASIBILITY_TOL
from core.utils.errors import ConfigError

logger = logging.getLogger(__name__)

CHECK_POINTS = 9


class Side(str, Enum):
    BUYER = BUYER
    SELLER = SELLER


class Sense(str, Enum):
    LE = "<="
    GE = ">="


@dataclass(frozen=True)
class AllowableBox:
    """[epsilon, q_max] x [epsilon, K_max] x [epsilon, delta_max]."""
    q_max: float
    K_max: float
    delta_max: float
    epsilon: float = BOX_EPSILON

    def __post_init__(self):
        for name in ("q_max", "K_max", "delta_max"):
            value = getattr(self, name)
            if not value > 0:
                raise ConfigError(f"box {name} must be > 0 (got {value})")
            if not self.epsilon < value:
                raise ConfigError(f"box epsilon {self.epsilon} must be below {name}={value}")
        if not self.epsilon > 0:
            raise ConfigError(f"box epsilon must be > 0 (got {self.epsilon})")

    @property
    def center(self) -> Tuple[float, float]:
        """(q, K) centre used to break ties between equally good trades."""
        return (self.q_max / 2.0, self.K_max / 2.0)

    def contains(self, trade: TradeTriple, tol: float = FEASIBILITY_TOL) -> bool:
        lo = self.epsilon - tol
        return (lo <= trade.q <= self.q_max + tol
                and lo <= trade.K <= self.K_max + tol
                and lo <= trade.delta <= self.delta_max + tol)

    def clip_K(self, K: float) -> float:
        return min(max(K, self.epsilon), self.K_max)


@dataclass(frozen=True)
class LinearConstraint:
    """a q + b K + c delta (<= | >=) rhs."""
    a: float
    b: float
    c: float
    sense: Sense
    rhs: float

    def __post_init__(self):
        object.__setattr__(self, "sense", Sense(self.sense))

    def value(self, q: float, K: float, delta: float) -> float:
        return self.a * q + self.b * K + self.c * delta

    def holds(self, trade: TradeTriple, tol: float = FEASIBILITY_TOL) -> bool:
        lhs = self.value(trade.q, trade.K, trade.delta)
        if self.sense is Sense.LE:
            return lhs <= self.rhs + tol
        return lhs >= self.rhs - tol


@dataclass(frozen=True)
class AcceptabilitySet:
    """
    Trades a participant weakly prefers to not trading.

    An oracle needs its frontier: the map from a strike to the option price
    at which the oracle flips for every volume up to the box cap (buyers
    accept below it, sellers above it).
    """
    box: AllowableBox
    side: Side
    constraints: Tuple[LinearConstraint, ...] = ()
    oracle: Optional[Callable[[TradeTriple], bool]] = None
    frontier: Optional[Callable[[float], float]] = None
    label: str = "linear"

    def __post_init__(self):
        object.__setattr__(self, "side", Side(self.side))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if self.oracle is not None and self.frontier is None:
            raise ConfigError(f"{self.side.value} acceptability set ({self.label}) has an oracle but no frontier")
        grid = np.linspace(self.box.epsilon, self.box.K_max, CHECK_POINTS)
        if not any(self.q_interval(float(K)) is not None for K in grid):
            raise ConfigError(
                f"{self.side.value} acceptability set ({self.label}) does not meet the allowable box"
            )

    def accepts(self, trade: TradeTriple, tol: float = FEASIBILITY_TOL) -> bool:
        if not self.box.contains(trade, tol):
            return False
        if not all(c.holds(trade, tol) for c in self.constraints):
            return False
        return self.oracle is None or self.oracle(trade)

    def q_interval(self, K: float) -> Optional[Tuple[float, float]]:
        """
        Option prices acceptable at strike K for every volume in [epsilon, delta_max].

        Returns:
            (q_low, q_high) inside the box, or None when no price is acceptable
        """
        box = self.box
        lo, hi = box.epsilon, box.q_max
        volumes = (box.epsilon, box.delta_max)
        for c in self.constraints:
            if c.a == 0:
                if not all(c.holds(TradeTriple(lo, K, d)) for d in volumes):
                    return None
                continue
            bounds = [(c.rhs - c.b * K - c.c * d) / c.a for d in volumes]
            upper = (c.sense is Sense.LE) == (c.a > 0)
            if upper:
                hi = min(hi, min(bounds))
            else:
                lo = max(lo, max(bounds))
        if self.frontier is not None:
            q_star = self.frontier(K)
            if self.side is Side.BUYER:
                hi = min(hi, q_star)
            else:
                lo = max(lo, q_star)
        if lo > hi + FEASIBILITY_TOL:
            return None
        return (lo, max(lo, hi))

@dataclass(frozen=True)
class ParticipantBid:
    id: str
    side: Side
    acceptability: AcceptabilitySet

    def __post_init__(self):
        object.__setattr__(self, "side", Side(self.side))
        if self.acceptability.side is not self.side:
            raise ConfigError(f"{self.id}: bid side {self.side.value} does not match its acceptability set")


def expected_option_payoff(side: Side, trade: TradeTriple, spot: np.ndarray, scenarios: ScenarioSet) -> float:
    """E[Pi - pi] for one side; the seller assumes the full volume is exercised."""
    return expect(scenarios, option_values(spot, trade, Side(side).value))


def spot_levels(spot: np.ndarray, scenarios: ScenarioSet) -> Tuple[np.ndarray, np.ndarray]:
    levels, inverse = np.unique(np.asarray(spot, dtype=float), return_inverse=True)
    mass = np.array([math.fsum(scenarios.weights[inverse == k]) for k in range(levels.size)])
    return levels, mass


def risk_neutral_acceptability(bid_side, payments_pi: Optional[np.ndarray], spot: np.ndarray,
                               scenarios: ScenarioSet, box: AllowableBox) -> AcceptabilitySet:
    """
    Risk-neutral set of acceptable trades: E[Pi] >= E[pi].

    When every spot price is either 0 or a single level h (probability w),
    the set is the half-space q/w + K <= h for buyers (>= h for sellers),
    which is emitted as a linear constraint. Otherwise the set is the oracle
    E[+-(-q + (p - K)^+)] >= 0 with frontier q = E[(p - K)^+].

    Args:
        bid_side: "buyer" or "seller"
        payments_pi: Energy payments without options (unused; the test depends
            on the option cash flows only)
        spot: Spot prices aligned with scenarios
        scenarios: Scenario set
        box: Allowable-trade box

    Returns:
        AcceptabilitySet
    """
    side = Side(bid_side)
    spot = np.asarray(spot, dtype=float)
    if spot.shape != scenarios.weights.shape:
        raise ConfigError("spot prices must be aligned with the scenario set")
    levels, mass = spot_levels(spot, scenarios)
    positive = levels > 0

    if np.count_nonzero(positive) == 1:
        h = float(levels[positive][0])
        w = float(mass[positive][0])
        sense = Sense.LE if side is Side.BUYER else Sense.GE
        constraint = LinearConstraint(a=1.0 / w, b=1.0, c=0.0, sense=sense, rhs=h)
        logger.debug("Risk-neutral %s set is the half-space %.6g q + K %s %.6g", side.value, 1.0 / w, sense.value, h)
        return AcceptabilitySet(box=box, side=side, constraints=(constraint,), label="risk_neutral")

    def frontier(K: float) -> float:
        return expect(scenarios, np.maximum(spot - K, 0.0))

    def oracle(trade: TradeTriple) -> bool:
        return expected_option_payoff(side, trade, spot, scenarios) >= -FEASIBILITY_TOL

    return AcceptabilitySet(box=box, side=side, oracle=oracle, frontier=frontier, label="risk_neutral")


def cvar_acceptability(bid_side, alpha: float, payments_pi: np.ndarray, spot: np.ndarray,
                       scenarios: ScenarioSet, box: AllowableBox) -> AcceptabilitySet:
    """
    Risk-averse set CVaR_alpha[-Pi] <= CVaR_alpha[-pi].

    Acceptance at the volume cap implies acceptance at every smaller volume,
    so the frontier is evaluated at delta_max.
    """
    side = Side(bid_side)
    spot = np.asarray(spot, dtype=float)
    pi = np.asarray(payments_pi, dtype=float)

    def frontier(K: float) -> float:
        return cvar_q_frontier(side.value, alpha, pi, spot, scenarios, K, box.delta_max)

    def oracle(trade: TradeTriple) -> bool:
        return cvar_accepts(trade, side.value, alpha, pi, spot, scenarios)

    return AcceptabilitySet(box=box, side=side, oracle=oracle, frontier=frontier, label=f"cvar({alpha})")


def linear_acceptability(bid_side, constraints: Sequence[LinearConstraint], box: AllowableBox) -> AcceptabilitySet:
    return AcceptabilitySet(box=box, side=Side(bid_side), constraints=tuple(constraints), label="linear")
