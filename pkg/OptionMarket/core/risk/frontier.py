"""
Frontier Tracing Module

Traces the boundary of a participant's CVaR-acceptable trades in the
(K, q) plane at a fixed volume: for every strike on a grid the option price at
which acceptance flips is located by bisection.
"""

import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from core.options.trade import TradeTriple
from core.risk.cvar import BUYER, SELLER, RiskLevel, cvar_accepts
from core.scenario.scenario import ScenarioSet
from core.utils.config import BISECTION_MAX_ITER, BISECTION_TOL, BOX_EPSILON, WORKERS
from core.utils.errors import ConfigError, NumericalError

logger = logging.getLogger(__name__)

STATUS_OK = "ok"
STATUS_UNBOUNDED = "unbounded"
STATUS_DEGENERATE = "degenerate"

# Points per strike used to check that acceptance is monotone in q
MONOTONICITY_POINTS = 21


@dataclass(frozen=True)
class FrontierPoint:
    K: float
    q_boundary: float
    alpha: float
    delta: float
    status: str = STATUS_OK


def _accept_flags(side, alpha, delta, K, qs, pi, spot, scenarios) -> List[bool]:
    return [cvar_accepts(TradeTriple(q, K, delta), side, alpha, pi, spot, scenarios) for q in qs]


def _is_monotone(side: str, flags: Sequence[bool]) -> bool:
    # Buyers accept a prefix of increasing q, sellers a suffix
    ordered = list(flags) if side == BUYER else list(reversed(flags))
    seen_reject = False
    for accepted in ordered:
        if accepted and seen_reject:
            return False
        seen_reject = seen_reject or not accepted
    return True


def _trace_one(side, alpha, delta, K, bracket, pi, spot, scenarios) -> FrontierPoint:
    lo, hi = bracket
    if delta == 0:
        return FrontierPoint(K, math.nan, alpha, delta, STATUS_DEGENERATE)

    q_points = np.linspace(lo, hi, MONOTONICITY_POINTS)
    flags = _accept_flags(side, alpha, delta, K, q_points, pi, spot, scenarios)
    if not _is_monotone(side, flags):
        raise NumericalError(f"acceptance is not monotone in q at K={K}", K=K)
    if all(flags) or not any(flags):
        logger.debug("No acceptance flip in q-bracket [%s, %s] at K=%s", lo, hi, K)
        return FrontierPoint(K, math.nan, alpha, delta, STATUS_UNBOUNDED)

    def signed(q: float) -> float:
        return 1.0 if cvar_accepts(TradeTriple(q, K, delta), side, alpha, pi, spot, scenarios) else -1.0

    q_star = optimize.bisect(signed, lo, hi, xtol=BISECTION_TOL, maxiter=BISECTION_MAX_ITER)
    return FrontierPoint(K, q_star, alpha, delta)


def boundary_trace(side: str, alpha, delta: float, k_grid: Sequence[float],
                   q_bracket: Optional[Tuple[float, float]], pi: np.ndarray, spot: np.ndarray,
                   scenarios: ScenarioSet) -> List[FrontierPoint]:
    """
    Boundary of the acceptable set along each strike of a grid.

    Args:
        side: "buyer" or "seller"
        alpha: Risk level
        delta: Trade volume
        k_grid: Strikes
        q_bracket: Option-price bracket; defaults to [BOX_EPSILON, max(1, max spot)]
        pi: Energy payments without options, aligned with scenarios
        spot: Spot prices, aligned with scenarios
        scenarios: Scenario set

    Returns:
        One FrontierPoint per strike, in grid order
    """
    if side not in (BUYER, SELLER):
        raise ConfigError(f"side must be '{BUYER}' or '{SELLER}' (got {side!r})")
    alpha = RiskLevel(float(alpha)).alpha
    if delta < 0:
        raise ConfigError(f"delta must be >= 0 (got {delta})")
    spot = np.asarray(spot, dtype=float)
    pi = np.asarray(pi, dtype=float)
    if q_bracket is None:
        q_bracket = (BOX_EPSILON, max(1.0, float(np.max(spot))))
    lo, hi = q_bracket
    if not lo < hi:
        raise ConfigError(f"q bracket must satisfy lower < upper (got {q_bracket})")

    def trace(K: float) -> FrontierPoint:
        return _trace_one(side, alpha, delta, float(K), (lo, hi), pi, spot, scenarios)

    logger.info("Tracing %s frontier at alpha=%s, delta=%s over %d strikes", side, alpha, delta, len(k_grid))
    if WORKERS > 1:
        with ThreadPoolExecutor(max_workers=WORKERS) as pool:
            return list(pool.map(trace, k_grid))
    return [trace(K) for K in k_grid]
