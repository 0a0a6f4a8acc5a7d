"""
Closed-form clearing of the example market (one buyer W, one seller P, spot
price 1/rho when omega <= mu and 0 otherwise) and the zero-surplus variant
solved by Newton-Raphson.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from core.clearing.acceptability import Side
from core.clearing.clearing import (
    MAX_MS, ZERO_MS, ClearingSolution, allocate_exercise, build_solution, ms_for_spot,
)
from core.dispatch.example import PEAKER_ID, WIND_ID, check_rho, example_spot_prices
from core.options.trade import TradeTriple
from core.scenario.scenario import SQRT3, ScenarioSet, UniformScenarioModel, discretize
from core.utils.config import NEWTON_MAX_ITER, NEWTON_TOL
from core.utils.errors import ConfigError, NumericalError

logger = logging.getLogger(__name__)

# Even, so no midpoint lands exactly on omega = mu
ANALYTIC_SCENARIOS = 1000

EXAMPLE_SIDES = {WIND_ID: Side.BUYER, PEAKER_ID: Side.SELLER}


def _example_scenarios(mu: float, sigma: float, scenarios: Optional[ScenarioSet]) -> ScenarioSet:
    if scenarios is not None:
        return scenarios
    return discretize(UniformScenarioModel(mu=mu, sigma=sigma), ANALYTIC_SCENARIOS)


def example_solution(trades: Dict[str, TradeTriple], mu: float, sigma: float, rho: float,
                     scenarios: Optional[ScenarioSet] = None, objective: str = MAX_MS) -> ClearingSolution:
    """Evaluate given W/P trades on the example market's spot prices."""
    check_rho(rho)
    scenarios = _example_scenarios(mu, sigma, scenarios)
    spot = example_spot_prices(scenarios.omegas, mu, rho)
    return build_solution(trades, EXAMPLE_SIDES, scenarios, spot, objective)


def clear_example_analytic(mu: float, sigma: float, rho: float, q_choice: Tuple[float, float],
                           scenarios: Optional[ScenarioSet] = None) -> ClearingSolution:
    """
    Optimal clearing of the example market for chosen option prices.

    Every trade with 2q_i + K_i = 1/rho and delta_W = delta_P is optimal with
    zero expected surplus; delta is set to the cap sqrt(3) sigma.

    Args:
        mu, sigma, rho: Example market parameters
        q_choice: (q_W, q_P), each in (0, 1/(2 rho))
        scenarios: Scenario set for the per-scenario surplus (midpoint grid by default)

    Returns:
        ClearingSolution with exercise delta_P = delta 1{omega <= mu}
    """
    check_rho(rho)
    limit = 1.0 / (2.0 * rho)
    for name, q in zip((WIND_ID, PEAKER_ID), q_choice):
        if not 0 < q < limit:
            raise ConfigError(f"q_{name} must lie in (0, {limit}) (got {q})")
    delta = SQRT3 * sigma
    trades = {
        pid: TradeTriple(q=q, K=1.0 / rho - 2.0 * q, delta=delta)
        for pid, q in zip((WIND_ID, PEAKER_ID), q_choice)
    }
    return example_solution(trades, mu, sigma, rho, scenarios)


@dataclass(frozen=True)
class NewtonStep:
    iteration: int
    residual: float
    q_W: float
    K_W: float
    q_P: float
    K_P: float


@dataclass(frozen=True)
class NewtonResult:
    trades: Dict[str, TradeTriple]
    iterations: int
    residual: float
    history: List[NewtonStep] = field(default_factory=list)

    @property
    def q(self) -> float:
        """Common option price at convergence."""
        return self.trades[WIND_ID].q


def _residuals(z: np.ndarray, rho: float, delta: float) -> np.ndarray:
    q_w, k_w, q_p, k_p = z
    c = 1.0 / rho
    trades = {WIND_ID: TradeTriple(max(q_w, 0.0), max(k_w, 0.0), delta),
              PEAKER_ID: TradeTriple(max(q_p, 0.0), max(k_p, 0.0), delta)}
    ms = [ms_for_spot(trades, EXAMPLE_SIDES, p, allocate_exercise(trades, EXAMPLE_SIDES, p)) for p in (c, 0.0)]
    return np.array([ms[0], ms[1], 2.0 * q_w + k_w - c, 2.0 * q_p + k_p - c])


def _jacobian(z: np.ndarray, rho: float, delta: float) -> np.ndarray:
    q_w, k_w, q_p, k_p = z
    c = 1.0 / rho
    w_in = 1.0 if k_w < c else 0.0
    p_in = 1.0 if k_p < c else 0.0
    exercised = 1.0 if c >= k_w else 0.0
    return np.array([
        [delta, delta * w_in, -delta, -delta * p_in * exercised],
        [delta, 0.0, -delta, 0.0],
        [2.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 2.0, 1.0],
    ])


def newton_zero_ms(mu: float, sigma: float, rho: float, init: Tuple[float, float],
                   strike_init: Optional[Tuple[float, float]] = None,
                   tol: float = NEWTON_TOL, max_iter: int = NEWTON_MAX_ITER) -> NewtonResult:
    """
    Zero merchandising surplus in both price branches, with 2q_i + K_i = 1/rho.

    The unknowns are (q_W, K_W, q_P, K_P) and delta is the cap sqrt(3) sigma.
    The solution set is a line, so the Jacobian is rank deficient; each step
    is the minimum-norm least-squares step, which lands on the projection of
    the current point onto that line.

    Args:
        mu, sigma, rho: Example market parameters
        init: Starting option prices (q_W, q_P)
        strike_init: Starting strikes; both 1/(2 rho) when omitted
        tol: Convergence threshold on the residual max-norm
        max_iter: Maximum number of residual evaluations

    Returns:
        NewtonResult; iterations counts residual evaluations
    """
    check_rho(rho)
    limit = 1.0 / rho
    for q in init:
        if not 0 <= q <= limit:
            raise ConfigError(f"initial option prices must lie in [0, {limit}] (got {init})")
    if strike_init is None:
        strike_init = (limit / 2.0, limit / 2.0)
    delta = UniformScenarioModel(mu=mu, sigma=sigma).half_width
    z = np.array([init[0], strike_init[0], init[1], strike_init[1]], dtype=float)

    history = []
    residual = np.inf
    for iteration in range(1, max_iter + 1):
        F = _residuals(z, rho, delta)
        residual = float(np.max(np.abs(F)))
        history.append(NewtonStep(iteration, residual, *z.tolist()))
        logger.debug("Newton iteration %d: residual %.3e at %s", iteration, residual, z)
        if residual < tol:
            trades = {WIND_ID: TradeTriple(z[0], z[1], delta), PEAKER_ID: TradeTriple(z[2], z[3], delta)}
            return NewtonResult(trades=trades, iterations=iteration, residual=residual, history=history)
        step, *_ = np.linalg.lstsq(_jacobian(z, rho, delta), -F, rcond=None)
        z = z + step
    raise NumericalError(
        f"Newton iteration did not converge in {max_iter} steps (residual {residual:.3e})",
        residual=residual, iterations=max_iter,
    )


def newton_solution(result: NewtonResult, mu: float, sigma: float, rho: float,
                    scenarios: Optional[ScenarioSet] = None) -> ClearingSolution:
    return example_solution(result.trades, mu, sigma, rho, scenarios, objective=ZERO_MS)
