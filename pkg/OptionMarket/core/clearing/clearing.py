"""
Clearing Module

The market maker M clears the option market day-ahead: it picks a trade
(q_i, K_i, delta_i) inside every participant's acceptable set and plans,
per scenario, how the exercised volume is split among sellers, so that its
merchandising surplus is maximised in expectation (max-ms) or is zero in every
scenario (zero-ms).

Strikes only matter through comparisons with the finitely many spot levels,
so each participant's strike is searched over breakpoints of those levels
(plus box ends and one interior point per gap). For a fixed strike profile
the option prices sit on the acceptability frontiers and the volumes and
exercise allocations solve a linear program (scipy HiGHS).
"""

import math
import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from core.clearing.acceptability import AllowableBox, ParticipantBid, Side, spot_levels
from core.options.trade import TradeTriple
from core.scenario.scenario import ScenarioSet, expect
from core.utils.config import (
    COORDINATE_DESCENT_SWEEPS, FEASIBILITY_TOL, MAX_EXACT_PARTICIPANTS, OPTIMALITY_TOL,
)
from core.utils.errors import ConfigError, NumericalError

logger = logging.getLogger(__name__)

MAX_MS = "max-ms"
ZERO_MS = "zero-ms"
OBJECTIVES = (MAX_MS, ZERO_MS)

# Volumes below this are reported as no trade
NO_TRADE_VOLUME = 1e-9
MAX_CANDIDATE_PROFILES = 20000


@dataclass(frozen=True)
class ClearingProblem:
    bids: Tuple[ParticipantBid, ...]
    scenarios: ScenarioSet
    spot: np.ndarray
    objective: str = MAX_MS
    exercise_split: Optional[Dict[str, float]] = None

    def __post_init__(self):
        object.__setattr__(self, "bids", tuple(self.bids))
        spot = np.asarray(self.spot, dtype=float)
        if spot.shape != self.scenarios.weights.shape or not np.all(np.isfinite(spot)):
            raise ConfigError("spot prices must be finite and defined on every scenario")
        object.__setattr__(self, "spot", spot)
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"objective must be one of {OBJECTIVES} (got {self.objective!r})")
        ids = [b.id for b in self.bids]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"bid ids must be unique (got {ids})")
        if not self.buyers or not self.sellers:
            raise ConfigError("clearing needs at least one buyer and one seller")
        if self.exercise_split is not None:
            split = dict(self.exercise_split)
            sellers = {b.id for b in self.sellers}
            if set(split) != sellers:
                raise ConfigError(f"exercise_split must name every seller exactly {sorted(sellers)}")
            if any(v < 0 for v in split.values()) or abs(math.fsum(split.values()) - 1.0) > FEASIBILITY_TOL:
                raise ConfigError("exercise_split fractions must be >= 0 and sum to 1")
            object.__setattr__(self, "exercise_split", split)

    @property
    def buyers(self) -> List[ParticipantBid]:
        return [b for b in self.bids if b.side is Side.BUYER]

    @property
    def sellers(self) -> List[ParticipantBid]:
        return [b for b in self.bids if b.side is Side.SELLER]


@dataclass(frozen=True)
class ClearingSolution:
    """
    Cleared trades of the participants that trade, per-scenario exercise of
    every seller and M's merchandising surplus per scenario.
    """
    trades: Dict[str, TradeTriple]
    sides: Dict[str, Side]
    exercise: Dict[str, np.ndarray]
    ms: np.ndarray
    scenarios: ScenarioSet
    spot: np.ndarray
    objective: str = MAX_MS
    exercise_by_level: Dict[float, Dict[str, float]] = field(default_factory=dict)
    exercise_split: Optional[Dict[str, float]] = None

    @property
    def is_empty(self) -> bool:
        return not self.trades

    @property
    def buyers(self) -> List[str]:
        return [i for i in self.trades if self.sides[i] is Side.BUYER]

    @property
    def sellers(self) -> List[str]:
        return [i for i in self.trades if self.sides[i] is Side.SELLER]

    @property
    def volume(self) -> float:
        return math.fsum(self.trades[r].delta for r in self.buyers)

    @property
    def expected_ms(self) -> float:
        return expect(self.scenarios, self.ms)

    def exercise_for_spot(self, spot: float) -> Dict[str, float]:
        """Exercise allocation planned for a spot level, or the greedy fill for unseen levels."""
        for level, allocation in self.exercise_by_level.items():
            if abs(level - spot) <= 1e-12 * max(1.0, abs(spot)):
                return dict(allocation)
        return allocate_exercise(self.trades, self.sides, spot, self.exercise_split)


def exercised_volume(trades: Dict[str, TradeTriple], sides: Dict[str, Side], spot: float) -> float:
    """Buyer volume whose strike the spot price reaches."""
    return math.fsum(t.delta for i, t in trades.items() if sides[i] is Side.BUYER and spot >= t.K)


def allocate_exercise(trades: Dict[str, TradeTriple], sides: Dict[str, Side], spot: float,
                      split: Optional[Dict[str, float]] = None) -> Dict[str, float]:
    """
    Split the exercised volume among sellers.

    With a split, seller g takes its fraction of the volume. Otherwise sellers
    are filled up to their volumes in descending (p - K_g)^+ order, ties by id,
    which maximises M's surplus in the scenario.
    """
    demand = exercised_volume(trades, sides, spot)
    sellers = sorted((i for i in trades if sides[i] is Side.SELLER),
                     key=lambda g: (-max(spot - trades[g].K, 0.0), g))
    if split is not None:
        return {g: split[g] * demand for g in sellers}
    allocation = {}
    remaining = demand
    for g in sellers:
        take = min(trades[g].delta, max(remaining, 0.0))
        allocation[g] = take
        remaining -= take
    return allocation


def ms_for_spot(trades: Dict[str, TradeTriple], sides: Dict[str, Side], spot: float,
                allocation: Dict[str, float]) -> float:
    """Merchandising surplus: premiums kept plus seller payoffs minus buyer payoffs."""
    terms = []
    for i, t in trades.items():
        payoff = max(spot - t.K, 0.0)
        if sides[i] is Side.BUYER:
            terms.append(t.q * t.delta - payoff * t.delta)
        else:
            terms.append(-t.q * t.delta + payoff * allocation.get(i, 0.0))
    return math.fsum(terms)


@dataclass
class _Outcome:
    strikes: Tuple[float, ...]
    prices: Tuple[float, ...]
    deltas: np.ndarray
    exercise: np.ndarray   # sellers x levels
    expected_ms: float
    volume: float
    distance: float


def _strike_candidates(box: AllowableBox, levels: np.ndarray) -> List[float]:
    breaks = sorted({box.epsilon, box.K_max} | {box.clip_K(float(l)) for l in levels})
    center = box.center[1]
    extra = []
    for a, b in zip(breaks, breaks[1:]):
        m = min(max(center, a), b)
        if a < m < b:
            extra.append(m)
    return sorted(set(breaks) | set(extra))


def _distance(box: AllowableBox, q: float, K: float) -> float:
    qc, Kc = box.center
    return abs(K - Kc) / box.K_max + abs(q - qc) / box.q_max


def _better(a: _Outcome, b: Optional[_Outcome]) -> bool:
    if b is None:
        return True
    if a.expected_ms > b.expected_ms + OPTIMALITY_TOL:
        return True
    if a.expected_ms < b.expected_ms - OPTIMALITY_TOL:
        return False
    if a.volume > b.volume + FEASIBILITY_TOL:
        return True
    if a.volume < b.volume - FEASIBILITY_TOL:
        return False
    return a.distance < b.distance - 1e-12


def _solve_profile(problem: ClearingProblem, levels: np.ndarray, mass: np.ndarray,
                   strikes: Sequence[float]) -> Optional[_Outcome]:
    bids = problem.bids
    n = len(bids)
    seller_index = [i for i, b in enumerate(bids) if b.side is Side.SELLER]
    buyer_index = [i for i, b in enumerate(bids) if b.side is Side.BUYER]
    s, L = len(seller_index), levels.size

    prices = []
    caps = []
    for bid, K in zip(bids, strikes):
        interval = bid.acceptability.q_interval(K)
        if interval is None:
            prices.append(0.0)
            caps.append(0.0)
            continue
        lo, hi = interval
        prices.append(hi if bid.side is Side.BUYER else lo)
        caps.append(bid.acceptability.box.delta_max)
    if not any(caps[i] > 0 for i in buyer_index) or not any(caps[g] > 0 for g in seller_index):
        return None

    payoff = np.maximum(levels[None, :] - np.asarray(strikes)[:, None], 0.0)   # n x L
    in_money = (levels[None, :] >= np.asarray(strikes)[:, None]).astype(float)

    nvar = n + s * L

    def d_col(j, l):
        return n + j * L + l

    # MS per level as rows over the decision vector
    ms_rows = np.zeros((L, nvar))
    for i in buyer_index:
        ms_rows[:, i] = prices[i] - payoff[i]
    for j, g in enumerate(seller_index):
        ms_rows[:, g] = -prices[g]
        for l in range(L):
            ms_rows[l, d_col(j, l)] = payoff[g, l]
    expected_row = mass @ ms_rows

    A_eq, b_eq, A_ub, b_ub = [], [], [], []
    row = np.zeros(nvar)
    row[buyer_index] = 1.0
    row[seller_index] = -1.0
    A_eq.append(row)
    b_eq.append(0.0)
    for l in range(L):
        row = np.zeros(nvar)
        for j in range(s):
            row[d_col(j, l)] = 1.0
        for i in buyer_index:
            row[i] = -in_money[i, l]
        A_eq.append(row)
        b_eq.append(0.0)
    for j, g in enumerate(seller_index):
        for l in range(L):
            row = np.zeros(nvar)
            row[d_col(j, l)] = 1.0
            row[g] = -1.0
            A_ub.append(row)
            b_ub.append(0.0)
    if problem.exercise_split is not None:
        for j, g in enumerate(seller_index):
            alpha = problem.exercise_split[bids[g].id]
            row = np.zeros(nvar)
            row[g] = 1.0
            row[buyer_index] -= alpha
            A_eq.append(row)
            b_eq.append(0.0)
            for l in range(L):
                row = np.zeros(nvar)
                row[d_col(j, l)] = 1.0
                for i in buyer_index:
                    row[i] -= alpha * in_money[i, l]
                A_eq.append(row)
                b_eq.append(0.0)
    if problem.objective == ZERO_MS:
        for l in range(L):
            A_eq.append(ms_rows[l].copy())
            b_eq.append(0.0)

    bounds = [(0.0, caps[i]) for i in range(n)] + [(0.0, None)] * (s * L)
    volume_obj = np.zeros(nvar)
    volume_obj[buyer_index] = -1.0

    if problem.objective == MAX_MS:
        first = linprog(-expected_row, A_ub=np.array(A_ub), b_ub=np.array(b_ub),
                        A_eq=np.array(A_eq), b_eq=np.array(b_eq), bounds=bounds, method="highs")
        if not first.success:
            logger.debug("Surplus LP failed for strikes %s: %s", strikes, first.message)
            return None
        best_ms = -first.fun
        A_ub.append(-expected_row)
        b_ub.append(-(best_ms - FEASIBILITY_TOL * max(1.0, abs(best_ms))))

    result = linprog(volume_obj, A_ub=np.array(A_ub), b_ub=np.array(b_ub),
                     A_eq=np.array(A_eq), b_eq=np.array(b_eq), bounds=bounds, method="highs")
    if not result.success:
        logger.debug("Volume LP failed for strikes %s: %s", strikes, result.message)
        return None

    x = np.where(result.x < NO_TRADE_VOLUME, 0.0, result.x)
    deltas = x[:n]
    exercise = x[n:].reshape(s, L) if s else np.zeros((0, L))
    volume = math.fsum(deltas[buyer_index])
    distance = math.fsum(
        _distance(bids[i].acceptability.box, prices[i], strikes[i]) for i in range(n) if deltas[i] > 0
    )
    return _Outcome(
        strikes=tuple(strikes), prices=tuple(prices), deltas=deltas, exercise=exercise,
        expected_ms=float(expected_row @ x), volume=volume, distance=distance,
    )


def _coordinate_descent(problem, levels, mass, candidates) -> Optional[_Outcome]:
    profile = []
    for bid, options in zip(problem.bids, candidates):
        Kc = bid.acceptability.box.center[1]
        profile.append(min(options, key=lambda K: (abs(K - Kc), K)))
    best = _solve_profile(problem, levels, mass, profile)
    for sweep in range(COORDINATE_DESCENT_SWEEPS):
        improved = False
        for i, options in enumerate(candidates):
            for K in options:
                trial = list(profile)
                trial[i] = K
                outcome = _solve_profile(problem, levels, mass, trial)
                if outcome is not None and _better(outcome, best):
                    best, profile, improved = outcome, trial, True
        logger.debug("Coordinate descent sweep %d: E[MS]=%s", sweep + 1,
                     None if best is None else best.expected_ms)
        if not improved:
            break
    return best


def empty_solution(problem: ClearingProblem) -> ClearingSolution:
    return ClearingSolution(
        trades={}, sides={b.id: b.side for b in problem.bids}, exercise={},
        ms=np.zeros(len(problem.scenarios)), scenarios=problem.scenarios, spot=problem.spot,
        objective=problem.objective, exercise_split=problem.exercise_split,
    )


def build_solution(trades: Dict[str, TradeTriple], sides: Dict[str, Side], scenarios: ScenarioSet,
                   spot: np.ndarray, objective: str = MAX_MS,
                   exercise_by_level: Optional[Dict[float, Dict[str, float]]] = None,
                   exercise_split: Optional[Dict[str, float]] = None) -> ClearingSolution:
    """
    Assemble a solution from trades, evaluating exercise and surplus per scenario.

    Levels without a planned allocation use allocate_exercise().
    """
    spot = np.asarray(spot, dtype=float)
    plan = dict(exercise_by_level or {})
    levels, inverse = np.unique(spot, return_inverse=True)
    for level in levels.tolist():
        if level not in plan:
            plan[level] = allocate_exercise(trades, sides, level, exercise_split)
    level_ms = np.array([ms_for_spot(trades, sides, level, plan[level]) for level in levels.tolist()])
    if objective == ZERO_MS:
        scale = max(1.0, max((t.q * t.delta for t in trades.values()), default=0.0))
        level_ms[np.abs(level_ms) <= FEASIBILITY_TOL * scale] = 0.0
    sellers = [i for i in trades if sides[i] is Side.SELLER]
    exercise = {g: np.array([plan[level][g] for level in levels.tolist()])[inverse] for g in sellers}
    return ClearingSolution(
        trades=dict(trades), sides=dict(sides), exercise=exercise, ms=level_ms[inverse],
        scenarios=scenarios, spot=spot, objective=objective,
        exercise_by_level=plan, exercise_split=exercise_split,
    )


def check_solution(solution: ClearingSolution, bids: Sequence[ParticipantBid]) -> None:
    """Raise NumericalError when a cleared solution breaks a clearing constraint."""
    by_id = {b.id: b for b in bids}
    if abs(solution.volume - math.fsum(solution.trades[g].delta for g in solution.sellers)) > FEASIBILITY_TOL:
        raise NumericalError("option volume bought and sold differ")
    for level, allocation in solution.exercise_by_level.items():
        demand = exercised_volume(solution.trades, solution.sides, level)
        if abs(math.fsum(allocation.values()) - demand) > FEASIBILITY_TOL:
            raise NumericalError(f"exercise allocation does not cover the exercised volume at spot {level}")
        for g, d in allocation.items():
            if d < -FEASIBILITY_TOL or d > solution.trades[g].delta + FEASIBILITY_TOL:
                raise NumericalError(f"exercise of {g} at spot {level} outside [0, delta]")
    for i, trade in solution.trades.items():
        if i in by_id and not by_id[i].acceptability.accepts(trade):
            raise NumericalError(f"cleared trade of {i} is outside its acceptable set", participant=i)


def clear(problem: ClearingProblem) -> ClearingSolution:
    """
    Clear the option market.

    Args:
        problem: Bids, scenarios, spot prices and objective

    Returns:
        ClearingSolution; empty when no positive volume can be traded
    """
    levels, mass = spot_levels(problem.spot, problem.scenarios)
    candidates = [_strike_candidates(b.acceptability.box, levels) for b in problem.bids]
    profiles = math.prod(len(c) for c in candidates)

    best = None
    if len(problem.bids) <= MAX_EXACT_PARTICIPANTS and profiles <= MAX_CANDIDATE_PROFILES:
        logger.info("Clearing %d bids over %d strike profiles (%s)", len(problem.bids), profiles, problem.objective)
        for strikes in itertools.product(*candidates):
            outcome = _solve_profile(problem, levels, mass, strikes)
            if outcome is not None and _better(outcome, best):
                best = outcome
    else:
        logger.warning("Clearing %d bids by coordinate descent; the result is not certified optimal",
                       len(problem.bids))
        best = _coordinate_descent(problem, levels, mass, candidates)

    if best is None or best.volume < NO_TRADE_VOLUME:
        logger.info("No acceptable trade with positive volume; empty clearing")
        return empty_solution(problem)

    sides = {b.id: b.side for b in problem.bids}
    trades = {}
    for i, bid in enumerate(problem.bids):
        if best.deltas[i] > 0:
            trades[bid.id] = TradeTriple(best.prices[i], best.strikes[i], float(best.deltas[i]))

    plan = None
    if problem.objective == ZERO_MS:
        sellers = [b.id for b in problem.sellers]
        plan = {}
        for l, level in enumerate(levels.tolist()):
            plan[level] = {
                g: min(max(float(best.exercise[j, l]), 0.0), trades[g].delta)
                for j, g in enumerate(sellers) if g in trades
            }
    solution = build_solution(trades, sides, problem.scenarios, problem.spot, problem.objective,
                              plan, problem.exercise_split)
    check_solution(solution, problem.bids)
    logger.info("Cleared volume %.9g MW with E[MS]=%.9g", solution.volume, solution.expected_ms)
    return solution
