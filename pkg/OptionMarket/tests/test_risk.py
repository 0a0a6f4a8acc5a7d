import math

import numpy as np
import pytest

from core.clearing.acceptability import AllowableBox, risk_neutral_acceptability
from core.dispatch.example import WIND_ID, PEAKER_ID, example_payments, example_spot_prices
from core.options.trade import TradeTriple
from core.risk.cvar import (
    BUYER, SELLER, RiskLevel, WeightedLossSample, cvar, cvar_accepts, cvar_q_frontier, cvar_with_var,
)
from core.risk.frontier import STATUS_OK, STATUS_UNBOUNDED, _is_monotone, boundary_trace
from core.scenario.scenario import SQRT3, UniformScenarioModel, discretize
from core.utils.errors import ConfigError


def _minimisation_cvar(losses, weights, alpha):
    # Brute force over t at every atom: min_t t + E[(z - t)^+]/(1 - alpha)
    return min(t + np.sum(weights * np.maximum(losses - t, 0.0)) / (1 - alpha) for t in losses)


@pytest.fixture(scope="module")
def market():
    """Example market with sigma = 0.4 on a 2000-point midpoint grid."""
    model = UniformScenarioModel(mu=1.0, sigma=0.4)
    scenarios = discretize(model, 2000)
    payments = example_payments(scenarios.omegas, 2.0, 1.0, 0.5)
    spot = example_spot_prices(scenarios.omegas, 1.0, 0.5)
    return model, scenarios, payments, spot


def test_cvar_at_zero_is_the_mean():
    sample = WeightedLossSample(np.array([1.0, 2.0, 6.0]), np.array([0.5, 0.25, 0.25]))
    assert cvar(sample, 0.0) == pytest.approx(0.5 + 0.5 + 1.5)


def test_cvar_splits_the_straddling_atom():
    sample = WeightedLossSample(np.array([1.0, 2.0, 3.0, 4.0]), np.full(4, 0.25))
    value, var = cvar_with_var(sample, 0.6)
    assert var == 3.0
    assert value == pytest.approx((0.25 * 4.0 + 0.15 * 3.0) / 0.4)


@pytest.mark.parametrize("alpha", [0.0, 0.1, 0.37, 0.5, 0.9, 0.99])
def test_cvar_matches_minimisation_form(alpha):
    rng = np.random.default_rng(3)
    losses = rng.normal(size=250)
    weights = rng.uniform(0.1, 1.0, size=250)
    weights = weights / weights.sum()
    weights = weights / math.fsum(weights)
    sample = WeightedLossSample(losses, weights)
    assert cvar(sample, alpha) == pytest.approx(_minimisation_cvar(losses, weights, alpha), abs=1e-10)


@pytest.mark.parametrize("alpha", [-0.1, 1.0, 1.5])
def test_risk_level_range(alpha):
    with pytest.raises(ConfigError):
        RiskLevel(alpha)


def test_zero_volume_is_always_acceptable(market):
    _, scenarios, payments, spot = market
    trade = TradeTriple(5.0, 0.0, 0.0)
    assert cvar_accepts(trade, BUYER, 0.5, payments[WIND_ID], spot, scenarios)


def test_acceptance_is_monotone_in_volume(market):
    _, scenarios, payments, spot = market
    cap = 2 * SQRT3 * 0.4 / 5
    for alpha in (0.0, 0.5):
        q = cvar_q_frontier(BUYER, alpha, payments[WIND_ID], spot, scenarios, 1.0, cap) - 1e-6
        for delta in np.linspace(0.01, cap, 5):
            assert cvar_accepts(TradeTriple(q, 1.0, delta), BUYER, alpha, payments[WIND_ID], spot, scenarios)


def test_seller_frontier_at_zero_is_expected_payoff(market):
    _, scenarios, payments, spot = market
    q_star = cvar_q_frontier(SELLER, 0.0, payments[PEAKER_ID], spot, scenarios, 1.0, 0.2)
    assert q_star == pytest.approx(0.5 * (2.0 - 1.0), abs=1e-12)


def test_risk_neutral_buyer_frontier(market):
    _, scenarios, payments, spot = market
    delta = 2 * SQRT3 * 0.4 / 5
    points = boundary_trace(BUYER, 0.0, delta, [0.5, 1.0, 1.5], None, payments[WIND_ID], spot, scenarios)
    for point in points:
        assert point.status == STATUS_OK
        assert point.q_boundary == pytest.approx(0.5 * (2.0 - point.K), abs=1e-5)


def test_tail_averse_buyer_pays_the_full_payoff(market):
    # At alpha >= 1/2 the CVaR tail lies where the option pays 1/rho - K
    _, scenarios, payments, spot = market
    delta = 2 * SQRT3 * 0.4 / 5
    points = boundary_trace(BUYER, 0.75, delta, [0.5, 1.0, 1.5], None, payments[WIND_ID], spot, scenarios)
    for point in points:
        assert point.alpha == 0.75
        assert point.q_boundary == pytest.approx(2.0 - point.K, abs=1e-5)


def test_frontier_without_a_flip_is_unbounded(market):
    _, scenarios, payments, spot = market
    points = boundary_trace(BUYER, 0.0, 0.2, [0.5], (0.01, 0.1), payments[WIND_ID], spot, scenarios)
    assert points[0].status == STATUS_UNBOUNDED
    assert math.isnan(points[0].q_boundary)


def test_frontier_rejects_bad_inputs(market):
    _, scenarios, payments, spot = market
    with pytest.raises(ConfigError):
        boundary_trace("holder", 0.0, 0.2, [1.0], None, payments[WIND_ID], spot, scenarios)
    with pytest.raises(ConfigError):
        boundary_trace(BUYER, 0.0, 0.2, [1.0], (1.0, 0.5), payments[WIND_ID], spot, scenarios)


def test_monotonicity_check():
    assert _is_monotone(BUYER, [True, True, False, False])
    assert not _is_monotone(BUYER, [True, False, True])
    assert _is_monotone(SELLER, [False, False, True])
    assert not _is_monotone(SELLER, [True, False, True])


def _random_sample(rng, size):
    weights = rng.uniform(0.1, 1.0, size=size)
    weights = weights / weights.sum()
    weights = weights / math.fsum(weights)
    return rng.normal(scale=rng.uniform(0.1, 3.0), size=size), weights


def test_cvar_axioms_on_random_samples():
    rng = np.random.default_rng(99)
    tol = 1e-10
    for _ in range(1000):
        size = int(rng.integers(1, 41))
        z, weights = _random_sample(rng, size)
        y = rng.normal(size=size)
        alpha = float(rng.uniform(0.0, 0.95))
        higher = alpha + float(rng.uniform(0.0, 0.99 - alpha))
        shift, scale = float(rng.uniform(-10.0, 10.0)), float(rng.uniform(0.1, 10.0))

        base = cvar(WeightedLossSample(z, weights), alpha)
        mean = math.fsum(weights * z)
        assert cvar(WeightedLossSample(z + shift, weights), alpha) == pytest.approx(base + shift, abs=tol * 10)
        assert cvar(WeightedLossSample(scale * z, weights), alpha) == pytest.approx(scale * base, abs=tol * 10)
        assert base <= cvar(WeightedLossSample(z + np.abs(y), weights), alpha) + tol
        assert cvar(WeightedLossSample(z + y, weights), alpha) <= base + cvar(WeightedLossSample(y, weights), alpha) + tol
        assert base <= cvar(WeightedLossSample(z, weights), higher) + tol
        assert base >= mean - tol
        assert cvar(WeightedLossSample(z, weights), 0.0) == pytest.approx(mean, abs=tol)


@pytest.mark.parametrize("side", [BUYER, SELLER])
def test_risk_neutral_cvar_matches_the_half_space(market, side):
    _, scenarios, payments, spot = market
    pi = payments[WIND_ID] if side == BUYER else payments[PEAKER_ID]
    box = AllowableBox(q_max=2.0, K_max=2.0, delta_max=SQRT3 * 0.4)
    half_space = risk_neutral_acceptability(side, pi, spot, scenarios, box)
    rng = np.random.default_rng(200)
    for q, K, delta in rng.uniform([0.01, 0.01, 0.01], [2.0, 2.0, SQRT3 * 0.4], size=(200, 3)):
        trade = TradeTriple(float(q), float(K), float(delta))
        assert half_space.accepts(trade) == cvar_accepts(trade, side, 0.0, pi, spot, scenarios)


def test_buyer_frontier_rises_with_the_risk_level(market):
    _, scenarios, payments, spot = market
    delta = 2 * SQRT3 * 0.4 / 5
    k_grid = [0.05, 0.5, 1.0, 1.5]
    traces = []
    for alpha in (0.0, 0.25, 0.5, 0.75):
        points = boundary_trace(BUYER, alpha, delta, k_grid, None, payments[WIND_ID], spot, scenarios)
        assert all(point.status == STATUS_OK for point in points)
        traces.append([point.q_boundary for point in points])
    assert np.all(np.diff(np.array(traces), axis=0) >= -1e-6)
    # At K = 0.05 the boundary moves from the expected payoff to the full payoff
    assert traces[0][0] == pytest.approx(0.975, abs=1e-3)
    assert traces[-1][0] == pytest.approx(1.95, abs=1e-3)


@pytest.mark.slow
def test_acceptable_sets_are_nested_in_alpha():
    model = UniformScenarioModel(mu=1.0, sigma=0.2)
    scenarios = discretize(model, 1000)
    pi = example_payments(scenarios.omegas, 2.0, 1.0, 0.5)[WIND_ID]
    spot = example_spot_prices(scenarios.omegas, 1.0, 0.5)
    delta = 2 * SQRT3 * 0.2 / 5
    q_grid = np.linspace(0.013, 1.987, 30)
    k_grid = np.linspace(0.021, 1.979, 30)
    accepted = {
        alpha: np.array([[cvar_accepts(TradeTriple(float(q), float(K), delta), BUYER, alpha, pi, spot, scenarios)
                          for K in k_grid] for q in q_grid])
        for alpha in (0.0, 0.25, 0.5, 0.75)
    }
    levels = sorted(accepted)
    for lower, higher in zip(levels, levels[1:]):
        assert np.all(~accepted[lower] | accepted[higher])
    assert accepted[0.0].any()
    assert np.sum(accepted[0.75]) > np.sum(accepted[0.0])
