import numpy as np
import pytest

from core.dispatch.cost import (
    CONSUMER_ID, CostBlock, CostCurve, DispatchableGen, MarketInstance, RenewableGen, UNBOUNDED,
    cost_curve_from_blocks,
)
from core.dispatch.dispatch import (
    certainty_surrogate, day_ahead, payment_matrix, payments, real_time, spot_prices, system_cost,
)
from core.dispatch.example import (
    BASELOAD_ID, PEAKER_ID, WIND_ID, Interval, example_instance, example_payments, loss_region,
    spot_price_example,
)
from core.scenario.scenario import UniformScenarioModel, discretize, expect
from core.utils.errors import ConfigError, InfeasibleError


MU, SIGMA, RHO, DEMAND = 1.0, 0.2, 0.5, 2.0


@pytest.fixture
def instance():
    return example_instance(DEMAND, MU, SIGMA, RHO)


def test_day_ahead_example(instance):
    forward = day_ahead(instance)
    assert forward.quantities[WIND_ID] == pytest.approx(MU)
    assert forward.quantities[BASELOAD_ID] == pytest.approx(DEMAND - MU)
    assert forward.quantities[PEAKER_ID] == pytest.approx(0.0)
    assert forward.price == pytest.approx(1.0)
    assert not forward.price_at_capacity
    assert forward.total == pytest.approx(DEMAND)


@pytest.mark.parametrize("omega, price, peaker, wind", [
    (0.8, 2.0, 0.2, 0.8),
    (1.0, 2.0, 0.0, 1.0),
    (1.2, 0.0, 0.0, 1.0),
])
def test_real_time_example(instance, omega, price, peaker, wind):
    forward = day_ahead(instance)
    rt = real_time(instance, forward, omega)
    assert rt.price == pytest.approx(price)
    assert rt.quantities[PEAKER_ID] == pytest.approx(peaker)
    assert rt.quantities[WIND_ID] == pytest.approx(wind)
    assert rt.quantities[BASELOAD_ID] == pytest.approx(DEMAND - MU)
    assert rt.price == pytest.approx(spot_price_example(omega, MU, RHO))


def test_settlement_payments(instance):
    forward = day_ahead(instance)
    records = {r.id: r for r in payments(instance, forward, real_time(instance, forward, 0.8))}
    assert records[WIND_ID].total == pytest.approx(MU - (MU - 0.8) / RHO)
    assert records[PEAKER_ID].total == pytest.approx(0.2 / RHO)
    assert records[BASELOAD_ID].total == pytest.approx(DEMAND - MU)
    assert records[CONSUMER_ID].total == pytest.approx(-DEMAND)
    # Day-ahead the consumer pays exactly what the producers receive
    producers = sum(r.forward_pay for pid, r in records.items() if pid != CONSUMER_ID)
    assert producers == pytest.approx(-records[CONSUMER_ID].forward_pay)


def test_payment_matrix_matches_closed_form(instance):
    scenarios = discretize(instance.model, 200)
    energy, spot = payment_matrix(instance, day_ahead(instance), scenarios)
    closed = example_payments(scenarios.omegas, DEMAND, MU, RHO)
    for pid in (BASELOAD_ID, PEAKER_ID, WIND_ID):
        np.testing.assert_allclose(energy[pid], closed[pid], rtol=0, atol=1e-12)
    np.testing.assert_allclose(spot, np.where(scenarios.omegas <= MU, 1.0 / RHO, 0.0))


@pytest.mark.slow
def test_wind_payment_variance(instance):
    scenarios = discretize(instance.model, 20000)
    energy, _ = payment_matrix(instance, day_ahead(instance), scenarios)
    pi = energy[WIND_ID]
    mean = expect(scenarios, pi)
    variance = expect(scenarios, (pi - mean) ** 2)
    assert variance == pytest.approx(5 * SIGMA ** 2 / (16 * RHO ** 2), abs=1e-4)


def test_spot_prices_are_aligned(instance):
    scenarios = discretize(instance.model, 6)
    prices = spot_prices(instance, day_ahead(instance), scenarios)
    np.testing.assert_allclose(prices, [2.0, 2.0, 2.0, 0.0, 0.0, 0.0])


def test_loss_region():
    assert loss_region(MU, SIGMA, RHO) is None
    region = loss_region(1.0, 0.5, 0.5)
    assert region.lower == pytest.approx(1.0 - np.sqrt(3) * 0.5)
    assert region.upper == pytest.approx(0.5)
    assert region.contains(0.3) and not region.contains(0.5)
    wind = example_payments(np.array([0.3, 0.6]), 2.0, 1.0, 0.5)[WIND_ID]
    assert wind[0] < 0 < wind[1]


def test_interval_subset():
    assert Interval(0.2, 0.4).is_subset_of(Interval(0.1, 0.5))
    assert not Interval(0.0, 0.4).is_subset_of(Interval(0.1, 0.5))


def test_example_builder_validation():
    with pytest.raises(ConfigError):
        example_instance(0.5, MU, SIGMA, RHO)
    with pytest.raises(ConfigError):
        example_instance(DEMAND, MU, SIGMA, 1.5)
    with pytest.raises(ConfigError):
        example_instance(DEMAND, MU, SIGMA, RHO, extra_peakers=[("P2", 1.5)])


def test_extra_peaker_is_never_dispatched():
    instance = example_instance(DEMAND, MU, SIGMA, RHO, extra_peakers=[("P2", 3.0)])
    forward = day_ahead(instance)
    for omega in (0.7, 1.0, 1.3):
        assert real_time(instance, forward, omega).quantities["P2"] == 0.0


def _block_instance(demand):
    model = UniformScenarioModel(mu=1.0, sigma=0.2)
    g1 = DispatchableGen("G1", cap=UNBOUNDED, ramp=UNBOUNDED, cost=cost_curve_from_blocks([(1.0, 10.0), (None, 30.0)]))
    g2 = DispatchableGen("G2", cap=UNBOUNDED, ramp=UNBOUNDED, cost=cost_curve_from_blocks([(0.5, 20.0), (None, 25.0)]))
    return MarketInstance(demand=demand, dispatchables=[g1, g2], renewables=[], model=model)


def test_merit_order_matches_grid_search():
    instance = _block_instance(1.8)
    forward = day_ahead(instance)
    assert forward.quantities == pytest.approx({"G1": 1.0, "G2": 0.8})
    g1, g2 = instance.dispatchables
    grid = np.linspace(0.0, 1.8, 1801)
    brute = min(g1.cost.cost(x) + g2.cost.cost(1.8 - x) for x in grid)
    assert forward.cost == pytest.approx(brute, abs=1e-9)
    assert system_cost(instance, forward.quantities) == pytest.approx(27.5)


def test_price_is_the_right_derivative_of_cost():
    h = 1e-6
    base = day_ahead(_block_instance(1.8))
    bumped = day_ahead(_block_instance(1.8 + h))
    assert base.price == pytest.approx(25.0)
    assert (bumped.cost - base.cost) / h == pytest.approx(base.price, rel=1e-6)
    # At a block boundary the price is the next block's cost
    assert day_ahead(_block_instance(1.0)).price == pytest.approx(20.0)


def test_equal_cost_ties_break_by_participant_id():
    model = UniformScenarioModel(mu=1.0, sigma=0.2)
    units = [DispatchableGen(pid, cap=1.0, ramp=UNBOUNDED, cost=CostCurve.linear(1.0)) for pid in ("C", "A")]
    forward = day_ahead(MarketInstance(demand=1.5, dispatchables=units, renewables=[], model=model))
    assert forward.quantities == pytest.approx({"A": 1.0, "C": 0.5})


def test_price_at_capacity_is_flagged():
    model = UniformScenarioModel(mu=1.0, sigma=0.2)
    b = DispatchableGen("B", cap=1.0, ramp=UNBOUNDED, cost=CostCurve.linear(1.0))
    w = RenewableGen("W", cap=1.4, cost=CostCurve.linear(0.0))
    forward = day_ahead(MarketInstance(demand=2.0, dispatchables=[b], renewables=[w], model=model))
    assert forward.price_at_capacity
    assert forward.price == pytest.approx(1.0)


def test_infeasible_demand_raises():
    model = UniformScenarioModel(mu=1.0, sigma=0.2)
    b = DispatchableGen("B", cap=1.0, ramp=UNBOUNDED, cost=CostCurve.linear(1.0))
    w = RenewableGen("W", cap=1.4, cost=CostCurve.linear(0.0))
    with pytest.raises(InfeasibleError) as info:
        day_ahead(MarketInstance(demand=5.0, dispatchables=[b], renewables=[w], model=model))
    assert info.value.exit_code == 4
    assert info.value.upper == pytest.approx(2.0)


def test_ramp_limits_make_real_time_infeasible():
    model = UniformScenarioModel(mu=1.0, sigma=0.2)
    b = DispatchableGen("B", cap=UNBOUNDED, ramp=0.0, cost=CostCurve.linear(1.0))
    p = DispatchableGen("P", cap=UNBOUNDED, ramp=0.1, cost=CostCurve.linear(2.0))
    w = RenewableGen("W", cap=1.4, cost=CostCurve.linear(0.0))
    instance = MarketInstance(demand=2.0, dispatchables=[b, p], renewables=[w], model=model)
    forward = day_ahead(instance)
    assert real_time(instance, forward, 0.95).quantities["P"] == pytest.approx(0.05)
    with pytest.raises(InfeasibleError):
        real_time(instance, forward, 0.7)


def test_certainty_surrogate_averages_availability():
    model = UniformScenarioModel(mu=1.0, sigma=0.2)
    assert certainty_surrogate(model) == 1.0
    half = RenewableGen("W2", cap=1.0, cost=CostCurve.linear(0.0), availability=lambda w: 0.5 * w)
    assert certainty_surrogate(model, half) == pytest.approx(0.5, abs=1e-9)


@pytest.mark.parametrize("blocks", [
    [],
    [CostBlock(0.0, 1.0)],
    [CostBlock(UNBOUNDED, 1.0), CostBlock(1.0, 2.0)],
    [CostBlock(1.0, 2.0), CostBlock(1.0, 1.0)],
])
def test_cost_curve_validation(blocks):
    with pytest.raises(ConfigError):
        CostCurve(blocks=tuple(blocks))


def test_market_instance_validation():
    model = UniformScenarioModel(mu=1.0, sigma=0.2)
    b = DispatchableGen("B", cap=UNBOUNDED, ramp=0.0, cost=CostCurve.linear(1.0))
    with pytest.raises(ConfigError):
        MarketInstance(demand=1.0, dispatchables=[b, b], renewables=[], model=model)
    with pytest.raises(ConfigError):
        MarketInstance(demand=1.0, dispatchables=[DispatchableGen("M", 1.0, 1.0, CostCurve.linear(1.0))],
                       renewables=[], model=model)
    small = RenewableGen("W", cap=1.0, cost=CostCurve.linear(0.0))
    with pytest.raises(ConfigError):
        MarketInstance(demand=1.0, dispatchables=[b], renewables=[small], model=model)


def _random_units(rng):
    """One to three unbounded units with at most four cost blocks in total."""
    n_units = int(rng.integers(1, 4))
    counts = [1] * n_units
    for _ in range(int(rng.integers(0, 5 - n_units))):
        counts[int(rng.integers(n_units))] += 1
    units, blocks_by_unit = [], []
    for k, count in enumerate(counts):
        costs = np.sort(rng.choice(np.arange(1, 60), size=count, replace=False)).astype(float)
        sizes = rng.integers(100, 800, size=count - 1) / 1000.0
        blocks = [(float(s), float(c)) for s, c in zip(sizes, costs[:-1])] + [(None, float(costs[-1]))]
        units.append(DispatchableGen(f"G{k}", cap=UNBOUNDED, ramp=UNBOUNDED, cost=cost_curve_from_blocks(blocks)))
        blocks_by_unit.append(blocks)
    return units, blocks_by_unit


def _block_cost(blocks, milli):
    x = np.asarray(milli, dtype=float) / 1000.0
    total = np.zeros_like(x)
    start = 0.0
    for size, cost in blocks:
        width = np.inf if size is None else size
        total += cost * np.clip(x - start, 0.0, width)
        start += width
    return total


def _grid_search_cost(blocks_by_unit, milli):
    # Every split of the demand on a 1e-3 MW grid
    k = np.arange(milli + 1)
    if len(blocks_by_unit) == 1:
        return float(_block_cost(blocks_by_unit[0], [milli])[0])
    if len(blocks_by_unit) == 2:
        return float(np.min(_block_cost(blocks_by_unit[0], k) + _block_cost(blocks_by_unit[1], milli - k)))
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    k3 = milli - k1 - k2
    total = (_block_cost(blocks_by_unit[0], k1) + _block_cost(blocks_by_unit[1], k2)
             + _block_cost(blocks_by_unit[2], np.maximum(k3, 0)))
    return float(np.min(total[k3 >= 0]))


@pytest.mark.slow
def test_random_instances_match_grid_search_and_finite_differences():
    rng = np.random.default_rng(2718)
    model = UniformScenarioModel(mu=1.0, sigma=0.2)
    h = 1e-6
    for _ in range(50):
        units, blocks_by_unit = _random_units(rng)
        milli = int(rng.integers(200, 1501))

        on_grid = day_ahead(MarketInstance(demand=milli / 1000.0, dispatchables=units, renewables=[], model=model))
        assert on_grid.cost == pytest.approx(_grid_search_cost(blocks_by_unit, milli), abs=1e-3)

        # Half a grid step away from every block boundary
        demand = (milli + 0.5) / 1000.0
        base = day_ahead(MarketInstance(demand=demand, dispatchables=units, renewables=[], model=model))
        bumped = day_ahead(MarketInstance(demand=demand + h, dispatchables=units, renewables=[], model=model))
        assert (bumped.cost - base.cost) / h == pytest.approx(base.price, abs=1e-4)
