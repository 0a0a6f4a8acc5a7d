"""
Analytics Module

Payment distributions of the market participants over a scenario set:
per-scenario totals computed through dispatch and settlement, weighted
moments, the variance decomposition of an option trade, loss probabilities
and the sensitivity sweep of the variance reduction in rho and sigma.
"""

import math
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from core.bilateral.bilateral import n2_trade, variance_delta_analytic
from core.clearing.clearing import ClearingSolution
from core.clearing.settlement import option_flows
from core.dispatch.cost import MARKET_MAKER_ID, MarketInstance
from core.dispatch.dispatch import day_ahead, payment_matrix
from core.dispatch.example import PEAKER_ID, WIND_ID, example_instance
from core.options.trade import BilateralContract
from core.scenario.scenario import ScenarioSet, UniformScenarioModel, discretize, expect
from core.utils.errors import ConfigError

logger = logging.getLogger(__name__)

SWEEP_PARAMETERS = ("rho", "sigma")


@dataclass(frozen=True)
class PaymentSample:
    """Total payment of one participant in every scenario of a set."""
    participant: str
    scenarios: ScenarioSet
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.scenarios.weights.shape:
            raise ConfigError(f"{self.participant}: payments must be aligned with the scenario set")
        object.__setattr__(self, "values", values)

    @property
    def weights(self) -> np.ndarray:
        return self.scenarios.weights

    def shifted(self, other: np.ndarray, participant: Optional[str] = None) -> "PaymentSample":
        return PaymentSample(participant or self.participant, self.scenarios, self.values + other)


@dataclass(frozen=True)
class Moments:
    mean: Dict[str, float]
    variance: Dict[str, float]
    covariance: pd.DataFrame


@dataclass(frozen=True)
class VarianceDecomposition:
    cov_term: float
    var_term: float

    @property
    def total(self) -> float:
        return self.cov_term + self.var_term


def simulate_payments(instance: MarketInstance, scenarios: ScenarioSet,
                      option: Union[None, BilateralContract, ClearingSolution] = None) -> Dict[str, PaymentSample]:
    """
    Per-scenario total payments through dispatch and settlement.

    Args:
        instance: Market instance
        scenarios: Scenario set
        option: None, a bilateral contract, or a cleared centralized solution
            evaluated on the same scenario set

    Returns:
        id -> PaymentSample for every producer (plus M with a centralized solution)
    """
    forward = day_ahead(instance)
    energy, spot = payment_matrix(instance, forward, scenarios)
    totals = {pid: values.copy() for pid, values in energy.items()}

    if isinstance(option, BilateralContract):
        for pid in (option.buyer, option.seller):
            if pid not in totals:
                raise ConfigError(f"contract party {pid} is not a market participant")
        buyer, seller = option.flows(spot)
        totals[option.buyer] += buyer
        totals[option.seller] += seller
    elif isinstance(option, ClearingSolution):
        if len(option.scenarios) != len(scenarios) or not np.array_equal(option.scenarios.omegas, scenarios.omegas):
            raise ConfigError("the clearing solution was computed on a different scenario set")
        for pid, flow in option_flows(option).items():
            if pid == MARKET_MAKER_ID:
                totals[pid] = flow
            elif pid in totals:
                totals[pid] += flow
            else:
                raise ConfigError(f"cleared participant {pid} is not a market participant")
    elif option is not None:
        raise ConfigError(f"unsupported option description: {type(option).__name__}")

    return {pid: PaymentSample(pid, scenarios, values) for pid, values in totals.items()}


def _weighted_mean(sample: PaymentSample) -> float:
    return expect(sample.scenarios, sample.values)


def _weighted_cov(a: PaymentSample, b: PaymentSample) -> float:
    return expect(a.scenarios, (a.values - _weighted_mean(a)) * (b.values - _weighted_mean(b)))


def moments(samples: Union[Dict[str, PaymentSample], Sequence[PaymentSample]]) -> Moments:
    """
    Weighted means, population variances and the covariance table.

    Args:
        samples: Aligned payment samples

    Returns:
        Moments; covariance is a pandas DataFrame indexed by participant
    """
    if isinstance(samples, dict):
        samples = list(samples.values())
    if not samples:
        raise ConfigError("moments need at least one sample")
    base = samples[0].scenarios
    for s in samples[1:]:
        if s.scenarios is not base and not np.array_equal(s.scenarios.weights, base.weights):
            raise ConfigError("payment samples are not aligned")
    ids = [s.participant for s in samples]
    cov = np.array([[_weighted_cov(a, b) for b in samples] for a in samples])
    return Moments(
        mean={s.participant: _weighted_mean(s) for s in samples},
        variance={s.participant: float(cov[k, k]) for k, s in enumerate(samples)},
        covariance=pd.DataFrame(cov, index=ids, columns=ids),
    )


def variance_decomposition(pi_sample: PaymentSample, v_sample: PaymentSample) -> VarianceDecomposition:
    """
    var[pi + V] - var[pi] split into 2 cov(pi, V) and var[V].

    Args:
        pi_sample: Payments without the option
        v_sample: Option cash flows of the same participant

    Returns:
        VarianceDecomposition
    """
    return VarianceDecomposition(cov_term=2.0 * _weighted_cov(pi_sample, v_sample),
                                 var_term=_weighted_cov(v_sample, v_sample))


def loss_probability(sample: PaymentSample) -> float:
    """Probability that the participant's total payment is negative."""
    return math.fsum(sample.weights[sample.values < 0])


def payment_trace_frame(samples: Dict[str, PaymentSample]) -> pd.DataFrame:
    """Long table (scenario, weight, participant, payment), participant-major."""
    frames = []
    for pid in sorted(samples):
        s = samples[pid]
        frames.append(pd.DataFrame({
            "scenario": np.arange(len(s.scenarios)),
            "weight": s.weights,
            "participant": pid,
            "payment": s.values,
        }))
    return pd.concat(frames, ignore_index=True)


@dataclass(frozen=True)
class SweepRow:
    parameter: str
    value: float
    participant: str
    analytic_delta: float
    simulated_delta: float


def variance_reduction_sweep(parameter: str, values: Sequence[float], demand: float, mu: float,
                             sigma: float, rho: float, q: float, n: int) -> List[SweepRow]:
    """
    Variance reduction of the canonical N2 trade as rho or sigma varies.

    For every value the trade (q, 1/rho - 2q, sqrt(3) sigma) is evaluated on
    the example market: the closed form -(3/2) q K sigma^2 against the
    quadrature estimate computed through dispatch and settlement.

    Args:
        parameter: "rho" or "sigma"
        values: Values of the swept parameter
        demand, mu, sigma, rho: Base example market
        q: Option price held fixed
        n: Quadrature points

    Returns:
        Two rows (W then P) per value, in input order
    """
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigError(f"sweep parameter must be one of {SWEEP_PARAMETERS} (got {parameter!r})")
    rows = []
    for value in values:
        r, s = (value, sigma) if parameter == "rho" else (rho, value)
        if not 0 < q < 1.0 / (2.0 * r):
            raise ConfigError(f"q={q} leaves (0, 1/(2 rho)) at {parameter}={value}")
        instance = example_instance(demand, mu, s, r)
        model = UniformScenarioModel(mu=mu, sigma=s)
        scenarios = discretize(model, n)
        trade = n2_trade(q, model, r)
        contract = BilateralContract(buyer=WIND_ID, seller=PEAKER_ID, trade=trade)
        without = simulate_payments(instance, scenarios)
        with_option = simulate_payments(instance, scenarios, contract)
        analytic = variance_delta_analytic(q, trade.K, s)
        for pid in (WIND_ID, PEAKER_ID):
            simulated = moments([with_option[pid]]).variance[pid] - moments([without[pid]]).variance[pid]
            rows.append(SweepRow(parameter, float(value), pid, analytic, simulated))
        logger.debug("Sweep %s=%s: analytic %.6g", parameter, value, analytic)
    return rows
