"""
Scenario Module

Uncertainty model for available wind capacity: a uniform distribution over
[mu - sqrt(3) sigma, mu + sqrt(3) sigma], its deterministic midpoint
discretisation, seeded Monte Carlo sampling, and expectations over discrete
scenario sets. Every other module evaluates scenarios through a ScenarioSet.
"""

import math
import logging
from dataclasses import dataclass, field
from typing import Callable, Iterator, Tuple, Union

import numpy as np

from core.utils.config import WEIGHT_SUM_TOL
from core.utils.errors import ConfigError

logger = logging.getLogger(__name__)

SQRT3 = math.sqrt(3.0)

# Bit generator used by sample(); recorded in artifact headers
RNG_ALGORITHM = "numpy.random.PCG64"


def rng_identifier() -> str:
    """Name and version of the random number generator behind sample()."""
    return f"{RNG_ALGORITHM} (numpy {np.__version__})"


@dataclass(frozen=True)
class UniformScenarioModel:
    """Uniform law of available wind capacity with mean mu and std sigma (MW)."""
    mu: float
    sigma: float

    def __post_init__(self):
        if not (self.sigma > 0):
            raise ConfigError(f"sigma must be > 0 (got sigma={self.sigma})")
        if self.mu - SQRT3 * self.sigma < 0:
            raise ConfigError(
                f"support must be nonnegative: mu - sqrt(3)*sigma = {self.mu - SQRT3 * self.sigma:.6g} < 0"
            )

    @property
    def half_width(self) -> float:
        """sqrt(3) * sigma, also the option volume cap of the example market."""
        return SQRT3 * self.sigma


@dataclass(frozen=True)
class ScenarioSet:
    """
    Discrete surrogate of the scenario law.

    omegas and weights are read-only arrays of equal length. The order is the
    scenario index used in every artifact.
    """
    omegas: np.ndarray
    weights: np.ndarray
    support: Tuple[float, float] = field(default=(-math.inf, math.inf))

    def __post_init__(self):
        omegas = np.array(self.omegas, dtype=float)
        weights = np.array(self.weights, dtype=float)
        if omegas.ndim != 1 or omegas.shape != weights.shape:
            raise ConfigError("scenario omegas and weights must be 1-D arrays of equal length")
        if omegas.size == 0:
            raise ConfigError("a scenario set needs at least one scenario")
        if np.any(weights <= 0):
            raise ConfigError("scenario weights must be strictly positive")
        total = math.fsum(weights)
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ConfigError(f"scenario weights must sum to 1 (sum={total!r})")
        lo, hi = self.support
        if np.any(omegas < lo) or np.any(omegas > hi):
            raise ConfigError(f"scenario outside the support [{lo}, {hi}]")
        omegas.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "omegas", omegas)
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return int(self.omegas.size)

    def __iter__(self) -> Iterator[Tuple[float, float]]:
        return iter(zip(self.omegas.tolist(), self.weights.tolist()))

    def mean(self) -> float:
        return expect(self, self.omegas)

    def variance(self) -> float:
        centred = self.omegas - self.mean()
        return expect(self, centred * centred)


def support(model: UniformScenarioModel) -> Tuple[float, float]:
    """
    Support of the scenario law.

    Args:
        model: Scenario model

    Returns:
        (mu - sqrt(3) sigma, mu + sqrt(3) sigma)
    """
    return (model.mu - model.half_width, model.mu + model.half_width)


def discretize(model: UniformScenarioModel, n: int) -> ScenarioSet:
    """
    Midpoint rule: n equally weighted midpoints of n equal subintervals.

    Offsets are built symmetrically around mu, so the set mean is mu up to
    rounding of the final additions.

    Args:
        model: Scenario model
        n: Number of scenarios (>= 1)

    Returns:
        ScenarioSet in ascending omega order
    """
    if n < 1:
        raise ConfigError(f"discretize needs n >= 1 (got n={n})")
    k = np.arange(n, dtype=float)
    offsets = model.half_width * (2.0 * k + 1.0 - n) / n
    omegas = model.mu + offsets
    weights = np.full(n, 1.0 / n)
    logger.debug("Discretised U[%s, %s] into %d midpoints", *support(model), n)
    return ScenarioSet(omegas=omegas, weights=weights, support=support(model))


def sample(model: UniformScenarioModel, n: int, seed: int) -> ScenarioSet:
    """
    n i.i.d. uniform draws with weight 1/n, in draw order.

    Args:
        model: Scenario model
        n: Number of draws (>= 1)
        seed: Seed of the PCG64 bit generator; equal seeds give identical sets

    Returns:
        ScenarioSet
    """
    if n < 1:
        raise ConfigError(f"sample needs n >= 1 (got n={n})")
    lo, hi = support(model)
    rng = np.random.Generator(np.random.PCG64(seed))
    omegas = rng.uniform(lo, hi, size=n)
    weights = np.full(n, 1.0 / n)
    logger.debug("Sampled %d scenarios with seed %s (%s)", n, seed, RNG_ALGORITHM)
    return ScenarioSet(omegas=omegas, weights=weights, support=(lo, hi))


def expect(scenarios: ScenarioSet, valuation: Union[Callable[[float], float], np.ndarray],
           vectorized: bool = False) -> float:
    """
    Weighted expectation sum(weight * valuation(omega)).

    The reduction uses math.fsum, so the result does not depend on how the
    valuation was computed (sequentially or in chunks).

    Args:
        scenarios: Scenario set
        valuation: Callable of one scenario, or an array aligned with the set
        vectorized: Call the valuation once on the whole omega array

    Returns:
        Expected value
    """
    if callable(valuation):
        if vectorized:
            values = np.asarray(valuation(scenarios.omegas), dtype=float)
        else:
            values = np.fromiter((valuation(w) for w in scenarios.omegas.tolist()),
                                 dtype=float, count=len(scenarios))
    else:
        values = np.asarray(valuation, dtype=float)
    if values.shape != scenarios.weights.shape:
        raise ConfigError("valuation must give one value per scenario")
    return math.fsum(scenarios.weights * values)
