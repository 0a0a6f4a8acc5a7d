"""
Experiment Configuration Module

Loads experiment files (JSON, or YAML for .yaml/.yml), rejects unknown keys
with their full key path, validates values through the domain constructors
and builds the objects every command needs: the market instance, the
scenario set, the option description and the risk settings.
"""

import os
import json
import hashlib
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import yaml

from core.clearing.acceptability import (
    AllowableBox, LinearConstraint, ParticipantBid, Side, cvar_acceptability, linear_acceptability,
    risk_neutral_acceptability,
)
from core.clearing.clearing import MAX_MS, OBJECTIVES
from core.dispatch.cost import (
    DispatchableGen, MarketInstance, RenewableGen, UNBOUNDED, cost_curve_from_blocks,
)
from core.dispatch.example import PEAKER_ID, WIND_ID, example_instance
from core.options.trade import BilateralContract, TradeTriple
from core.scenario.scenario import SQRT3, ScenarioSet, UniformScenarioModel, discretize, sample
from core.utils.config import BOX_EPSILON, DEFAULT_SCENARIOS, OUTPUT_DIR
from core.utils.errors import ConfigError

logger = logging.getLogger(__name__)

ANY = object()
_COST_BLOCKS = [{"capacity_mw": None, "marginal_cost_per_mwh": None}]

# Allowed keys; dict = object, [dict] = list of objects, None = scalar or list of scalars
SCHEMA = {
    "market": {
        "example": {
            "demand_mw": None, "mu_mw": None, "sigma_mw": None, "rho": None,
            "extra_peakers": [{"id": None, "marginal_cost_per_mwh": None}],
        },
        "demand_mw": None,
        "wind": {"mu_mw": None, "sigma_mw": None},
        "dispatchables": [{"id": None, "cap_mw": None, "ramp_mw": None, "cost_blocks": _COST_BLOCKS}],
        "renewables": [{"id": None, "cap_mw": None, "availability_share": None, "cost_blocks": _COST_BLOCKS}],
    },
    "option": {
        "mode": None,
        "bilateral": {"buyer": None, "seller": None, "q": None, "strike": None, "delta_mw": None},
        "box": {"q_max": None, "strike_max": None, "delta_max_mw": None, "epsilon": None},
        "bids": [{"id": None, "side": None, "acceptability": ANY}],
        "exercise_split": ANY,
        "objective": None,
        "newton_init": None,
    },
    "risk": {
        "side": None, "participant": None, "alphas": None, "delta_cap_mw": None,
        "strike_grid": ANY, "q_bracket": None,
    },
    "run": {
        "scenarios": None, "sampling": None, "seed": None, "output_dir": None,
        "sweep": {"parameter": None, "values": None, "q": None},
    },
}

OPTION_MODES = ("none", "bilateral", "centralized")
SAMPLING_MODES = ("quadrature", "monte_carlo")


def _check_keys(node: Any, spec: Any, path: str) -> None:
    if spec is ANY or spec is None:
        return
    if isinstance(spec, list):
        if not isinstance(node, list):
            raise ConfigError(f"{path} must be a list")
        for k, item in enumerate(node):
            _check_keys(item, spec[0], f"{path}[{k}]")
        return
    if not isinstance(node, dict):
        raise ConfigError(f"{path or 'document'} must be an object")
    for key, value in node.items():
        sub = f"{path}.{key}" if path else key
        if key not in spec:
            raise ConfigError(f"unknown key {sub}")
        _check_keys(value, spec[key], sub)


def _number(section: Dict[str, Any], key: str, path: str, default: Any = ConfigError) -> Optional[float]:
    if key not in section or section[key] is None:
        if default is ConfigError:
            raise ConfigError(f"missing required key {path}.{key}")
        return default
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}.{key} must be a number (got {value!r})")
    return float(value)


def config_hash(document: Dict[str, Any]) -> str:
    """SHA-256 of the canonical (sorted-key, compact) JSON rendering."""
    canonical = json.dumps(document, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ExampleParams:
    demand: float
    mu: float
    sigma: float
    rho: float
    extra_peakers: Tuple[Tuple[str, float], ...] = ()


@dataclass(frozen=True)
class RiskSettings:
    side: str
    participant: Optional[str]
    alphas: Tuple[float, ...]
    delta_cap: float
    strike_grid: Tuple[float, ...]
    q_bracket: Optional[Tuple[float, float]]

    def participant_for(self, side: str) -> str:
        """Configured participant, or W for buyers and P for sellers."""
        if self.participant is not None:
            return self.participant
        return WIND_ID if side == "buyer" else PEAKER_ID


@dataclass
class ExperimentConfig:
    """Parsed and validated experiment file."""
    source: str
    document: Dict[str, Any]
    market: MarketInstance
    example: Optional[ExampleParams]
    option_mode: str
    run: Dict[str, Any]
    hash: str
    objective: str = MAX_MS
    bilateral: Optional[BilateralContract] = None
    box: Optional[AllowableBox] = None
    exercise_split: Optional[Dict[str, float]] = None
    newton_init: Tuple[float, float] = (0.3, 0.7)
    risk: Optional[RiskSettings] = None
    bid_specs: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def model(self) -> UniformScenarioModel:
        return self.market.model

    @property
    def scenario_count(self) -> int:
        return int(self.run.get("scenarios") or DEFAULT_SCENARIOS)

    @property
    def seed(self) -> Optional[int]:
        return self.run.get("seed")

    @property
    def sampling(self) -> str:
        return self.run.get("sampling") or "quadrature"

    @property
    def output_dir(self) -> str:
        return self.run.get("output_dir") or OUTPUT_DIR

    def scenarios(self, n: Optional[int] = None, seed: Optional[int] = None) -> ScenarioSet:
        """
        Scenario set of the run.

        An explicit seed selects Monte Carlo sampling; otherwise run.sampling
        decides, and Monte Carlo there needs run.seed.
        """
        n = int(n or self.scenario_count)
        if seed is not None:
            return sample(self.model, n, int(seed))
        if self.sampling == "monte_carlo":
            if self.seed is None:
                raise ConfigError("run.sampling = monte_carlo needs run.seed")
            return sample(self.model, n, int(self.seed))
        return discretize(self.model, n)

    def effective_seed(self, seed: Optional[int] = None) -> Optional[int]:
        """Seed recorded in artifact headers, None for quadrature runs."""
        if seed is not None:
            return int(seed)
        return self.seed if self.sampling == "monte_carlo" else None

    def require_example(self, command: str) -> ExampleParams:
        if self.example is None:
            raise ConfigError(f"{command} needs the example market (market.example)")
        return self.example

    def bids(self, energy: Dict[str, np.ndarray], spot: np.ndarray, scenarios: ScenarioSet) -> List[ParticipantBid]:
        """Participant bids with acceptability sets evaluated on the given scenarios."""
        if self.box is None:
            raise ConfigError("centralized clearing needs option.box")
        specs = self.bid_specs or self._default_bid_specs()
        bids = []
        for k, spec in enumerate(specs):
            path = f"option.bids[{k}]"
            pid = spec.get("id")
            if pid not in energy:
                raise ConfigError(f"{path}.id: {pid!r} is not a market participant")
            side = spec.get("side")
            if side not in (Side.BUYER.value, Side.SELLER.value):
                raise ConfigError(f"{path}.side must be 'buyer' or 'seller' (got {side!r})")
            acc = spec.get("acceptability", "risk_neutral")
            if acc == "risk_neutral":
                aset = risk_neutral_acceptability(side, energy[pid], spot, scenarios, self.box)
            elif isinstance(acc, dict) and set(acc) == {"cvar_alpha"}:
                aset = cvar_acceptability(side, float(acc["cvar_alpha"]), energy[pid], spot, scenarios, self.box)
            elif isinstance(acc, dict) and set(acc) == {"constraints"}:
                constraints = []
                for j, c in enumerate(acc["constraints"]):
                    cpath = f"{path}.acceptability.constraints[{j}]"
                    _check_keys(c, {"q": None, "strike": None, "delta": None, "sense": None, "rhs": None}, cpath)
                    if c.get("sense") not in ("<=", ">="):
                        raise ConfigError(f"{cpath}.sense must be '<=' or '>='")
                    constraints.append(LinearConstraint(
                        a=_number(c, "q", cpath, 0.0), b=_number(c, "strike", cpath, 0.0),
                        c=_number(c, "delta", cpath, 0.0), sense=c["sense"], rhs=_number(c, "rhs", cpath),
                    ))
                aset = linear_acceptability(side, constraints, self.box)
            else:
                raise ConfigError(
                    f"{path}.acceptability must be 'risk_neutral', {{cvar_alpha}} or {{constraints}}"
                )
            bids.append(ParticipantBid(id=pid, side=side, acceptability=aset))
        return bids

    def _default_bid_specs(self) -> List[Dict[str, Any]]:
        if self.example is None:
            raise ConfigError("option.bids is required outside the example market")
        specs = [{"id": WIND_ID, "side": "buyer"}, {"id": PEAKER_ID, "side": "seller"}]
        specs += [{"id": pid, "side": "seller"} for pid, _ in self.example.extra_peakers]
        return specs


def _build_example(section: Dict[str, Any]) -> Tuple[MarketInstance, ExampleParams]:
    path = "market.example"
    peakers = tuple(
        (str(p.get("id")), _number(p, "marginal_cost_per_mwh", f"{path}.extra_peakers[{k}]"))
        for k, p in enumerate(section.get("extra_peakers") or [])
    )
    params = ExampleParams(
        demand=_number(section, "demand_mw", path), mu=_number(section, "mu_mw", path),
        sigma=_number(section, "sigma_mw", path), rho=_number(section, "rho", path),
        extra_peakers=peakers,
    )
    instance = example_instance(params.demand, params.mu, params.sigma, params.rho, peakers)
    return instance, params


def _cost_curve(blocks: List[Dict[str, Any]], path: str):
    if not blocks:
        raise ConfigError(f"{path}.cost_blocks must list at least one block")
    return cost_curve_from_blocks([
        (b.get("capacity_mw"), _number(b, "marginal_cost_per_mwh", f"{path}.cost_blocks[{k}]"))
        for k, b in enumerate(blocks)
    ])


def _share_availability(share: float):
    def availability(omega: float) -> float:
        return share * omega
    return availability


def _build_explicit(section: Dict[str, Any]) -> MarketInstance:
    wind = section.get("wind")
    if not isinstance(wind, dict):
        raise ConfigError("market.wind is required for an explicit market")
    model = UniformScenarioModel(mu=_number(wind, "mu_mw", "market.wind"),
                                 sigma=_number(wind, "sigma_mw", "market.wind"))
    dispatchables = []
    for k, g in enumerate(section.get("dispatchables") or []):
        path = f"market.dispatchables[{k}]"
        dispatchables.append(DispatchableGen(
            id=str(g.get("id")),
            cap=_number(g, "cap_mw", path, UNBOUNDED),
            ramp=_number(g, "ramp_mw", path, UNBOUNDED),
            cost=_cost_curve(g.get("cost_blocks"), path),
        ))
    renewables = []
    for k, r in enumerate(section.get("renewables") or []):
        path = f"market.renewables[{k}]"
        share = _number(r, "availability_share", path, 1.0)
        kwargs = {} if share == 1.0 else {"availability": _share_availability(share)}
        renewables.append(RenewableGen(
            id=str(r.get("id")), cap=_number(r, "cap_mw", path),
            cost=_cost_curve(r.get("cost_blocks"), path), **kwargs,
        ))
    return MarketInstance(demand=_number(section, "demand_mw", "market"), dispatchables=dispatchables,
                          renewables=renewables, model=model)


def _strike_grid(spec: Any, default_stop: float) -> Tuple[float, ...]:
    if spec is None:
        return tuple(np.linspace(BOX_EPSILON, default_stop, 21).tolist())
    if isinstance(spec, list):
        return tuple(float(k) for k in spec)
    if isinstance(spec, dict):
        _check_keys(spec, {"start": None, "stop": None, "num": None}, "risk.strike_grid")
        num = int(_number(spec, "num", "risk.strike_grid"))
        return tuple(np.linspace(_number(spec, "start", "risk.strike_grid"),
                                 _number(spec, "stop", "risk.strike_grid"), num).tolist())
    raise ConfigError("risk.strike_grid must be a list or {start, stop, num}")


def parse_document(document: Dict[str, Any], source: str = "<memory>") -> ExperimentConfig:
    """
    Validate a parsed experiment document and build its objects.

    Args:
        document: Parsed JSON/YAML mapping
        source: File name used in messages

    Returns:
        ExperimentConfig
    """
    _check_keys(document, SCHEMA, "")
    market_section = document.get("market")
    if not isinstance(market_section, dict):
        raise ConfigError("market section is required")

    example = None
    if "example" in market_section:
        if set(market_section) != {"example"}:
            raise ConfigError("market.example cannot be combined with explicit market keys")
        market, example = _build_example(market_section["example"])
    else:
        market = _build_explicit(market_section)

    option = document.get("option") or {}
    mode = option.get("mode", "none")
    if mode not in OPTION_MODES:
        raise ConfigError(f"option.mode must be one of {OPTION_MODES} (got {mode!r})")
    objective = option.get("objective", MAX_MS)
    if objective not in OBJECTIVES:
        raise ConfigError(f"option.objective must be one of {OBJECTIVES} (got {objective!r})")

    run = dict(document.get("run") or {})
    if run.get("sampling", "quadrature") not in SAMPLING_MODES:
        raise ConfigError(f"run.sampling must be one of {SAMPLING_MODES}")
    if run.get("scenarios") is not None and int(run["scenarios"]) < 1:
        raise ConfigError("run.scenarios must be >= 1")

    config = ExperimentConfig(
        source=source, document=document, market=market, example=example, option_mode=mode,
        run=run, hash=config_hash(document), objective=objective,
    )

    if "bilateral" in option:
        b = option["bilateral"]
        cap = SQRT3 * market.model.sigma
        delta = _number(b, "delta_mw", "option.bilateral", cap)
        trade = TradeTriple(q=_number(b, "q", "option.bilateral"), K=_number(b, "strike", "option.bilateral"),
                            delta=delta)
        config.bilateral = BilateralContract(buyer=b.get("buyer", WIND_ID), seller=b.get("seller", PEAKER_ID),
                                             trade=trade)

    box = option.get("box")
    if box is not None:
        config.box = AllowableBox(
            q_max=_number(box, "q_max", "option.box"), K_max=_number(box, "strike_max", "option.box"),
            delta_max=_number(box, "delta_max_mw", "option.box"),
            epsilon=_number(box, "epsilon", "option.box", BOX_EPSILON),
        )
    elif example is not None:
        # Allowable trades (0, 1/rho] x (0, 1/rho] x (0, sqrt(3) sigma]
        config.box = AllowableBox(q_max=1.0 / example.rho, K_max=1.0 / example.rho,
                                  delta_max=SQRT3 * example.sigma)

    config.bid_specs = list(option.get("bids") or [])
    if "exercise_split" in option:
        split = option["exercise_split"]
        if not isinstance(split, dict):
            raise ConfigError("option.exercise_split must map seller ids to fractions")
        config.exercise_split = {str(k): float(v) for k, v in split.items()}
    if "newton_init" in option:
        init = option["newton_init"]
        if not isinstance(init, list) or len(init) != 2:
            raise ConfigError("option.newton_init must be [q_W, q_P]")
        config.newton_init = (float(init[0]), float(init[1]))

    risk = document.get("risk") or {}
    side = risk.get("side", "buyer")
    if side not in ("buyer", "seller"):
        raise ConfigError(f"risk.side must be 'buyer' or 'seller' (got {side!r})")
    bracket = risk.get("q_bracket")
    if bracket is not None and (not isinstance(bracket, list) or len(bracket) != 2):
        raise ConfigError("risk.q_bracket must be [lower, upper]")
    stop = 1.0 / example.rho if example is not None else 1.0
    config.risk = RiskSettings(
        side=side,
        participant=None if risk.get("participant") is None else str(risk["participant"]),
        alphas=tuple(float(a) for a in (risk.get("alphas") or [0.0])),
        delta_cap=_number(risk, "delta_cap_mw", "risk", 2.0 * SQRT3 * market.model.sigma / 5.0),
        strike_grid=_strike_grid(risk.get("strike_grid"), stop),
        q_bracket=None if bracket is None else (float(bracket[0]), float(bracket[1])),
    )

    logger.debug("Loaded experiment %s (hash %s)", source, config.hash[:12])
    return config


def load_config(path: str) -> ExperimentConfig:
    """
    Read an experiment file.

    Args:
        path: JSON file, or YAML when the suffix is .yaml/.yml

    Returns:
        ExperimentConfig
    """
    if not os.path.exists(path):
        raise ConfigError(f"experiment file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        try:
            if path.endswith((".yaml", ".yml")):
                document = yaml.safe_load(f)
            else:
                document = json.load(f)
        except (json.JSONDecodeError, yaml.YAMLError) as e:
            raise ConfigError(f"cannot parse {path}: {e}")
    if not isinstance(document, dict):
        raise ConfigError(f"{path}: the document must be an object")
    return parse_document(document, source=path)
