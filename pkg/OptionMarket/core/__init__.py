"""
Core package for OptionMarket.

This package contains the market model, the option trading and clearing
logic, the risk and analytics layers and the run pipelines behind the CLI.
"""

from core.scenario.scenario import UniformScenarioModel, ScenarioSet, discretize, sample
from core.dispatch.cost import MarketInstance
from core.options.trade import TradeTriple, BilateralContract
from core.clearing.clearing import ClearingProblem, ClearingSolution, clear
from core.experiment.config import ExperimentConfig, load_config
from core.experiment.run_manager import RunManager
from core.utils.security import get_secure_path, secure_output_dir

__all__ = [
    "UniformScenarioModel",
    "ScenarioSet",
    "discretize",
    "sample",
    "MarketInstance",
    "TradeTriple",
    "BilateralContract",
    "ClearingProblem",
    "ClearingSolution",
    "clear",
    "ExperimentConfig",
    "load_config",
    "RunManager",
    "get_secure_path",
    "secure_output_dir",
]
