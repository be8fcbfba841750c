"""Non-cooperative code and power allocation for multipoint-to-multipoint CDMA networks.

Modules
-------
numerics     symmetric eigen/solve primitives and bracketed root finding
model        scenario configuration, random geometry and channel generation
games        utilities, potentials and best responses of every game
dynamics     round-robin best-response engine and the joint algorithms
experiments  paired Monte Carlo campaigns and their CSV/JSON outputs
config, cli  TOML configuration and the ``mpmp`` command
estimators   scikit-learn style allocators
"""

from .dynamics import (
    DynamicsConfig,
    Game,
    RunRecord,
    run_algorithm1,
    run_algorithm2,
    run_code_game,
    run_game,
    run_power_game,
)
from .estimators import CodeAllocator, EnergyEfficientAllocator
from .exceptions import (
    BracketError,
    DegeneratePowerError,
    InvalidInputError,
    InvalidStateError,
    MpmpError,
    SingularMatrixError,
    ValidationError,
)
from .experiments import AggregateResult, Campaign, run_campaign
from .games import EfficiencyParams, gamma_bar
from .model import GameState, Scenario, ScenarioConfig, ScenarioKind, generate_scenario

__version__ = "0.1.0"

__all__ = [
    "AggregateResult",
    "BracketError",
    "Campaign",
    "CodeAllocator",
    "DegeneratePowerError",
    "DynamicsConfig",
    "EfficiencyParams",
    "EnergyEfficientAllocator",
    "Game",
    "GameState",
    "InvalidInputError",
    "InvalidStateError",
    "MpmpError",
    "RunRecord",
    "Scenario",
    "ScenarioConfig",
    "ScenarioKind",
    "SingularMatrixError",
    "ValidationError",
    "gamma_bar",
    "generate_scenario",
    "run_algorithm1",
    "run_algorithm2",
    "run_campaign",
    "run_code_game",
    "run_game",
    "run_power_game",
]
