"""CloudControl - signaling, FlipIt and Gestalt equilibria for cloud-controlled devices."""

__version__ = "0.1.0"
__license__ = "MPL-2.0"

from .config import CloudControlConfig, load_config
from .error_handling import (
    AssumptionViolationError,
    CloudControlError,
    DivergenceError,
    NoSelectionError,
    ScenarioError,
)
from .flipit import FlipItParams, nash_equilibrium, t_f
from .gestalt import CloudControlGame, GestaltSolution, composite_map, scan_fixed_points
from .signaling import SignalingUtilities, enumerate_pbe, t_s

__all__ = [
    "CloudControlConfig",
    "load_config",
    "CloudControlError",
    "AssumptionViolationError",
    "NoSelectionError",
    "DivergenceError",
    "ScenarioError",
    "SignalingUtilities",
    "enumerate_pbe",
    "t_s",
    "FlipItParams",
    "nash_equilibrium",
    "t_f",
    "CloudControlGame",
    "GestaltSolution",
    "composite_map",
    "scan_fixed_points",
    "__version__",
]
