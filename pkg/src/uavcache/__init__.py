"""Joint UAV placement, edge caching and user association for QoE maximisation."""

__version__ = "0.1.0"

from .config import ChannelParams, Config, MosParams, NetworkConfig, load_config  # noqa: E402
from .model import SolutionState, generate_scenario  # noqa: E402
from .problem import Problem, build_problem  # noqa: E402

__all__ = [
    "ChannelParams", "Config", "MosParams", "NetworkConfig", "Problem", "SolutionState",
    "build_problem", "generate_scenario", "load_config",
]
