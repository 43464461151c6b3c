"""Case-study simulators, exact mode rules, dataset generation and IO."""

from .core import (
    SCENARIOS,
    CrossroadScenario,
    MultiAgentCrossroadScenario,
    NavigationScenario,
    Scenario,
    SignalScenario,
    exact_mode,
    get_scenario,
    simulate_trajectories,
)
from .datasets import (
    DESK_SIZES,
    PAPER_SIZES,
    Dataset,
    SplitSizes,
    generate_dataset,
    load_dataset,
    load_states_binary,
    save_dataset,
    save_states_binary,
)

__all__ = [
    "SCENARIOS",
    "CrossroadScenario",
    "Dataset",
    "DESK_SIZES",
    "MultiAgentCrossroadScenario",
    "NavigationScenario",
    "PAPER_SIZES",
    "Scenario",
    "SignalScenario",
    "SplitSizes",
    "exact_mode",
    "generate_dataset",
    "get_scenario",
    "load_dataset",
    "load_states_binary",
    "save_dataset",
    "save_states_binary",
    "simulate_trajectories",
]
