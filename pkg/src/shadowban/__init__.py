"""Shadow-banning control of bounded-confidence opinion dynamics."""
from .dynamics import DynamicsParams, opinion_derivative, shift_function, simulate_discrete_events, step_euler
from .engine import SimulationConfig, SweepGrid, run, run_relative, sweep
from .metrics import PartisanSplit, edge_polarity_ban_stats, histogram, shadow_ban_rate, summarize
from .network import (DirectedNetwork, generate_er, generate_path, generate_sbm, generate_standin, load_network,
                      save_network)
from .objectives import ObjectiveKind, reward, reward_gradient
from .policy import BanBudget, ShadowBanPolicy, compute_coefficients, realize_stochastic, solve_policy, solve_policy_oracle

__all__ = [
    "BanBudget", "DirectedNetwork", "DynamicsParams", "ObjectiveKind", "PartisanSplit",
    "ShadowBanPolicy", "SimulationConfig", "SweepGrid", "compute_coefficients",
    "edge_polarity_ban_stats", "generate_er", "generate_path", "generate_sbm", "generate_standin",
    "histogram",
    "load_network", "opinion_derivative", "realize_stochastic", "reward", "reward_gradient",
    "run", "run_relative", "save_network", "shadow_ban_rate", "shift_function",
    "simulate_discrete_events", "solve_policy", "solve_policy_oracle", "step_euler",
    "summarize", "sweep",
]
