"""Energy-aware placement of DU/CU/UPF chains on Open RAN edge servers."""
__version__ = "0.1.0"

from .baselines import asm_place, ghp_place, pmd_place, ra_place
from .deployment import (Deployment, EnergyReport, InfeasibleError, InvalidDeploymentError,
                         Placement, UnknownNodeError, objective_energy, validate)
from .oracle import best_rfdh_activation, exact_small_solve
from .rfdh import dfs_paths, rfdh_place
from .scenario import (EnergyParams, Network, RequestSet, ScenarioError, fixture_F, fixture_T,
                       generate_requests, load_requests, load_scenario, sample_scenario)

__all__ = [
    "__version__", "asm_place", "ghp_place", "pmd_place", "ra_place", "Deployment",
    "EnergyReport", "InfeasibleError", "InvalidDeploymentError", "Placement",
    "UnknownNodeError", "objective_energy", "validate", "best_rfdh_activation",
    "exact_small_solve", "dfs_paths", "rfdh_place", "EnergyParams", "Network", "RequestSet",
    "ScenarioError", "fixture_F", "fixture_T", "generate_requests", "load_requests",
    "load_scenario", "sample_scenario",
]
