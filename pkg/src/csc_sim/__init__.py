"""Simulation and analysis of a contract-mediated collaborative attack incentive mechanism."""

from .equilibrium import Equilibrium, attack_result, best_response, marginal_cost, verify_dominance
from .mechanism import (
    Outcome,
    check_budget,
    check_dsic_split,
    check_ex_post_ir,
    fairness_score,
    payments,
    quasi_utility,
)
from .model import (
    GameParams,
    RewardScheme,
    TypeProfile,
    attack_phase_utility,
    cost,
    normalize_types,
    reward,
    reward_share,
)

__version__ = "0.1.0"
