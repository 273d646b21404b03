"""Policies, bounds and simulations for the single-sample secretary problem."""
from .bounds import gamma, optimal_block_thresholds, paper_bound, solve_optimal_threshold, truncated_gamma
from .last_success import (
    LastSuccessRule,
    conditioned_s_distribution,
    monotone_rule_success,
    optimal_accept_set,
    optimal_stop_decision,
    simulate_last_success,
    success_upper_bound,
)
from .model import AdversarialOrder, ArrivalTimes, GoogolInstance, Orientation, RandomnessSpec, validate_instance
from .policies import BlockRankSelector, SampleMaxThreshold, adversarial_exact_success, block_rank_run
from .ranks import exact_rank_beat_prob, p_value
from .schedule import DEFAULT_CONSTANTS, ThresholdSchedule
from .simulation import run_monte_carlo, superstar_level, top_pair_collision_estimate
from .stats import EstimateReport, wilson

__version__ = "0.1.0"
