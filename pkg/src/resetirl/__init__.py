"""Tabular finite-horizon IRL workbench with arbitrary reset distributions."""
from .classes import (BudgetExceeded, CompletenessReport, PolicyClass, ResetDistribution,
                      RewardClass, behavioral_cloning, best_realizable_policy,
                      coverage_coefficient, reward_agnostic_completeness,
                      reward_indexed_completeness, worst_case_gap)
from .demos import DemoDataset, sample_demos
from .guitar import (GuitarRunResult, RewardIterate, empirical_loss, guitar_run,
                     make_reset_distribution, omd_reward_step)
from .mdp import (ConfigurationError, NonstationaryPolicy, OccupancyTensor, TabularMdp,
                  compute_occupancy, evaluate_policy, performance_difference, policy_value)
from .psdp import PsdpConfig, psdp_certificate, psdp_solve
from .stile import StileResult, WitnessFunction, stile_select, witness

__version__ = "0.1.0"
