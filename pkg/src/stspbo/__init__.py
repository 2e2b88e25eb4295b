"""Satisficing Thompson sampling for sequential and parallel Bayesian optimization."""
from .acquisition import (SatisficingPolicy, ThompsonPolicy, blahut_arimoto, build_ensemble,
                          distortion_matrix, lagrangian, sts_select, ts_select)
from .errors import DomainError, FormatError, NumericalError, ResourceError
from .gp import (KernelSpec, default_kernel, empty_posterior, fit, posterior_joint_sample,
                 posterior_mean_var, update)
from .grid import GridDomain, build_grid, build_protocol_grid, protocol_from_currents
from .metrics import aggregate_seeds, default_time_grid, regret_curve
from .objective import NoiseModel, SynthParams, TabularObjective, load_csv, synth_battery
from .rng import derive
from .scheduler import TimeModel, run_asynchronous, run_mode, run_sequential, run_synchronous

__version__ = "0.1.0"
