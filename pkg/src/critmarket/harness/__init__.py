from .config import Config, ConfigError, load_config
from .experiment import (FAIRNESS_MODES, Cell, CellResult, ExperimentPlan, grid, run_cell,
                         run_experiment, run_plan, scaling_cells, write_results)
from .instances import InstanceSpec, generate_instance
from .oracle import brute_force_volume, random_case, run_oracle_suite

__all__ = [
    "FAIRNESS_MODES", "Cell", "CellResult", "Config", "ConfigError", "ExperimentPlan",
    "InstanceSpec", "brute_force_volume", "generate_instance", "grid", "load_config",
    "random_case", "run_cell", "run_experiment", "run_oracle_suite", "run_plan", "scaling_cells",
    "write_results",
]
