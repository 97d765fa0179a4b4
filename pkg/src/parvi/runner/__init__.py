from .config import ConfigError, RunConfig, load_config, validate_config
from .diagnostics import gaussian_w2_proxy, mean_nn_distance, mode_balance
from .experiment import RunResult, run_experiment

__all__ = [
    "ConfigError",
    "RunConfig",
    "load_config",
    "validate_config",
    "gaussian_w2_proxy",
    "mean_nn_distance",
    "mode_balance",
    "RunResult",
    "run_experiment",
]
