"""Particle-based variational inference as simulated Wasserstein gradient flows."""

from .dynamics import AccelParams, DynamicsState, Method, init_state, step, wnes_coefficients
from .errors import (
    DataError,
    DegenerateEnsembleError,
    InvalidInputError,
    InvalidParameterError,
    LinearSolveError,
    NonFiniteError,
    ParviError,
)
from .fields import blob_field, gfsd_field, gfsf_field, svgd_field
from .geometry import PairedEnsembles, exp_map, inverse_exp, parallel_transport
from .kernel import (
    BandwidthPolicy,
    KernelConfig,
    eval_kernel,
    he_objective,
    kernel_matrices,
    median_bandwidth,
    select_bandwidth_he,
)

__version__ = "0.1.0"
