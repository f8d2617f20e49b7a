"""Rate-distortion-perception bounds for Gaussian processes.

MSE distortion, squared Wasserstein-2 perception. Two routes:

* finite interval: kernel -> Mercer spectrum (:mod:`gprdpf.mercer`) ->
  per-coefficient allocation (:mod:`gprdpf.allocation`);
* stationary source: spectral density -> frequency integrals
  (:mod:`gprdpf.stationary`).
"""

__version__ = "0.1.0"

from .allocation import (  # noqa: E402
    AllocationResult,
    PerceptionPlan,
    RDPPoint,
    evaluate,
    feasible_distortion_range,
    heuristic_perception,
    monte_carlo_verify,
    rdp_curve,
    solve,
    solve_gamma,
)
from .errors import ConsistencyError, DomainError, FeasibilityError, NumericalError  # noqa: E402
from .kernels import (  # noqa: E402
    Domain,
    KernelSpec,
    SpectralDensitySpec,
    eval_kernel,
    eval_spectral_density,
    total_power,
)
from .mercer import EigenSpectrum, decompose, reconstruction_residual, trace  # noqa: E402
from .quadrature import FrequencyGrid  # noqa: E402
from .scalar_rdpf import (  # noqa: E402
    Branch,
    ScalarAllocation,
    branch_select,
    distortion_at,
    rate_at,
    reconstruction_variance,
    scalar_rate,
    w2_scalar,
)
from .stationary import (  # noqa: E402
    StationaryPoint,
    partition_sets,
    per_frequency_distortion,
    stationary_point,
    sweep,
)

__all__ = [
    "AllocationResult", "Branch", "ConsistencyError", "Domain", "DomainError", "EigenSpectrum",
    "FeasibilityError", "FrequencyGrid", "KernelSpec", "NumericalError", "PerceptionPlan",
    "RDPPoint", "ScalarAllocation", "SpectralDensitySpec", "StationaryPoint", "branch_select",
    "decompose", "distortion_at", "eval_kernel", "eval_spectral_density", "evaluate",
    "feasible_distortion_range", "heuristic_perception", "monte_carlo_verify", "partition_sets",
    "per_frequency_distortion", "rate_at", "rdp_curve", "reconstruction_residual",
    "reconstruction_variance", "scalar_rate", "solve", "solve_gamma", "stationary_point",
    "sweep", "total_power", "trace", "w2_scalar",
]
