"""Power allocation for ACO-OFDM visible-light links under Gaussian and finite-alphabet inputs."""

from .channel import ChannelState, DiffuseParams, Geometry, subcarrier_gains, reference_channel
from .constellation import Constellation, make_pam, make_psk, make_qam
from .ee_alloc import DinkelbachState, FeasibleSet, ee_maximize, ee_subproblem, project_feasible
from .params import SystemParams
from .quadrature import QuadratureSpec
from .rates import (
    FiniteAlphabet,
    Gaussian,
    LowerBound,
    energy_efficiency,
    fa_mutual_info,
    gaussian_rate,
    mmse,
    mmse_inverse,
    rate_lower_bound,
    spectral_efficiency,
    total_rate,
)
from .se_alloc import (
    AllocationResult,
    PowerAllocation,
    effective_budget,
    lower_bound_se_opt,
    mercury_waterfill,
    se_optimize,
    waterfill,
)

__version__ = "0.1.0"

__all__ = [
    "AllocationResult",
    "ChannelState",
    "Constellation",
    "DiffuseParams",
    "DinkelbachState",
    "FeasibleSet",
    "FiniteAlphabet",
    "Gaussian",
    "Geometry",
    "LowerBound",
    "PowerAllocation",
    "QuadratureSpec",
    "SystemParams",
    "ee_maximize",
    "ee_subproblem",
    "effective_budget",
    "energy_efficiency",
    "fa_mutual_info",
    "gaussian_rate",
    "lower_bound_se_opt",
    "make_pam",
    "make_psk",
    "make_qam",
    "mercury_waterfill",
    "mmse",
    "mmse_inverse",
    "project_feasible",
    "rate_lower_bound",
    "se_optimize",
    "spectral_efficiency",
    "subcarrier_gains",
    "reference_channel",
    "total_rate",
    "waterfill",
]
