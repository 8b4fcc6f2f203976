"""splitprop: symplectic splitting propagators for exp(-itH) u0.

Approximates the unitary evolution of large real-symmetric Hamiltonians
with certified-error splitting methods (plus Chebyshev and Taylor
baselines), an error-functional analysis engine, a method catalog with an
automatic plan selector, and a coefficient designer for new windows.
"""

from .analysis import (
    BoundValidityError,
    MethodErrorProfile,
    StabilityDomainError,
    StabilityMatrix,
    chebyshev_bound,
    crossover_theta,
    delta_sup,
    epsilon_sup,
    error_trace,
    k_matrix,
    method_profile,
    min_degree,
    mu_nu,
    nstep_bound,
    stability_threshold,
    taylor_bound,
)
from .catalog import (
    Catalog,
    CatalogError,
    MethodRecord,
    SelectionError,
    SelectionPlan,
    bundled_catalog,
    load_catalog,
    plan_cost,
    record_to_dict,
    save_catalog,
    select_method,
    strang_sequence,
)
from .core import (
    SpectralShift,
    WaveState,
    restore_phase,
    spectral_shift,
)
from .designer import DesignError, design_method, split_factorization
from .hamiltonians import (
    FourierCollocation1D,
    PoschlTellerPotential,
    TridiagonalLaplacian,
    gaussian_state,
    spectral_bounds,
)
from .propagators import (
    PropagationPlan,
    SplitCoefficients,
    chebyshev_propagate,
    execute_plan,
    splitting_step,
    taylor_propagate,
)

__version__ = "0.1.0"

__all__ = [
    "BoundValidityError",
    "Catalog",
    "CatalogError",
    "DesignError",
    "FourierCollocation1D",
    "MethodErrorProfile",
    "MethodRecord",
    "PoschlTellerPotential",
    "PropagationPlan",
    "SelectionError",
    "SelectionPlan",
    "SpectralShift",
    "SplitCoefficients",
    "StabilityDomainError",
    "StabilityMatrix",
    "TridiagonalLaplacian",
    "WaveState",
    "bundled_catalog",
    "chebyshev_bound",
    "chebyshev_propagate",
    "crossover_theta",
    "delta_sup",
    "design_method",
    "epsilon_sup",
    "error_trace",
    "execute_plan",
    "gaussian_state",
    "k_matrix",
    "load_catalog",
    "method_profile",
    "min_degree",
    "mu_nu",
    "nstep_bound",
    "plan_cost",
    "record_to_dict",
    "restore_phase",
    "save_catalog",
    "select_method",
    "spectral_bounds",
    "spectral_shift",
    "split_factorization",
    "splitting_step",
    "stability_threshold",
    "strang_sequence",
    "taylor_bound",
    "taylor_propagate",
    "__version__",
]
