"""Coefficient designer: build new splitting methods certified on a window.

The pipeline mirrors how the bundled high-stage methods were constructed:
pick symmetric interpolation nodes (anchored at the resonances y = j*pi for
wide windows), fit the smallest odd phase perturbation that makes the
Hermite interpolant of the rotated frame function collapse to degree 2m+1,
validate that the gap C^2 + S^2 - 1 admits a real shear completion, and
factor the completed stability matrix into shear coefficients.
"""

from .design import design_method, optimize_phase
from .factor import FactorizationError, candidate_from_coefficients, split_factorization
from .nodes import DesignProblem, chebyshev_nodes, stabilize_nodes
from .phase import CandidateP, DesignError, PhasePoly, hermite_interpolant, trim_candidate
from .validate import InconsistentCandidateError, ValidationReport, validate_candidate

__all__ = [
    "CandidateP",
    "DesignError",
    "DesignProblem",
    "FactorizationError",
    "InconsistentCandidateError",
    "PhasePoly",
    "ValidationReport",
    "candidate_from_coefficients",
    "chebyshev_nodes",
    "design_method",
    "hermite_interpolant",
    "optimize_phase",
    "split_factorization",
    "stabilize_nodes",
    "trim_candidate",
    "validate_candidate",
]
