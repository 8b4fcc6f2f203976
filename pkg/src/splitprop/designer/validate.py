"""Candidate validation: gap factorization G = V * W^2 and error functionals.

A trimmed candidate P = C + S of degree 2m+1 is admissible when the gap
G = C^2 + S^2 - 1 is a nonnegative multiple of the squared node polynomial
(so a shear completion with real coefficients exists) and |C| <= 1 across
the window (so every step inside the window is stable).  The report also
carries the window error functionals evaluated directly from the (C, S)
callables, using the same machinery that certifies catalog entries.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from numpy.polynomial import Chebyshev
from numpy.polynomial import chebyshev as cheb

from ..analysis import (
    _delta_from_cs,
    _epsilon_from_cs,
    _mu_nu_from_cs,
    _stability_from_cs,
)
from .phase import CandidateP, DesignError

__all__ = ["ValidationReport", "validate_candidate", "InconsistentCandidateError",
           "GAP_FLOOR"]

# Relative size (against the squared candidate coefficient scale) below which
# the gap polynomial is unresolvable in float64: its coefficients are then
# dominated by the rounding noise of forming C^2 + S^2 - 1, so divisibility
# and root structure carry no information -- and none is needed, because a
# completion with sub-noise inconsistency always exists for such candidates.
GAP_FLOOR = 1e-6


class InconsistentCandidateError(DesignError):
    """The gap polynomial does not contain the node polynomial squared."""


@dataclass(frozen=True)
class ValidationReport:
    stable: bool
    v_nonneg: bool
    deflation_residual: float
    v_min: float
    y_star: float
    eps: float
    mu: float
    nu: float
    delta: float
    gap_floor: bool = False

    @property
    def passed(self) -> bool:
        return self.stable and self.v_nonneg


def validate_candidate(P: CandidateP, m: int, theta: float) -> ValidationReport:
    if P.nodes is None:
        raise ValueError("validation needs the interpolation nodes on the candidate")
    if P.degree != 2 * m + 1:
        raise ValueError(f"candidate degree {P.degree} != 2m+1 = {2 * m + 1}")

    C = P.even_part()
    S = P.odd_part()
    G = C * C + S * S - 1.0

    gscale = float(np.linalg.norm(G.coef))
    pscale = max(
        1.0,
        float(np.linalg.norm(C.coef)) ** 2 + float(np.linalg.norm(S.coef)) ** 2,
    )
    gap_floor = gscale <= GAP_FLOOR * pscale

    if gap_floor:
        # The candidate matches the rotation so closely that G is rounding
        # noise; divisibility by W^2 and global nonnegativity are then both
        # unverifiable and unnecessary (see GAP_FLOOR).
        residual = 0.0
        v_min = 0.0
        v_nonneg = True
    else:
        W = Chebyshev.fromroots(P.nodes, domain=[-theta, theta])
        W2 = W * W
        quo, rem = cheb.chebdiv(G.coef, W2.coef)
        residual = float(np.linalg.norm(rem) / gscale) if gscale > 0 else 0.0
        if residual > 1e-8:
            raise InconsistentCandidateError(
                f"gap deflation residual {residual:.3g} exceeds 1e-8: the nodes "
                "are not double zeros of the gap",
                diagnostics={"residual": residual},
            )

        V = Chebyshev(quo, domain=[-theta, theta])
        grid = np.linspace(0.0, 2.0 * theta, 4097)
        vvals = V(grid)
        vscale = max(float(np.max(np.abs(vvals))), 1e-300)
        v_min = float(np.min(vvals))
        v_nonneg = (v_min >= -1e-10 * vscale) and (quo[-1] > 0)

        # The completion D^2 + E^2 = G needs G >= 0 on the whole real line,
        # not just the sampled window: a sign change anywhere blocks every
        # real completion.  V is even, so test it in the s = y^2 variable out
        # to a bound covering all of its real roots; beyond that the positive
        # leading coefficient rules.
        if v_nonneg:
            vtilde = np.array(quo[0::2], dtype=float)
            if vtilde.size > 1:
                vroots = theta * theta * (cheb.chebroots(vtilde) + 1.0) / 2.0
                s_max = max(
                    4.0 * theta * theta,
                    2.0 * float(np.max(vroots.real, initial=0.0)),
                )
                s_grid = np.linspace(0.0, s_max, 2049)
                far_vals = cheb.chebval(2.0 * s_grid / (theta * theta) - 1.0, vtilde)
                far_scale = max(float(np.linalg.norm(vtilde, 1)), 1e-300)
                if float(np.min(far_vals)) < -1e-9 * far_scale:
                    v_nonneg = False
                    v_min = min(v_min, float(np.min(far_vals)))

    cs_vec = P.cs_vec
    window = np.linspace(-theta, theta, 4097)
    cvals, _ = cs_vec(window)
    inside = float(np.max(np.abs(cvals))) <= 1.0 + 1e-10

    y_star = _stability_from_cs(cs_vec, cap=2.0 * m, m=m)
    stable = inside and (y_star >= theta * (1.0 - 1e-12))

    eps = _epsilon_from_cs(cs_vec, theta, m)
    delta = _delta_from_cs(cs_vec, theta, m)
    if stable:
        mu, nu = _mu_nu_from_cs(cs_vec, theta, m)
    else:
        mu, nu = math.nan, math.nan

    return ValidationReport(
        stable=stable,
        v_nonneg=v_nonneg,
        deflation_residual=residual,
        v_min=v_min,
        y_star=y_star,
        eps=eps,
        mu=mu,
        nu=nu,
        delta=delta,
        gap_floor=gap_floor,
    )
