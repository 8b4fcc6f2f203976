"""Interior gap repair for stability-floor candidates.

A polynomial pair (C, S) is reachable by a real shear product exactly when
its gap G = C^2 + S^2 - 1 is nonnegative on the whole real line, not just
inside the window: the completion D^2 + E^2 = G needs a real spectral
factor.  Candidates built by windowed interpolation satisfy that only by
accident — their in-window gap is rounding noise of either sign, and beyond
the window the gap routinely dips to O(-1), which quietly moves the target
off the reachable set and turns every downstream fit into a stalled search
against a fold of the coefficient map.

The repair moves the candidate the minimal distance that makes the gap a
strictly positive interior point of the reachable cone:

1. a balanced pass re-fits (C, S) to the rotation while capping |G| inside
   the window and forcing G above a clearance level outside it (tiny
   coefficient changes control the out-window gap because the basis grows
   like cosh there);
2. two minimal-motion rounds lift the in-window gap into a one-sided
   corridor [LIFT_LO, LIFT_HI], re-linearizing between rounds so the
   quadratic term of the gap in the update is fully accounted for.

Both passes are deterministic hinge-penalty least-squares in the candidate's
own Chebyshev coefficient space, with the constant term of C pinned so that
P(0) = 1 survives to rounding accuracy.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial import Chebyshev
from numpy.polynomial import chebyshev as cheb
from scipy.optimize import least_squares

from .phase import CandidateP

__all__ = ["repair_candidate"]

# Symmetric in-window cap for the balanced pass: a few hundred times the
# float64 noise of evaluating G, small enough that sqrt(cap) stays well
# below the window errors these candidates achieve.
_BALANCE_CAP = 4e-13
# One-sided corridor for the lift: the floor keeps the gap strictly inside
# the reachable cone (so the spectral factorization sees no real roots), the
# ceiling bounds the sqrt(gap) contribution to the certified error.
_LIFT_LO = 6e-14
_LIFT_HI = 6e-13
# Required gap clearance outside the window.
_OUT_CLEARANCE = 1e-12
# Weight ladders for the hinge penalties.
_BALANCE_WEIGHTS = ((1e2, 1e2), (1e5, 1e5), (1e8, 1e8), (1e11, 1e10))
_LIFT_WEIGHTS = (1e5, 1e8, 1e11)
_PIN_WEIGHT = 1e8


def _solve(x0, resid, jac):
    sol = least_squares(resid, x0, jac=jac, method="lm",
                        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=400)
    return sol.x


def repair_candidate(cand: CandidateP, m: int) -> CandidateP:
    """Return a copy of `cand` whose gap is strictly positive on the line.

    The output stays within O(cap) of the input inside the window (the
    balanced pass may move further, but only to *reduce* the deviation from
    the rotation), so the model error of the result is honest to recompute.
    """
    theta = cand.theta
    nc = ns = m + 1
    coef = np.array(cand.series.coef, dtype=float).copy()
    coef = np.pad(coef, (0, max(0, 2 * m + 2 - len(coef))))[: 2 * m + 2]

    def basis(y):
        V = cheb.chebvander(np.asarray(y) / theta, 2 * m + 1)
        return V[:, 0: 2 * m + 1: 2], V[:, 1: 2 * m + 2: 2]

    yw = np.linspace(-theta, theta, 801)
    Bc_w, Bs_w = basis(yw)
    A_obj = np.block([
        [Bc_w, np.zeros((yw.size, ns))],
        [np.zeros((yw.size, nc)), Bs_w],
    ])
    yo = np.linspace(1.002 * theta, 2.4 * theta, 701)
    Bc_o, Bs_o = basis(yo)
    # C(0) = 1 pin: the alternating sum of even coefficients.
    pin = np.concatenate([(-1.0) ** np.arange(nc), np.zeros(ns)])

    def fields():
        cw = Bc_w @ coef[0::2]
        sw = Bs_w @ coef[1::2]
        gw = cw * cw + sw * sw - 1.0
        A_gin = np.hstack([2.0 * cw[:, None] * Bc_w, 2.0 * sw[:, None] * Bs_w])
        co = Bc_o @ coef[0::2]
        so = Bs_o @ coef[1::2]
        go = co * co + so * so - 1.0
        A_go = np.hstack([2.0 * co[:, None] * Bc_o, 2.0 * so[:, None] * Bs_o])
        # Out-window rows span many orders of magnitude; normalize each so
        # the hinge weights mean the same thing across the range.
        row = np.maximum(1.0, np.abs(A_go).max(axis=1))
        return cw, sw, gw, A_gin, go / row, A_go / row[:, None], row

    def apply(x):
        coef[0: 2 * m + 1: 2] += x[:nc]
        coef[1: 2 * m + 2: 2] += x[nc:]

    # ---- balanced pass -----------------------------------------------------
    cw, sw, gw, A_gin, go_s, A_go_s, row = fields()
    r0 = np.concatenate([cw - np.cos(yw), sw - np.sin(yw)])
    out_floor = _OUT_CLEARANCE / row

    def make_balance(w_in, w_out):
        def resid(x):
            qi = gw + A_gin @ x
            qo = go_s + A_go_s @ x
            return np.concatenate([
                r0 + A_obj @ x,
                w_in * np.maximum(np.abs(qi) - _BALANCE_CAP, 0.0),
                w_out * np.maximum(out_floor - qo, 0.0),
                [_PIN_WEIGHT * (pin @ x)],
            ])

        def jac(x):
            qi = gw + A_gin @ x
            qo = go_s + A_go_s @ x
            J_in = w_in * np.sign(qi)[:, None] * A_gin
            J_in[np.abs(qi) <= _BALANCE_CAP] = 0.0
            J_out = -w_out * A_go_s.copy()
            J_out[qo >= out_floor] = 0.0
            return np.vstack([A_obj, J_in, J_out, _PIN_WEIGHT * pin[None, :]])

        return resid, jac

    x = np.zeros(nc + ns)
    for w_in, w_out in _BALANCE_WEIGHTS:
        resid, jac = make_balance(w_in, w_out)
        x = _solve(x, resid, jac)
    apply(x)

    # ---- minimal-motion lift (re-linearized) -------------------------------
    for _ in range(2):
        cw, sw, gw, A_gin, go_s, A_go_s, row = fields()
        out_floor = _LIFT_LO / row

        def make_lift(w_h):
            def resid(x):
                qi = gw + A_gin @ x
                qo = go_s + A_go_s @ x
                return np.concatenate([
                    A_obj @ x,
                    w_h * np.maximum(_LIFT_LO - qi, 0.0),
                    w_h * np.maximum(qi - _LIFT_HI, 0.0),
                    w_h * np.maximum(out_floor - qo, 0.0),
                    [_PIN_WEIGHT * (pin @ x)],
                ])

            def jac(x):
                qi = gw + A_gin @ x
                qo = go_s + A_go_s @ x
                J_lo = -w_h * A_gin.copy()
                J_lo[qi >= _LIFT_LO] = 0.0
                J_hi = w_h * A_gin.copy()
                J_hi[qi <= _LIFT_HI] = 0.0
                J_out = -w_h * A_go_s.copy()
                J_out[qo >= out_floor] = 0.0
                return np.vstack([A_obj, J_lo, J_hi, J_out,
                                  _PIN_WEIGHT * pin[None, :]])

            return resid, jac

        x = np.zeros(nc + ns)
        for w_h in _LIFT_WEIGHTS:
            resid, jac = make_lift(w_h)
            x = _solve(x, resid, jac)
        apply(x)

    return CandidateP(series=Chebyshev(coef, domain=[-theta, theta]),
                      theta=theta, nodes=cand.nodes, phase=cand.phase)
