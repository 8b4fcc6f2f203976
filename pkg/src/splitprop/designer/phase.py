"""Phase polynomial, Hermite interpolation, and the constrained phase fit.

A candidate method is encoded by a polynomial P(y) = C(y) + S(y) of degree
2m+1 (C even, S odd) that Hermite-interpolates the rotated frame function
f(y) = cos(y + e(y)) + sin(y + e(y)) at l symmetric nodes.  The odd phase
perturbation e is the designer's only continuous degree of freedom: it is
chosen with the smallest coefficient norm such that the degree-(2l-1)
interpolant actually has degree 2m+1, i.e. its 2(l-m)-2 leading Chebyshev
coefficients vanish.

All polynomial work stays in the Chebyshev basis on [-theta, theta]
(monomial conversion is hopeless at the degrees involved).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Chebyshev
from numpy.polynomial import chebyshev as cheb
from scipy.optimize import least_squares

__all__ = [
    "DesignError",
    "PhasePoly",
    "CandidateP",
    "hermite_interpolant",
    "optimize_phase_at_nodes",
    "trim_candidate",
]


class DesignError(RuntimeError):
    """A designer stage failed; per-stage diagnostics attached."""

    def __init__(self, message: str, diagnostics: dict | None = None, last=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
        self.last = last  # best/last iterate, when one exists


@dataclass(frozen=True)
class PhasePoly:
    """Odd phase perturbation e(y) = sum_j odd_coef[j] T_{2j+1}(y/theta)."""

    theta: float
    odd_coef: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "odd_coef", np.asarray(self.odd_coef, dtype=float))

    def series(self) -> Chebyshev:
        n = 2 * len(self.odd_coef)
        coef = np.zeros(max(n, 2))
        coef[1:n:2] = self.odd_coef
        return Chebyshev(coef, domain=[-self.theta, self.theta])

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.odd_coef**2)))


@dataclass
class CandidateP:
    """P of degree <= 2l-1 (2m+1 after trimming) in the Chebyshev basis."""

    series: Chebyshev
    theta: float
    nodes: np.ndarray | None = None
    phase: PhasePoly | None = None

    @property
    def degree(self) -> int:
        return len(self.series.coef) - 1

    def even_part(self) -> Chebyshev:
        c = self.series.coef.copy()
        c[1::2] = 0.0
        return Chebyshev(c, domain=self.series.domain)

    def odd_part(self) -> Chebyshev:
        c = self.series.coef.copy()
        c[0::2] = 0.0
        return Chebyshev(c, domain=self.series.domain)

    def cs_vec(self, y):
        """(C(y), S(y)) for array y — the analysis functionals plug in here."""
        C = self.even_part()
        S = self.odd_part()
        return C(y), S(y)


def _phase_funcs(e: PhasePoly):
    es = e.series()
    eder = es.deriv()

    def f(y):
        w = y + es(y)
        return np.cos(w) + np.sin(w)

    def fp(y):
        w = y + es(y)
        return (1.0 + eder(y)) * (np.cos(w) - np.sin(w))

    return f, fp


def hermite_interpolant(e: PhasePoly, nodes) -> CandidateP:
    """Degree-(2l-1) polynomial matching f and f' at every node, where
    f(y) = cos(y+e(y)) + sin(y+e(y))."""
    nodes = np.asarray(nodes, dtype=float)
    l = len(nodes)
    if len(np.unique(nodes)) != l:
        raise ValueError("node collision in Hermite interpolation")
    theta = e.theta
    deg = 2 * l - 1
    u = nodes / theta
    V = cheb.chebvander(u, deg)
    D = np.empty_like(V)
    eye = np.eye(deg + 1)
    for k in range(deg + 1):
        D[:, k] = cheb.chebval(u, cheb.chebder(eye[k])) / theta
    A = np.vstack([V, D])
    f, fp = _phase_funcs(e)
    rhs = np.concatenate([f(nodes), fp(nodes)])
    coef, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    return CandidateP(series=Chebyshev(coef, domain=[-theta, theta]),
                      theta=theta, nodes=nodes, phase=e)


def trim_candidate(P: CandidateP, m: int) -> tuple[CandidateP, float]:
    """Drop coefficients above degree 2m+1 and re-pin P(0) = 1.

    Returns the trimmed candidate and the relative mass of the dropped tail
    (tiny when the phase constraints hold)."""
    coef = np.array(P.series.coef, dtype=float)
    if len(coef) < 2 * m + 2:
        coef = np.pad(coef, (0, 2 * m + 2 - len(coef)))
    head, tail = coef[: 2 * m + 2], coef[2 * m + 2 :]
    scale = np.max(np.abs(head))
    tail_mass = float(np.linalg.norm(tail) / scale) if scale > 0 else 0.0
    head = head.copy()
    head[0] += 1.0 - cheb.chebval(0.0, head)
    return (
        CandidateP(series=Chebyshev(head, domain=[-P.theta, P.theta]),
                   theta=P.theta, nodes=P.nodes, phase=P.phase),
        tail_mass,
    )


# ---------------------------------------------------------------------------
# constrained phase optimization at a fixed node set

def _tail_residual(x: np.ndarray, m: int, theta: float, nodes: np.ndarray) -> np.ndarray:
    """Leading Chebyshev coefficients (indices 2m+2 .. 2l-1) of the Hermite
    interpolant, scaled by the largest retained coefficient."""
    P = hermite_interpolant(PhasePoly(theta, x), nodes)
    coef = P.series.coef
    keep = coef[: 2 * m + 2]
    scale = max(float(np.max(np.abs(keep))), 1e-300)
    return np.asarray(coef[2 * m + 2 :] / scale, dtype=float)


def _project_onto_constraints(x, m, theta, nodes, tol=1e-12, budget=30):
    """Gauss-Newton least-norm steps driving the tail residual to zero."""
    x = np.array(x, dtype=float)
    resid = _tail_residual(x, m, theta, nodes)
    for _ in range(budget):
        worst = float(np.max(np.abs(resid))) if resid.size else 0.0
        if worst <= tol:
            break
        J = np.empty((len(resid), len(x)))
        for k in range(len(x)):
            h = 1e-7 * max(1.0, abs(x[k]))
            xp = x.copy()
            xp[k] += h
            J[:, k] = (_tail_residual(xp, m, theta, nodes) - resid) / h
        step, *_ = np.linalg.lstsq(J, -resid, rcond=None)
        x = x + step
        resid = _tail_residual(x, m, theta, nodes)
    return x, (float(np.max(np.abs(resid))) if resid.size else 0.0)


def optimize_phase_at_nodes(m: int, theta: float, l: int, nodes,
                            multi_start: bool = True,
                            warm_start: np.ndarray | None = None) -> PhasePoly:
    """Smallest-norm phase polynomial whose Hermite interpolant at `nodes`
    has degree exactly 2m+1.

    Quadratic-penalty continuation followed by constraint projection; with
    multi_start, tries e = 0 plus two seeded random perturbations and keeps
    the feasible result with the smallest norm.
    """
    nodes = np.asarray(nodes, dtype=float)
    n_par = (l - 1) // 2
    n_con = 2 * (l - m) - 2
    if n_con <= 0:
        return PhasePoly(theta, np.zeros(n_par))

    starts = []
    if warm_start is not None and len(warm_start) == n_par:
        starts.append(np.asarray(warm_start, dtype=float))
    starts.append(np.zeros(n_par))
    if multi_start:
        rng = np.random.default_rng(97 + 1000 * m + l)
        starts.append(rng.normal(scale=1e-2, size=n_par))
        starts.append(rng.normal(scale=1e-2, size=n_par))

    best = None
    best_infeasible = (np.inf, None)
    for x0 in starts:
        x = np.array(x0, dtype=float)
        for w in (1e4, 1e8, 1e12):
            sw = np.sqrt(w)

            def packed(z, _sw=sw):
                return np.concatenate([z, _sw * _tail_residual(z, m, theta, nodes)])

            res = least_squares(packed, x, method="lm", max_nfev=500)
            x = res.x
        x, resid = _project_onto_constraints(x, m, theta, nodes)
        if resid <= 1e-12:
            norm = float(np.linalg.norm(x))
            if best is None or norm < best[0]:
                best = (norm, x)
        elif resid < best_infeasible[0]:
            best_infeasible = (resid, x)

    if best is None:
        raise DesignError(
            f"phase optimization failed at l={l}: best constraint residual "
            f"{best_infeasible[0]:.3g}",
            diagnostics={"l": l, "residual": best_infeasible[0]},
            last=PhasePoly(theta, best_infeasible[1]) if best_infeasible[1] is not None else None,
        )
    return PhasePoly(theta, best[1])
