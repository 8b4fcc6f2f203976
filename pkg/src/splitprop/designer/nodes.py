"""Interpolation node sets and the anchored node stabilization loop.

Nodes are the points where the candidate matches the rotation exactly; the
gap polynomial G = C^2 + S^2 - 1 has double zeros there.  For windows
reaching past pi, stability demands that some nodes sit near the resonances
y = j*pi where |cos| = 1; those are the anchors.  The free nodes are chosen
to minimize the coefficient norm of the node polynomial W(y) = prod (y - y_j),
and the anchors are then relaxed onto the zeros of C' until the node set
stops moving.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Chebyshev
from scipy.optimize import least_squares

from .phase import DesignError, PhasePoly, hermite_interpolant, optimize_phase_at_nodes, trim_candidate

__all__ = ["DesignProblem", "chebyshev_nodes", "stabilize_nodes"]


def chebyshev_nodes(l: int, theta: float) -> np.ndarray:
    """The l Chebyshev points of the first kind scaled to [-theta, theta],
    sorted ascending (exactly symmetric; odd l always contains 0)."""
    if l < 1:
        raise ValueError("need at least one node")
    if theta <= 0:
        raise ValueError("theta must be positive")
    k = np.arange(1, l + 1)
    x = np.sort(theta * np.cos((2 * k - 1) * np.pi / (2 * l)))
    return (x - x[::-1]) / 2.0


@dataclass
class DesignProblem:
    """A design instance: stage count m, window theta, and l symmetric nodes."""

    m: int
    theta: float
    l: int
    nodes: np.ndarray
    phase: PhasePoly | None = field(default=None, compare=False)

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        if self.l % 2 == 0:
            raise ValueError("node count l must be odd")
        if not (self.m + 1 <= self.l <= 2 * self.m):
            raise ValueError(f"need m+1 <= l <= 2m, got l={self.l}, m={self.m}")
        if len(self.nodes) != self.l:
            raise ValueError("node array length must equal l")
        if np.max(np.abs(self.nodes + self.nodes[::-1])) > 1e-9 * max(self.theta, 1.0):
            raise ValueError("nodes must be symmetric about 0")
        if np.max(np.abs(self.nodes)) > self.theta * (1 + 1e-12):
            raise ValueError("nodes must lie inside [-theta, theta]")
        if len(np.unique(self.nodes)) != self.l:
            raise ValueError("nodes must be distinct")


def _anchor_points(theta: float) -> np.ndarray:
    """Resonance anchors {j*pi : |j*pi| <= theta}, always including 0."""
    jmax = int(np.floor(theta / np.pi))
    return np.pi * np.arange(-jmax, jmax + 1, dtype=float)


def _assemble(anchors: np.ndarray, radii: np.ndarray) -> np.ndarray:
    nodes = np.concatenate([anchors, radii, -radii])
    nodes = np.sort(nodes)
    return (nodes - nodes[::-1]) / 2.0


def _w_norm_radii(anchors: np.ndarray, radii0: np.ndarray, theta: float) -> np.ndarray:
    """Free symmetric radii minimizing the Chebyshev-coefficient norm of W."""
    if len(radii0) == 0:
        return radii0

    def residuals(r):
        nodes = np.concatenate([anchors, r, -r])
        return Chebyshev.fromroots(nodes, domain=[-theta, theta]).coef

    lo = 1e-3 * theta / (len(anchors) + 2 * len(radii0))
    res = least_squares(residuals, radii0, bounds=(lo, theta * (1 - 1e-9)),
                        max_nfev=200)
    return np.sort(res.x)


def _initial_radii(anchors: np.ndarray, l: int, theta: float) -> np.ndarray:
    """Positive Chebyshev-node radii farthest from the anchor set."""
    free = l - len(anchors)
    if free <= 0:
        return np.array([])
    candidates = chebyshev_nodes(l, theta)
    candidates = candidates[candidates > 0]
    dist = np.array([np.min(np.abs(anchors - c)) for c in candidates])
    order = np.argsort(-dist)
    return np.sort(candidates[order[: free // 2]])


def stabilize_nodes(problem: DesignProblem, max_iter: int = 50) -> DesignProblem:
    """Iterate anchors onto the zeros of C' while the free nodes minimize
    the norm of W.  Identity below theta < pi, where no resonance anchor
    besides 0 exists and the plain Chebyshev nodes are already optimal."""
    m, theta, l = problem.m, problem.theta, problem.l
    if theta < np.pi:
        return problem

    anchors = _anchor_points(theta)
    if len(anchors) > l:
        raise DesignError(
            f"window holds {len(anchors)} resonance anchors but only l={l} nodes",
            diagnostics={"l": l, "anchors": len(anchors)},
        )

    radii = _initial_radii(anchors, l, theta)
    nodes = _assemble(anchors, radii)
    phase = None
    warm = None
    for iteration in range(max_iter):
        radii = _w_norm_radii(anchors, radii, theta)
        nodes = _assemble(anchors, radii)
        phase = optimize_phase_at_nodes(m, theta, l, nodes,
                                        multi_start=(iteration == 0),
                                        warm_start=warm)
        warm = phase.odd_coef
        cand, _ = trim_candidate(hermite_interpolant(phase, nodes), m)
        dC = cand.even_part().deriv()
        roots = dC.roots()
        roots = np.real(roots[np.abs(roots.imag) < 1e-8 * max(1.0, theta)])
        roots = roots[np.abs(roots) <= theta * (1 + 1e-9)]
        if len(roots) == 0:
            raise DesignError("C' has no zeros inside the window",
                              diagnostics={"l": l, "iteration": iteration})
        new_anchors = np.array([roots[np.argmin(np.abs(roots - a))] for a in anchors])
        new_anchors[np.abs(new_anchors) < 1e-12 * theta] = 0.0
        new_anchors = (new_anchors - new_anchors[::-1]) / 2.0
        if len(np.unique(new_anchors)) != len(anchors):
            new_anchors = anchors  # collision: keep previous anchors
        movement = float(np.max(np.abs(new_anchors - anchors)))
        anchors = new_anchors
        if movement < 1e-10 * theta:
            nodes = _assemble(anchors, radii)
            return DesignProblem(m, theta, l, nodes, phase=phase)

    # Not converged to the strict tolerance; hand back the last iterate so
    # the caller can decide whether it is still usable.
    last = DesignProblem(m, theta, l, _assemble(anchors, radii), phase=phase)
    raise DesignError(
        f"node stabilization did not converge in {max_iter} iterations "
        f"(last movement {movement:.3g})",
        diagnostics={"l": l, "movement": movement},
        last=last,
    )
