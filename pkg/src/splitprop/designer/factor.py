"""Shear factorization: from (C, S) back to splitting coefficients.

The completion K = [[C+D, S+E], [E-S, C-D]] is a valid stability matrix for
any real D (even) and E (odd) with D^2 + E^2 = G = C^2 + S^2 - 1, and every
such K with the right degree pattern peels into an alternating product of
shear maps U(a) = [[1, a y], [0, 1]] and L(b) = [[1, 0], [-b y, 1]].

D and E come from a spectral factorization of the gap: with Q = D + iE,
Q(y) Q(-y) = G(y), so Q collects one member of every +/- pair of roots of
G, subject to the closure rho -> -conj(rho) that keeps D and E real.  G is
even, so its roots are found through the substitution s = y^2: the even
Chebyshev coefficients of G are exactly the coefficients of a half-degree
series whose roots give s directly.  Root selection branches (sign choices
for imaginary roots, two orientations per conjugate quadruple); every branch
is peeled and validated against the input by a dense roundtrip, and the
passing branch with the smallest coefficient l1 norm wins.  Peels that land
near a solution but lose digits to elimination growth are refined by a
Gauss-Newton fit against the sampled (C, S) before the roundtrip verdict.

Candidates whose gap sits at the float64 rounding floor get a dedicated
route: when the (repaired) gap is strictly positive, its roots are all
complex and the spectral factor is built directly from the upper-half-plane
root set, after which the peel runs as usual and a square Newton solve on
the interpolated (C, S) coefficients removes the elimination drift.  Gaps at
the floor that fail any gate of that route fall back to a value fit by
continuation in the window size.

Everything stays in the Chebyshev basis on [-theta, theta]; monomial
conversion is forbidden at these degrees.
"""

from __future__ import annotations

import itertools

import numpy as np
from numpy.polynomial import Chebyshev
from numpy.polynomial import chebyshev as cheb
from scipy.optimize import least_squares

from ..analysis import _cs_arrays
from ..propagators import SplitCoefficients
from .phase import CandidateP, DesignError
from .validate import GAP_FLOOR

__all__ = ["FactorizationError", "split_factorization", "candidate_from_coefficients"]

_BRANCH_CAP = 2**14
_ROUNDTRIP_TOL = 1e-9
_POLISH_WINDOW = 1e-3
_POLISH_CAP = 16
# Weight of the gap rows in the floor-regime value fit (see _polish_sequence).
_GAP_WEIGHT = 100.0


class FactorizationError(DesignError):
    """No root-selection branch produced a consistent shear sequence."""


def candidate_from_coefficients(c: SplitCoefficients, theta: float) -> CandidateP:
    """Exact Chebyshev representation of P = C + S for a shear sequence,
    by interpolation at 2m+2 points (exact for degree 2m+1)."""

    def pfun(u):
        cv, sv = _cs_arrays(c, theta * np.asarray(u))
        return cv + sv

    coef = cheb.chebinterpolate(pfun, 2 * c.m + 1)
    return CandidateP(series=Chebyshev(coef, domain=[-theta, theta]), theta=theta)


# ---------------------------------------------------------------------------
# root classification

def _polish_roots(v_roots, gtilde):
    """Newton steps in the half-angle variable; keep a step only when it
    reduces |g|.  Simple roots sharpen to machine accuracy, multiple roots
    stay where the eigenvalue solver put them."""
    dg = cheb.chebder(gtilde)
    roots = np.array(v_roots, dtype=complex)
    for _ in range(3):
        val = cheb.chebval(roots, gtilde)
        der = cheb.chebval(roots, dg)
        safe = np.abs(der) > 0
        step = np.zeros_like(roots)
        step[safe] = val[safe] / der[safe]
        trial = roots - step
        better = np.abs(cheb.chebval(trial, gtilde)) < np.abs(val)
        roots = np.where(better, trial, roots)
    return roots


def _groupings(s_roots, theta):
    """Yield (zero, neg, pairs) classifications of the s = y^2 roots.

    The multiplicity of the origin root is not readable from the computed
    roots alone (multiple roots split under coefficient noise by far more
    than simple-root accuracy), so every plausible origin cluster size is
    tried, largest first; the dense roundtrip check downstream arbitrates.
    Negative real roots give imaginary y pairs; everything else must join
    into conjugate-ish pairs (leftovers invalidate the grouping)."""
    scale = theta * theta
    order = np.argsort(np.abs(s_roots))
    s_sorted = [s_roots[i] for i in order]
    k_cap = sum(1 for s in s_sorted if abs(s) <= 1e-3 * scale)
    for k in range(k_cap, -1, -1):
        zero = s_sorted[:k]
        neg, rest = [], []
        for s in s_sorted[k:]:
            if s.real < 0 and abs(s.imag) <= 1e-6 * abs(s):
                neg.append(s)
            else:
                rest.append(s)
        pairs = []
        while len(rest) >= 2:
            i = int(np.argmax([abs(s.imag) for s in rest]))
            r = rest.pop(i)
            j = int(np.argmin([abs(s - np.conj(r)) for s in rest]))
            pairs.append((r, rest.pop(j)))
        if rest:
            continue
        yield zero, neg, pairs


def _branch_roots(zero, neg, pairs, choices):
    """Assemble the y-root multiset of Q for one vector of binary choices."""
    roots = [0.0j] * len(zero)
    k = 0
    for s in neg:
        rho = 1j * np.sqrt(-s.real)
        roots.append(rho if choices[k] == 0 else -rho)
        k += 1
    for s1, s2 in pairs:
        r1, r2 = np.sqrt(s1), np.sqrt(s2)
        if choices[k] == 0:
            roots.extend([r1, -r2])
        else:
            roots.extend([-r1, r2])
        k += 1
    return roots


# ---------------------------------------------------------------------------
# shear peeling in the Chebyshev basis

def _mulx(coefs: np.ndarray, theta: float) -> np.ndarray:
    """Coefficients of y * f(y) for f given on [-theta, theta]."""
    return theta * cheb.chebmulx(coefs)


def _trim(coefs: np.ndarray, deg: int, parity: int) -> np.ndarray:
    """Force a series to degree `deg` with the given index parity
    (0 = even entries only, 1 = odd).  deg < 0 means the zero series."""
    if deg < 0:
        return np.zeros(1)
    out = np.zeros(deg + 1)
    n = min(len(coefs), deg + 1)
    out[:n] = coefs[:n]
    out[(1 - parity)::2] = 0.0
    return out


def _sub(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    n = max(len(x), len(y))
    out = np.zeros(n)
    out[: len(x)] += x
    out[: len(y)] -= y
    return out


def _add(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    n = max(len(x), len(y))
    out = np.zeros(n)
    out[: len(x)] += x
    out[: len(y)] += y
    return out


def _peel(K11, K12, K21, K22, m: int, theta: float):
    """Strip U(a_{m+1}) L(b_m) ... U(a_1) off a polynomial stability matrix.
    Returns (a, b) in application order, or None when a pivot degenerates."""
    kscale = max(
        1.0,
        float(np.max(np.abs(K11))),
        float(np.max(np.abs(K12))),
        float(np.max(np.abs(K21))),
        float(np.max(np.abs(K22))),
    )
    a_rev, b_rev = [], []
    for j in range(m, 0, -1):
        yk22 = _mulx(K22, theta)
        lead = yk22[2 * j + 1]
        if not np.isfinite(lead) or abs(lead) < 1e-300:
            return None
        a = K12[2 * j + 1] / lead
        K11 = _trim(_sub(K11, a * _mulx(K21, theta)), 2 * j - 2, 0)
        K12 = _trim(_sub(K12, a * yk22), 2 * j - 1, 1)
        yk11 = _mulx(K11, theta)
        lead = yk11[2 * j - 1]
        if not np.isfinite(lead) or abs(lead) < 1e-300:
            return None
        b = -K21[2 * j - 1] / lead
        K21 = _trim(_add(K21, b * yk11), 2 * j - 3, 1)
        K22 = _trim(_add(K22, b * _mulx(K12, theta)), 2 * j - 2, 0)
        a_rev.append(a)
        b_rev.append(b)
    if abs(K22[0]) < 1e-300 or not np.isfinite(K22[0]):
        return None
    a1 = K12[1] / (theta * K22[0]) if len(K12) > 1 else 0.0
    closure = max(abs(K11[0] - 1.0), abs(K22[0] - 1.0), float(np.max(np.abs(K21))))
    # The elimination loses accuracy in proportion to the dynamic range of the
    # input entries, so the closure defect scales with them too.  This gate
    # only sheds branches that exploded outright; the dense roundtrip (plus
    # refinement) downstream is the real arbiter.
    if not np.isfinite(a1) or closure > 1e-2 * kscale:
        return None
    a = [a1] + list(reversed(a_rev))
    b = list(reversed(b_rev))
    return a, b


# ---------------------------------------------------------------------------
# floor-regime completion: spectral factor of a strictly positive gap

def _leja(points):
    """Order points for numerically stable sequential products."""
    pts = list(points)
    out = [max(pts, key=abs)]
    pts.remove(out[0])
    while pts:
        nxt = max(pts, key=lambda s: np.prod([abs(s - t) for t in out]))
        pts.remove(nxt)
        out.append(nxt)
    return out


def _complete_floor_gap(gcoef, s_lead, m):
    """D, E with D^2 + E^2 = G for a gap that is positive on the line.

    Works on the raw degree-(4m+2) series: a strictly positive G has no
    real roots, its complex roots split evenly across the real axis, and
    the closure rho -> -conj(rho) of the upper-half-plane set is automatic
    for an even real polynomial.  Q = i kappa prod(u - rho) over that set
    gives G = |Q|^2 on the real line; D and E are its real and imaginary
    coefficient parts.  Returns None when the root pattern or the rebuilt
    product says the gap was not actually positive definite.
    """
    deg = len(gcoef) - 1
    if deg != 4 * m + 2 or not gcoef[-1] > 0.0:
        return None
    roots = cheb.chebroots(gcoef)
    upper = [r for r in roots if r.imag > 0.0]
    if len(upper) != 2 * m + 1:
        return None
    h = np.array([1j * np.sqrt(gcoef[-1] * 2.0 ** (deg - 1))], dtype=complex)
    for r in _leja(upper):
        h = cheb.chebsub(cheb.chebmulx(h), r * h)
    D = np.real(h).copy()
    E = np.imag(h).copy()
    D[1::2] = 0.0
    E[0::2] = 0.0
    chk = cheb.chebadd(cheb.chebmul(D, D), cheb.chebmul(E, E))
    n = max(len(chk), len(gcoef))
    resid = float(np.max(np.abs(
        np.pad(chk, (0, n - len(chk))) - np.pad(gcoef, (0, n - len(gcoef))))))
    if resid > 1e-6 * max(float(np.max(np.abs(gcoef))), 1e-300):
        return None
    if E[-1] * s_lead < 0.0:
        E = -E  # conjugate root choice: flips E, keeps D
    if abs(E[-1] - s_lead) > 1e-3 * abs(s_lead):
        return None
    return D, E


def _newton_refine(a, b, C, S, m, theta, proxy_grid):
    """Square Newton solve driving the sequence's interpolated (C, S)
    coefficients onto the candidate's, from a peel that already sits in the
    quadratic basin.  The 2(2m+2) coefficient equations over 2m+1 shear
    coefficients are consistent up to the candidate's distance from the
    reachable set (the P(0) = 1 slice is covered by the product map), so
    the least-squares Newton step contracts at full length; a backtracking
    guard and a certified-error keep gate protect against the fold that
    appears when the gap touches zero."""
    m_len = m + 1
    deg = 2 * m + 1
    n_nodes = deg + 1
    u = np.cos(np.pi * (2.0 * np.arange(n_nodes) + 1.0) / (2.0 * n_nodes))
    yk = theta * u
    Vinv = np.linalg.inv(cheb.chebvander(u, deg))
    target = np.concatenate([Vinv @ C(yk), Vinv @ S(yk)])
    cos_g, sin_g = np.cos(proxy_grid), np.sin(proxy_grid)

    def f_j(x):
        fs, cols = [], []
        for j in range(m_len - 1, 0, -1):
            U = np.zeros((n_nodes, 2, 2))
            U[:, 0, 0] = 1.0
            U[:, 1, 1] = 1.0
            U[:, 0, 1] = x[j] * yk
            fs.append(U)
            cols.append(j)
            L = np.zeros((n_nodes, 2, 2))
            L[:, 0, 0] = 1.0
            L[:, 1, 1] = 1.0
            L[:, 1, 0] = -x[m_len + j - 1] * yk
            fs.append(L)
            cols.append(m_len + j - 1)
        U = np.zeros((n_nodes, 2, 2))
        U[:, 0, 0] = 1.0
        U[:, 1, 1] = 1.0
        U[:, 0, 1] = x[0] * yk
        fs.append(U)
        cols.append(0)
        n = len(fs)
        pre = [np.broadcast_to(np.eye(2), (n_nodes, 2, 2))]
        for i in range(n):
            pre.append(pre[i] @ fs[i])
        suf = [None] * (n + 1)
        suf[n] = np.broadcast_to(np.eye(2), (n_nodes, 2, 2))
        for i in range(n - 1, -1, -1):
            suf[i] = fs[i] @ suf[i + 1]
        K = pre[n]
        cv = (K[:, 0, 0] + K[:, 1, 1]) / 2.0
        sv = (K[:, 0, 1] - K[:, 1, 0]) / 2.0
        J = np.zeros((2 * n_nodes, 2 * m_len - 1))
        for i, col in enumerate(cols):
            dF = np.zeros((n_nodes, 2, 2))
            if col < m_len:
                dF[:, 0, 1] = yk
            else:
                dF[:, 1, 0] = -yk
            dK = pre[i] @ dF @ suf[i + 1]
            J[:n_nodes, col] = Vinv @ ((dK[:, 0, 0] + dK[:, 1, 1]) / 2.0)
            J[n_nodes:, col] = Vinv @ ((dK[:, 0, 1] - dK[:, 1, 0]) / 2.0)
        F = np.concatenate([Vinv @ cv, Vinv @ sv]) - target
        return F, J

    def proxy(x):
        cv, sv = _cs_arrays(
            SplitCoefficients(tuple(x[:m_len]), tuple(x[m_len:])), proxy_grid)
        gap = cv * cv + sv * sv - 1.0
        return float(np.max(np.hypot(cv - cos_g, sv - sin_g)
                            + np.sqrt(np.maximum(gap, 0.0))))

    x = np.concatenate([a, b])
    best_p, best_x = proxy(x), x.copy()
    for _ in range(6):
        F, J = f_j(x)
        try:
            step = np.linalg.lstsq(J, -F, rcond=1e-12)[0]
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)):
            break
        nrm = float(np.linalg.norm(F))
        t, moved = 1.0, False
        for _ in range(25):
            xt = x + t * step
            if float(np.linalg.norm(f_j(xt)[0])) < nrm:
                x, moved = xt, True
                break
            t *= 0.5
        if not moved:
            break
        p = proxy(x)
        if p < best_p:
            best_p, best_x = p, x.copy()
    return best_x[:m_len], best_x[m_len:]


# ---------------------------------------------------------------------------
# coefficient refinement

def _polish_sequence(a, b, theta, ys, c_in, s_in, ref_scale, max_nfev=60,
                     gap_weight=0.0):
    """Gauss-Newton refinement of shear coefficients against the input
    (C, S) values; returns (a, b, max abs residual).  The peel is a
    sequential elimination whose error grows with the dynamic range of the
    stability-matrix entries; refitting the coefficients to the dense sample
    removes that amplification.  The Jacobian is exact: d(product)/d(coef)
    inserts the factor derivative between prefix and suffix products.

    With gap_weight > 0, extra residual rows push the sequence's own gap
    C^2 + S^2 - 1 toward zero.  A plain value fit leaves the deviation's
    direction free, and its radial part enters the certified error through
    sqrt(gap) — a square-root amplification.  The gap rows steer the
    remaining deviation tangential to the unit circle (phase slip rather
    than amplitude drift), so both error terms stay at the fit level."""
    m_len = len(a)
    n_pts = ys.size

    def _factors(x):
        fs = []
        cols = []
        # left-to-right: U(a_{m+1}), L(b_m), ..., L(b_1), U(a_1)
        for j in range(m_len - 1, 0, -1):
            U = np.zeros((n_pts, 2, 2))
            U[:, 0, 0] = 1.0
            U[:, 1, 1] = 1.0
            U[:, 0, 1] = x[j] * ys
            fs.append(U)
            cols.append(j)
            L = np.zeros((n_pts, 2, 2))
            L[:, 0, 0] = 1.0
            L[:, 1, 1] = 1.0
            L[:, 1, 0] = -x[m_len + j - 1] * ys
            fs.append(L)
            cols.append(m_len + j - 1)
        U = np.zeros((n_pts, 2, 2))
        U[:, 0, 0] = 1.0
        U[:, 1, 1] = 1.0
        U[:, 0, 1] = x[0] * ys
        fs.append(U)
        cols.append(0)
        return fs, cols

    def _resid_jac(x):
        fs, cols = _factors(x)
        n = len(fs)
        pre = [np.broadcast_to(np.eye(2), (n_pts, 2, 2))]
        for i in range(n):
            pre.append(pre[i] @ fs[i])
        suf = [None] * (n + 1)
        suf[n] = np.broadcast_to(np.eye(2), (n_pts, 2, 2))
        for i in range(n - 1, -1, -1):
            suf[i] = fs[i] @ suf[i + 1]
        K = pre[n]
        cv = (K[:, 0, 0] + K[:, 1, 1]) / 2.0
        sv = (K[:, 0, 1] - K[:, 1, 0]) / 2.0
        blocks = [(cv - c_in) / ref_scale, (sv - s_in) / ref_scale]
        if gap_weight > 0.0:
            blocks.append(gap_weight * (cv * cv + sv * sv - 1.0))
        r = np.concatenate(blocks)
        n_rows = n_pts * len(blocks)
        J = np.zeros((n_rows, 2 * m_len - 1))
        for i, col in enumerate(cols):
            dF = np.zeros((n_pts, 2, 2))
            if col < m_len:
                dF[:, 0, 1] = ys
            else:
                dF[:, 1, 0] = -ys
            dK = pre[i] @ dF @ suf[i + 1]
            dc = (dK[:, 0, 0] + dK[:, 1, 1]) / 2.0
            ds = (dK[:, 0, 1] - dK[:, 1, 0]) / 2.0
            J[:n_pts, col] += dc / ref_scale
            J[n_pts: 2 * n_pts, col] += ds / ref_scale
            if gap_weight > 0.0:
                J[2 * n_pts:, col] += gap_weight * 2.0 * (cv * dc + sv * ds)
        return r, J

    x0 = np.concatenate([a, b])
    sol = least_squares(
        lambda x: _resid_jac(x)[0],
        x0,
        jac=lambda x: _resid_jac(x)[1],
        method="lm",
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
        max_nfev=max_nfev,
    )
    return sol.x[:m_len], sol.x[m_len:], float(np.max(np.abs(sol.fun)))


def _kicked_fit(a, b, theta, ys, c_in, s_in, ref_scale, rng, tol=1e-13,
                segments=60, gap_weight=0.0):
    """Levenberg-Marquardt with randomized restarts, keeping a segment only
    when it improves the fit.  Near a symmetric composition the coefficient
    map is rank-deficient (directions that trade weight between identical
    stages collapse the Jacobian), and plain descent parks on the resulting
    saddle plateau with the projected gradient at rounding level.  Small
    seeded kicks move the iterate off the degenerate set, after which the
    exact-Jacobian step contracts normally."""
    best_a = np.asarray(a, dtype=float)
    best_b = np.asarray(b, dtype=float)
    best_r = np.inf
    for seg in range(segments):
        if seg == 0:
            a_try, b_try = best_a, best_b
        else:
            # Shrink the kicks once the iterate is deep in the valley: a
            # large kick costs a full re-contraction, a small one explores
            # the degenerate directions near the current best.
            kick = 2e-3 if best_r > 1e-6 else 1e-4
            a_try = best_a + rng.normal(scale=kick * (1.0 + np.abs(best_a)))
            b_try = best_b + rng.normal(scale=kick * (1.0 + np.abs(best_b)))
        a_new, b_new, r = _polish_sequence(
            a_try, b_try, theta, ys, c_in, s_in, ref_scale, max_nfev=200,
            gap_weight=gap_weight,
        )
        if r < best_r:
            best_a, best_b, best_r = a_new, b_new, r
        if best_r <= tol:
            break
    return best_a, best_b, best_r


# ---------------------------------------------------------------------------
# main entry

def split_factorization(C_S: CandidateP, m: int) -> SplitCoefficients:
    """Extract shear coefficients (a_1..a_{m+1}, b_1..b_m) reproducing the
    candidate's (C, S) to relative accuracy 1e-9 on a dense sample."""
    theta = C_S.theta
    C = C_S.even_part()
    S = C_S.odd_part()
    if len(S.coef) != 2 * m + 2:
        raise ValueError(f"candidate degree {len(S.coef) - 1} != 2m+1 = {2 * m + 1}")

    G = C * C + S * S - 1.0
    gcoef = np.array(G.coef, dtype=float)
    gcoef[1::2] = 0.0  # exact parity
    gtilde = gcoef[0::2]

    ys = np.linspace(-theta, theta, 1000)
    c_in = C(ys)
    s_in = S(ys)
    ref_scale = max(1.0, float(np.max(np.abs(c_in))), float(np.max(np.abs(s_in))))

    ccoef = np.zeros(2 * m + 1)
    ccoef[: min(len(C.coef), 2 * m + 1)] = C.coef[: 2 * m + 1]
    scoef = np.zeros(2 * m + 2)
    scoef[: len(S.coef)] = S.coef
    s_lead = scoef[2 * m + 1]

    gnorm = float(np.linalg.norm(gcoef))
    idx = int(np.argmax(np.abs(gcoef)))
    best_err = np.inf
    branches_tried = 0

    def _roundtrip(a, b):
        seq = SplitCoefficients(tuple(a), tuple(b))
        c_rec, s_rec = _cs_arrays(seq, ys)
        err = max(
            float(np.max(np.abs(c_rec - c_in))),
            float(np.max(np.abs(s_rec - s_in))),
        ) / ref_scale
        return seq, err

    pscale = max(
        1.0,
        float(np.linalg.norm(ccoef)) ** 2 + float(np.linalg.norm(scoef)) ** 2,
    )
    if gnorm <= GAP_FLOOR * pscale:
        # The gap is at rounding scale.  Candidates that went through the
        # interior repair have a strictly positive gap, so the completion
        # factors cleanly from the full-degree root set; the peel then runs
        # on honestly-tiny-but-accurate leading coefficients, and the Newton
        # solve pulls the sequence onto the candidate to ~1e-10.
        completion = _complete_floor_gap(gcoef, s_lead, m)
        if completion is not None:
            D, E = completion
            K11 = _trim(_add(ccoef, D), 2 * m, 0)
            K12 = _trim(_add(scoef, E), 2 * m + 1, 1)
            K21 = _trim(_sub(E, scoef), 2 * m - 1, 1)
            K22 = _trim(_sub(ccoef, D), 2 * m, 0)
            peeled = _peel(K11, K12, K21, K22, m, theta)
            if peeled is not None:
                a, b = peeled
                if np.all(np.isfinite(a)) and np.all(np.isfinite(b)):
                    a, b = _newton_refine(np.asarray(a, dtype=float),
                                          np.asarray(b, dtype=float),
                                          C, S, m, theta, ys)
                    seq, err = _roundtrip(a, b)
                    best_err = min(best_err, err)
                    if err <= _ROUNDTRIP_TOL:
                        return seq
        # Fallback: gaps of either sign at the floor (the candidate is a
        # float64-exact rotation approximant whose completion route is
        # noise-dominated).  Fit the shear coefficients to the candidate's
        # values directly instead, by continuation in the window size: each
        # widening rung warm-starts from the last, and the kicked fit works
        # the iterate off the symmetric composition's degenerate plateau.
        a1 = np.array(
            ([0.5 / m] + [1.0 / m] * (m - 1) + [0.5 / m]) if m > 1 else [0.5, 0.5]
        )
        b1 = np.array([1.0 / m] * m)
        rng = np.random.default_rng(4099 + 8191 * m)
        for frac in (0.15, 0.25, 0.35, 0.47, 0.6, 0.74, 0.87, 1.0):
            w = frac * theta
            ys_w = np.linspace(-w, w, 800)
            c_w = C(ys_w)
            s_w = S(ys_w)
            scale_w = max(1.0, float(np.max(np.abs(c_w))), float(np.max(np.abs(s_w))))
            a1, b1, _ = _kicked_fit(a1, b1, theta, ys_w, c_w, s_w, scale_w, rng,
                                    gap_weight=_GAP_WEIGHT)
        seq, err = _roundtrip(a1, b1)
        best_err = min(best_err, err)
        if err <= _ROUNDTRIP_TOL:
            return seq
        raise FactorizationError(
            f"gap at the rounding floor but no completion reproduced (C, S): "
            f"best roundtrip error {best_err:.3g}",
            diagnostics={"best_roundtrip_error": best_err, "gap_norm": gnorm},
        )

    if abs(gtilde[-1]) <= 0.0:
        raise FactorizationError("gap polynomial has zero leading coefficient")
    v_roots = _polish_roots(cheb.chebroots(gtilde), gtilde)
    s_roots = theta * theta * (v_roots + 1.0) / 2.0

    for zero, neg, pairs in _groupings(s_roots, theta):
        n_choices = len(neg) + len(pairs)
        passing = []
        near_misses = []
        enumeration = itertools.islice(
            itertools.product((0, 1), repeat=n_choices), _BRANCH_CAP // 2
        )
        for choices in enumeration:
            branches_tried += 1
            roots = _branch_roots(zero, neg, pairs, choices)
            Qmono = Chebyshev.fromroots(roots, domain=[-theta, theta])
            qc = Qmono.coef
            flip = qc * ((-1.0) ** np.arange(len(qc)))
            R = cheb.chebmul(qc, flip)
            if len(R) != len(gcoef) or abs(R[idx]) < 1e-300:
                continue
            # G = Q(y) Q(-y) with Q = i*kappa*Qmono, so G = -kappa^2 * R
            scale = (gcoef[idx] / R[idx]).real
            if scale >= 0:
                continue
            if np.linalg.norm(gcoef - scale * R) > 1e-7 * gnorm:
                continue
            kappa = np.sqrt(-scale)
            for sgn in (1.0, -1.0):
                qfull = np.zeros(2 * m + 2, dtype=complex)
                qfull[: len(qc)] = 1j * sgn * kappa * qc
                qnorm = float(np.linalg.norm(qfull))
                structure = float(
                    np.linalg.norm(qfull[0::2].imag) + np.linalg.norm(qfull[1::2].real)
                )
                if qnorm > 0 and structure > 1e-7 * qnorm:
                    continue
                D = np.zeros(2 * m + 1)
                D[0::2] = qfull[0::2].real
                E = np.zeros(2 * m + 2)
                E[1::2] = qfull[1::2].imag
                # correct completions drop the top degree of E - S
                if abs(E[2 * m + 1] - s_lead) > 1e-6 * max(abs(s_lead), 1e-300):
                    continue
                K11 = _trim(_add(ccoef, D), 2 * m, 0)
                K12 = _trim(_add(scoef, E), 2 * m + 1, 1)
                K21 = _trim(_sub(E, scoef), 2 * m - 1, 1)
                K22 = _trim(_sub(ccoef, D), 2 * m, 0)
                peeled = _peel(K11, K12, K21, K22, m, theta)
                if peeled is None:
                    continue
                a, b = peeled
                if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
                    continue
                seq, err = _roundtrip(a, b)
                best_err = min(best_err, err)
                if err <= _ROUNDTRIP_TOL:
                    penalty = float(np.sum(np.abs(a)) + np.sum(np.abs(b)))
                    passing.append((penalty, seq))
                elif err <= _POLISH_WINDOW:
                    near_misses.append((err, a, b))
        if not passing and near_misses:
            # Rescue branches whose peel degraded numerically but landed in
            # the refinement basin.
            near_misses.sort(key=lambda item: item[0])
            for _, a, b in near_misses[:_POLISH_CAP]:
                a_ref, b_ref, _ = _polish_sequence(
                    np.asarray(a), np.asarray(b), theta, ys, c_in, s_in, ref_scale
                )
                seq, err = _roundtrip(a_ref, b_ref)
                best_err = min(best_err, err)
                if err <= _ROUNDTRIP_TOL:
                    penalty = float(np.sum(np.abs(a_ref)) + np.sum(np.abs(b_ref)))
                    passing.append((penalty, seq))
        if passing:
            passing.sort(key=lambda item: item[0])
            return passing[0][1]

    raise FactorizationError(
        f"no factorization branch reproduced (C, S): best roundtrip error "
        f"{best_err:.3g} over {branches_tried} branches",
        diagnostics={
            "best_roundtrip_error": best_err,
            "branches_tried": branches_tried,
            "roots": s_roots.tolist(),
        },
    )
