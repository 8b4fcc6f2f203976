"""End-to-end method design: scan node counts, keep the best certified result.

For a stage count m and window theta the designer tries a window of odd node
counts l around (3m+3)/2 (clipped to m+1 <= l <= 2m).  Each l runs the full
pipeline — node stabilization, constrained phase fit, Hermite interpolation,
gap validation, interior gap repair (floor regime), shear factorization —
and the candidate with the smallest certified window error wins.  Certification always recomputes the error
functionals from the extracted shear coefficients, never from the polynomial
model alone.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize

from ..analysis import StabilityDomainError, _cs_arrays, method_profile
from ..catalog import MethodRecord, strang_sequence
from ..propagators import SplitCoefficients
from .factor import split_factorization
from .nodes import DesignProblem, chebyshev_nodes, stabilize_nodes
from .phase import DesignError, hermite_interpolant, optimize_phase_at_nodes, trim_candidate
from .repair import repair_candidate
from .validate import validate_candidate

__all__ = ["optimize_phase", "design_method"]

# Relative agreement demanded between the polynomial-model functionals and
# the recomputed ones, with an absolute floor for methods near the float64
# gap noise floor (the factorization roundtrip is only exact to ~1e-9).
_RECERTIFY_REL = 0.01
_RECERTIFY_ABS = 2e-9

# Largest stage count for which the direct coefficient-space search is used
# as a fallback (2m+1 <= 9 free parameters).
_DIRECT_LIMIT = 4


def optimize_phase(m: int, theta: float, l: int):
    """Smallest-norm phase polynomial for the stabilized node set of (m, theta, l)."""
    problem = DesignProblem(m, theta, l, chebyshev_nodes(l, theta))
    try:
        problem = stabilize_nodes(problem)
    except DesignError as exc:
        if exc.last is None:
            raise
        problem = exc.last
    if problem.phase is not None:
        return problem.phase
    return optimize_phase_at_nodes(m, theta, l, problem.nodes)


def _l_window(m: int, width: int) -> list[int]:
    centre = (3 * m + 3) / 2
    odds = [l for l in range(m + 1, 2 * m + 1) if l % 2 == 1]
    odds.sort(key=lambda l: (abs(l - centre), l))
    return sorted(odds[:width])


def _design_direct(m: int, theta: float):
    """Minimax search directly in shear-coefficient space.

    At small stage counts the osculating-candidate family can sit entirely
    outside the completable cone (its deflated gap changes sign beyond the
    window, so no real shear completion exists), but with 2m+1 <= 9 free
    coefficients the window error is cheap to minimize directly.  Every
    point of this search space is a genuine shear sequence, so factorization
    is moot and the standard certification applies unchanged.
    """
    ys = np.linspace(0.0, theta, 1025)
    cos_ref, sin_ref = np.cos(ys), np.sin(ys)

    def objective(x):
        seq = SplitCoefficients(tuple(x[: m + 1]), tuple(x[m + 1:]))
        c, s = _cs_arrays(seq, ys)
        gap = c * c + s * s - 1.0
        return float(
            np.max(np.hypot(c - cos_ref, s - sin_ref)
                   + np.sqrt(np.maximum(gap, 0.0)))
        )

    rng = np.random.default_rng(2 * m + int(1e6 * theta) % 1000003)
    base = strang_sequence(m)
    x_base = np.concatenate([base.a, base.b])
    best_x, best_val = x_base, objective(x_base)
    for k in range(6):
        x0 = x_base if k == 0 else x_base + rng.normal(scale=0.08, size=x_base.size)
        res = minimize(objective, x0, method="Nelder-Mead",
                       options={"maxiter": 6000, "fatol": 1e-12, "xatol": 1e-10})
        if res.fun < best_val:
            best_val, best_x = float(res.fun), res.x
    res = minimize(objective, best_x, method="Nelder-Mead",
                   options={"maxiter": 8000, "fatol": 1e-13, "xatol": 1e-11})
    if res.fun < best_val:
        best_val, best_x = float(res.fun), res.x
    coeffs = SplitCoefficients(tuple(best_x[: m + 1]), tuple(best_x[m + 1:]))
    profile = method_profile(coeffs, theta)
    return coeffs, profile


def design_method(m: int, theta: float, l_window: int = 7,
                  details: dict | None = None) -> MethodRecord:
    """Design an m-stage splitting certified on [0, theta].

    Raises ValueError for an infeasible window (theta >= 2m exceeds the
    stability ceiling of any m-stage method) and DesignError, with per-l
    diagnostics, when no node count produces a valid method.
    """
    if m < 1:
        raise ValueError("need at least one stage")
    if not (0.0 < theta < 2.0 * m):
        raise ValueError(
            f"infeasible window: need 0 < theta < 2m = {2 * m} (an m-stage "
            "method cannot be stable past y = 2m)")

    gamma = theta / m
    name = f"D{m}_{gamma:g}"

    if m == 1:
        # One stage leaves no free parameters beyond the symmetric
        # second-order three-shear map; certify it on the requested window.
        coeffs = strang_sequence(1)
        profile = method_profile(coeffs, theta)
        if details is not None:
            details.update({"l": None, "nodes": [], "phase_norm": 0.0})
        return MethodRecord(name=name, m=1, gamma=gamma, theta_max=theta,
                            profile=profile, coefficients=coeffs, certified=True)

    diagnostics: dict[int, str] = {}
    best = None  # (certified_eps, l, record, detail dict)

    def _certify(l, problem, phase, cand, tail_mass, report, stabilize_note):
        """Factor the candidate, recompute its functionals from the sequence,
        and gate on model/sequence agreement.  Returns (record, detail) or
        None with diagnostics[l] explaining the rejection."""
        coeffs = split_factorization(cand, m)
        try:
            profile = method_profile(coeffs, theta)
        except StabilityDomainError as exc:
            diagnostics[l] = f"recertification failed: {exc}"
            return None
        # How far the factorized sequence may legitimately drift from the
        # polynomial model: a (C, S) deviation of size d moves the gap by
        # ~2d, and eps by at most d + min(sqrt(2d), d/eps).
        ys_chk = np.linspace(-theta, theta, 1001)
        c_mod, s_mod = cand.cs_vec(ys_chk)
        c_seq, s_seq = _cs_arrays(coeffs, ys_chk)
        rt_scale = max(1.0, float(np.max(np.abs(c_mod))),
                       float(np.max(np.abs(s_mod))))
        rt_dev = max(float(np.max(np.abs(c_seq - c_mod))),
                     float(np.max(np.abs(s_seq - s_mod)))) / rt_scale
        eps_slack = rt_dev + min(
            np.sqrt(2.0 * rt_dev), rt_dev / max(report.eps, rt_dev))
        drift = abs(profile.eps - report.eps)
        if drift > _RECERTIFY_REL * report.eps + _RECERTIFY_ABS + eps_slack:
            diagnostics[l] = (f"functional mismatch: model eps {report.eps:.3g} "
                              f"vs recomputed {profile.eps:.3g}")
            return None
        detail = {
            "l": l,
            "nodes": problem.nodes.tolist(),
            "phase_norm": phase.norm,
            "tail_mass": tail_mass,
            "deflation_residual": report.deflation_residual,
            "model_eps": report.eps,
            "certified_eps": profile.eps,
        }
        if stabilize_note:
            detail["note"] = stabilize_note.lstrip("; ")
        diagnostics[l] = f"ok: certified eps {profile.eps:.3g}"
        record = MethodRecord(name=name, m=m, gamma=gamma, theta_max=theta,
                              profile=profile, coefficients=coeffs,
                              certified=True)
        return record, detail

    floor_pool = []  # (model_eps, l, pipeline state) with factorization deferred

    for l in _l_window(m, l_window):
        try:
            problem = DesignProblem(m, theta, l, chebyshev_nodes(l, theta))
            stabilize_note = ""
            try:
                problem = stabilize_nodes(problem)
            except DesignError as exc:
                if exc.last is None:
                    raise
                problem = exc.last
                stabilize_note = f"; stabilization stopped early ({exc})"
            phase = problem.phase
            if phase is None:
                phase = optimize_phase_at_nodes(m, theta, l, problem.nodes)
            raw = hermite_interpolant(phase, problem.nodes)
            cand, tail_mass = trim_candidate(raw, m)
            if tail_mass > 1e-9:
                diagnostics[l] = f"dropped tail mass {tail_mass:.3g} after trim"
                continue
            report = validate_candidate(cand, m, theta)
            if not report.v_nonneg:
                diagnostics[l] = (f"gap quotient dips to {report.v_min:.3g}: no real "
                                  "shear completion" + stabilize_note)
                continue
            if not report.stable:
                diagnostics[l] = (f"stability threshold {report.y_star:.6g} < theta"
                                  + stabilize_note)
                continue
            if report.gap_floor:
                # Factorization in this regime is a value fit by continuation
                # whose fidelity (~1e-9) does not depend on the candidate, so
                # defer it: rank the floor candidates by model eps afterwards
                # and fit only as many as it takes to certify one.
                floor_pool.append(
                    (report.eps, l, problem, phase, cand, tail_mass, report,
                     stabilize_note))
                diagnostics[l] = (f"gap floor: model eps {report.eps:.3g}, "
                                  "factorization deferred")
                continue
            certified = _certify(l, problem, phase, cand, tail_mass, report,
                                 stabilize_note)
            if certified is None:
                continue
            record, detail = certified
            if best is None or (record.profile.eps, l) < (best[0], best[1]):
                best = (record.profile.eps, l, record, detail)
        except (DesignError, ValueError, np.linalg.LinAlgError) as exc:
            diagnostics[l] = str(exc)

    floor_pool.sort(key=lambda item: (item[0], item[1]))
    for model_eps, l, problem, phase, cand, tail_mass, report, note in floor_pool:
        if best is not None and best[0] <= model_eps:
            break  # no remaining candidate can beat the certified record
        try:
            # A floor-regime gap is rounding noise of either sign, which puts
            # the candidate (generically) outside the set reachable by real
            # shear products.  Lift it the minimal distance into the strict
            # interior first; certification then runs against the lifted
            # model, whose error functionals are recomputed honestly.
            repaired = repair_candidate(cand, m)
            report_r = validate_candidate(repaired, m, theta)
            if report_r.stable:
                cand, report = repaired, report_r
                note = note + "; gap lifted to an interior corridor"
            certified = _certify(l, problem, phase, cand, tail_mass, report, note)
        except (DesignError, ValueError, np.linalg.LinAlgError) as exc:
            diagnostics[l] = str(exc)
            continue
        if certified is None:
            continue
        record, detail = certified
        if best is None or (record.profile.eps, l) < (best[0], best[1]):
            best = (record.profile.eps, l, record, detail)
        # Certified eps tracks model eps to ~1e-9 here, so entries with a
        # worse model eps cannot improve on this one.
        break

    if best is None and m <= _DIRECT_LIMIT:
        try:
            coeffs, profile = _design_direct(m, theta)
        except (StabilityDomainError, ValueError) as exc:
            diagnostics["direct"] = str(exc)
        else:
            diagnostics["direct"] = f"ok: certified eps {profile.eps:.3g}"
            if details is not None:
                details.update({
                    "l": None,
                    "nodes": [],
                    "phase_norm": 0.0,
                    "certified_eps": profile.eps,
                    "path": "direct coefficient search",
                    "l_diagnostics": diagnostics,
                })
            return MethodRecord(name=name, m=m, gamma=gamma, theta_max=theta,
                                profile=profile, coefficients=coeffs,
                                certified=True)

    if best is None:
        raise DesignError(
            f"design failed for m={m}, theta={theta:g}: no node count produced "
            "a valid method", diagnostics=diagnostics)

    if details is not None:
        details.update(best[3])
        details["l_diagnostics"] = diagnostics
    return best[2]
