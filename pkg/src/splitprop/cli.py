"""Command-line front end: batch propagation runs, method analysis, plan
selection, coefficient design, and benchmark table emission.

All output is CSV or JSON (no plotting).  Exit codes: 0 on success, 2 when a
requested tolerance cannot be met (or a certified bound is violated by a
measured error), 3 for invalid input.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from .analysis import (
    BoundValidityError,
    StabilityDomainError,
    chebyshev_bound,
    error_trace,
    method_profile,
    min_degree,
    nstep_bound,
    taylor_bound,
)
from .catalog import (
    CatalogError,
    SelectionError,
    bundled_catalog,
    load_catalog,
    plan_cost,
    record_to_dict,
    select_method,
    strang_sequence,
)
from .core import (
    ShiftedOperator,
    WaveState,
    restore_phase,
    save_state_binary,
    save_state_csv,
    spectral_shift,
)
from .designer import DesignError, design_method
from .hamiltonians import (
    FourierCollocation1D,
    PoschlTellerPotential,
    TridiagonalLaplacian,
    fourier_grid,
    gaussian_state,
    poschl_teller_value,
    spectral_bounds,
)
from .propagators import (
    PropagationPlan,
    SplitCoefficients,
    chebyshev_propagate,
    execute_plan,
    taylor_propagate,
)

__all__ = ["main"]

EXIT_OK = 0
EXIT_TOLERANCE = 2
EXIT_INVALID = 3


class ConfigError(ValueError):
    """Malformed configuration or request (exit code 3)."""


class ToleranceNotMet(RuntimeError):
    """A certified bound exceeds the requested tolerance, or a measured
    error exceeds a certified bound (exit code 2)."""


# ---------------------------------------------------------------------------
# small helpers

def _write_json(path: str | None, payload: dict) -> None:
    text = json.dumps(payload, indent=2, sort_keys=False, default=float)
    if path is None or path == "-":
        print(text)
    else:
        Path(path).write_text(text + "\n")


def _write_csv(path: str, header: list, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _random_unit_state(dim: int, seed: int) -> WaveState:
    """Seeded random complex vector of unit 2-norm (standard normal pairs)."""
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    u /= np.linalg.norm(u)
    return WaveState.from_complex(u)


def _energy(op, u: WaveState) -> float:
    """<u, H u> for a real-symmetric operator (real for any complex u)."""
    return float(u.q @ op.apply(u.q) + u.p @ op.apply(u.p))


def _load_potential_csv(path: str, grid: np.ndarray) -> np.ndarray:
    """Read a two-column x,V table (optional header) and interpolate onto
    the collocation grid."""
    rows = []
    with open(path, newline="") as fh:
        for line in csv.reader(fh):
            if not line:
                continue
            try:
                rows.append((float(line[0]), float(line[1])))
            except (ValueError, IndexError):
                if rows:
                    raise ConfigError(f"malformed potential row {line!r} in {path}")
                continue  # header
    if len(rows) < 2:
        raise ConfigError(f"potential file {path} needs at least two x,V rows")
    xs, vs = map(np.asarray, zip(*sorted(rows)))
    return np.interp(grid, xs, vs)


def _build_problem(cfg) -> tuple:
    """Operator + label from the RunConfig problem block."""
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError('problem must be an object with a "kind" field')
    kind = cfg["kind"]
    if kind == "tridiagonal":
        n = int(cfg.get("n", 0))
        if n < 2:
            raise ConfigError("tridiagonal problem needs n >= 2")
        return TridiagonalLaplacian(n), f"tridiagonal(n={n})"
    if kind == "fourier1d":
        n = int(cfg.get("N", 0))
        length = float(cfg.get("L", 10.0))
        mass = float(cfg.get("mass", 1745.0))
        pot_cfg = cfg.get("potential", {"kind": "poschl_teller"})
        grid = fourier_grid(n, length)
        if pot_cfg.get("kind") == "poschl_teller":
            pot = PoschlTellerPotential(
                a=float(pot_cfg.get("a", 2.0)),
                lam=float(pot_cfg.get("lam", 24.5)),
                mass=mass,
            )
            values = poschl_teller_value(pot, grid)
        elif pot_cfg.get("kind") == "csv":
            values = _load_potential_csv(pot_cfg["path"], grid)
        else:
            raise ConfigError(f"unknown potential kind {pot_cfg.get('kind')!r}")
        op = FourierCollocation1D(n, length, mass, values)
        return op, f"fourier1d(N={n}, L={length:g})"
    raise ConfigError(f"unknown problem kind {kind!r}")


def _initial_state(cfg, op, seed: int) -> WaveState:
    mode = cfg.get("initial", "random")
    if mode == "random":
        return _random_unit_state(op.dim, seed)
    if mode == "gaussian":
        if not hasattr(op, "grid"):
            raise ConfigError("gaussian initial state needs a collocation grid")
        return gaussian_state(op)
    raise ConfigError(f"unknown initial state mode {mode!r}")


def _load_catalog_arg(path: str | None):
    return load_catalog(path) if path else bundled_catalog()


def _default_taylor_substeps(theta: float, m: int) -> int:
    """Substep count keeping the per-substep angle near the degree's
    comfortable range, theta/s <~ m/e (large single-step Taylor sums lose
    digits to cancellation)."""
    return max(1, math.ceil(theta * math.e / max(m, 1)))


def _dense_reference(op, t: float, u0: WaveState) -> WaveState:
    """exp(-itH) u0 through a dense eigendecomposition (dim <= 1024)."""
    dim = op.dim
    if hasattr(op, "dense"):
        mat = op.dense()
    else:
        mat = np.column_stack([op.apply(e) for e in np.eye(dim)])
        mat = 0.5 * (mat + mat.T)
    evals, vecs = np.linalg.eigh(mat)
    u = u0.to_complex()
    return WaveState.from_complex(vecs @ (np.exp(-1j * t * evals) * (vecs.T @ u)))


def _reference_state(op, t: float, u0: WaveState, shift) -> WaveState:
    """Trustworthy reference: dense eigendecomposition up to 512 modes,
    high-accuracy Chebyshev beyond."""
    if op.dim <= 512:
        return _dense_reference(op, t, u0)
    theta = shift.beta * abs(t)
    m = min_degree("chebyshev", theta, 1e-14)
    u = chebyshev_propagate(ShiftedOperator(op, shift), shift.beta, t, m, u0)
    return restore_phase(u, shift.alpha, t)


# ---------------------------------------------------------------------------
# method execution (propagate)

def _run_taylor(method_cfg, op, shift, t, theta, u0):
    m = int(method_cfg.get("m", 0))
    if m < 1:
        raise ConfigError("taylor method needs a degree m >= 1")
    substeps = int(method_cfg.get("substeps", _default_taylor_substeps(theta, m)))
    try:
        bound = substeps * taylor_bound(m, theta / substeps)
    except (BoundValidityError, OverflowError):
        bound = None
    u = taylor_propagate(ShiftedOperator(op, shift), t, m, u0, substeps)
    u = restore_phase(u, shift.alpha, t)
    return u, {
        "method": "taylor",
        "degree": m,
        "substeps": substeps,
        "products_real": 2 * m * substeps,
        "bound": bound,
    }


def _run_chebyshev(method_cfg, op, shift, t, theta, u0):
    m = int(method_cfg.get("m", 0))
    if m < 1:
        raise ConfigError("chebyshev method needs a degree m >= 1")
    substeps = int(method_cfg.get("substeps", 1))
    try:
        bound = substeps * chebyshev_bound(m, theta / substeps)
    except (BoundValidityError, OverflowError):
        bound = None
    u = chebyshev_propagate(ShiftedOperator(op, shift), shift.beta, t, m, u0, substeps)
    u = restore_phase(u, shift.alpha, t)
    return u, {
        "method": "chebyshev",
        "degree": m,
        "substeps": substeps,
        "products_real": 2 * m * substeps,
        "bound": bound,
    }


def _run_splitting_record(record, op, shift, t, theta, u0):
    if record.coefficients is None:
        raise ConfigError(
            f"catalog record {record.name} carries no coefficients (reference "
            "metadata only); design a method first")
    n = 1 if theta <= record.theta_max * (1 + 1e-12) else math.ceil(theta / record.theta_max)
    tau = t / n
    plan = PropagationPlan(
        stages=[(record.coefficients, tau, n)],
        shift=shift,
        total_time=t,
        theta_limits=[record.theta_max],
    )
    try:
        bound = nstep_bound(record.profile, n)
    except BoundValidityError:
        bound = None
    u, report = execute_plan(plan, op, u0, bound=bound)
    report.update({"record": record.name, "steps": n, "tau_beta": abs(tau) * shift.beta})
    return u, report


def _plan_from_selection(sel, shift, t):
    stages, limits, steps = [], [], []
    sign = 1.0 if t >= 0 else -1.0
    if sel.head is not None:
        stages.append((sel.head.record.coefficients,
                       sign * sel.head.tau_beta / shift.beta, sel.head.n))
        limits.append(sel.head.record.theta_max)
        steps.append({"name": sel.head.record.name, "n": sel.head.n,
                      "tau_beta": sel.head.tau_beta})
    if sel.tail is not None:
        stages.append((sel.tail.record.coefficients,
                       sign * sel.tail.tau_beta / shift.beta, 1))
        limits.append(sel.tail.record.theta_max)
        steps.append({"name": sel.tail.record.name, "n": 1,
                      "tau_beta": sel.tail.tau_beta})
    plan = PropagationPlan(stages=stages, shift=shift, total_time=t,
                           theta_limits=limits)
    return plan, steps


def _run_auto(method_cfg, op, shift, t, theta, tol, catalog, u0):
    sel = select_method(theta, tol, catalog)
    runnable = all(
        part.record.coefficients is not None
        for part in (sel.head, sel.tail) if part is not None
    ) and (sel.head is not None or sel.tail is not None)
    if runnable:
        plan, steps = _plan_from_selection(sel, shift, t)
        u, report = execute_plan(plan, op, u0, bound=sel.certified_bound)
        report.update({"plan": sel.describe(), "steps": steps})
        return u, report
    # The plan's records are metadata-only; report it and run the cheapest
    # runnable alternative at the same tolerance.
    m = min_degree("chebyshev", theta, tol)
    u, report = _run_chebyshev({"m": m}, op, shift, t, theta, u0)
    report["note"] = (
        f"selected splitting plan [{sel.describe()}] has no stored "
        "coefficients; ran Chebyshev at the same tolerance instead")
    report["splitting_plan"] = {
        "plan": sel.describe(),
        "certified_bound": sel.certified_bound,
        "cost_degree_equivalent": sel.cost_degree_equivalent,
    }
    return u, report


def cmd_propagate(args) -> int:
    cfg = json.loads(Path(args.config).read_text())
    if "problem" not in cfg or "method" not in cfg:
        raise ConfigError('config needs "problem" and "method" blocks')
    op, problem_label = _build_problem(cfg["problem"])
    if "t" not in cfg:
        raise ConfigError('config needs a propagation time "t"')
    t = float(cfg["t"])
    tol = float(cfg.get("tol", 1e-9))
    if tol <= 0:
        raise ConfigError("tol must be positive")
    seed = int(cfg.get("seed", 0))
    u0 = _initial_state(cfg, op, seed)

    e_min, e_max = spectral_bounds(op)
    shift = spectral_shift(e_min, e_max)
    theta = shift.beta * abs(t)

    method_cfg = cfg["method"]
    if not isinstance(method_cfg, dict) or "kind" not in method_cfg:
        raise ConfigError('method must be an object with a "kind" field')
    kind = method_cfg["kind"]
    started = time.perf_counter()
    if kind == "taylor":
        u, run_report = _run_taylor(method_cfg, op, shift, t, theta, u0)
    elif kind == "chebyshev":
        u, run_report = _run_chebyshev(method_cfg, op, shift, t, theta, u0)
    elif kind == "splitting":
        name = method_cfg.get("name")
        if not name:
            raise ConfigError("splitting method needs a catalog record name")
        catalog = _load_catalog_arg(method_cfg.get("catalog") or cfg.get("catalog"))
        try:
            record = catalog.get(name)
        except KeyError:
            raise ConfigError(f"no catalog record named {name!r}") from None
        u, run_report = _run_splitting_record(record, op, shift, t, theta, u0)
    elif kind == "auto":
        catalog = _load_catalog_arg(method_cfg.get("catalog") or cfg.get("catalog"))
        u, run_report = _run_auto(method_cfg, op, shift, t, theta, tol, catalog, u0)
    else:
        raise ConfigError(f"unknown method kind {kind!r}")
    wall = time.perf_counter() - started

    report = {
        "problem": problem_label,
        "t": t,
        "tol": tol,
        "seed": seed,
        "shift": {"alpha": shift.alpha, "beta": shift.beta, "theta": theta},
        "run": run_report,
        "norm": u.norm(),
        "unitarity_error": abs(u.norm() - 1.0),
        "wall_time_s": wall,
    }

    status = EXIT_OK
    bound = run_report.get("bound")
    if bound is not None and bound > tol:
        report["status"] = "tolerance-not-met"
        report["detail"] = (f"certified bound {bound:.3g} exceeds requested "
                            f"tolerance {tol:.3g}")
        status = EXIT_TOLERANCE
    if cfg.get("reference", False):
        if op.dim > 1024:
            raise ConfigError("reference check limited to dim <= 1024")
        u_ref = _dense_reference(op, t, u0)
        err = float(np.linalg.norm(u.to_complex() - u_ref.to_complex()))
        report["measured_error"] = err
        if bound is not None and err > max(bound, 1e-14):
            report["status"] = "bound-violated"
            report["detail"] = f"measured error {err:.3g} exceeds bound {bound:.3g}"
            status = EXIT_TOLERANCE
        elif err > tol and status == EXIT_OK:
            report["status"] = "tolerance-not-met"
            report["detail"] = (f"measured error {err:.3g} exceeds tolerance "
                                f"{tol:.3g}")
            status = EXIT_TOLERANCE
    if status == EXIT_OK:
        report["status"] = "ok"

    output = cfg.get("output", {})
    state_path = output.get("state")
    if state_path:
        if str(state_path).endswith(".npz"):
            save_state_binary(u, state_path)
        else:
            save_state_csv(u, state_path)
        report["state_file"] = str(state_path)
    _write_json(output.get("report") or args.output, report)
    return status


# ---------------------------------------------------------------------------
# analyze

def _coefficients_from_file(path: str) -> tuple:
    raw = json.loads(Path(path).read_text())
    if "a" not in raw or "b" not in raw:
        raise ConfigError(f"{path} has no shear coefficient arrays 'a'/'b'")
    c = SplitCoefficients(tuple(map(float, raw["a"])), tuple(map(float, raw["b"])))
    theta = raw.get("theta_max")
    name = raw.get("name")
    return c, theta, name


def cmd_analyze(args) -> int:
    if bool(args.name) == bool(args.coeffs):
        raise ConfigError("analyze needs exactly one of --name or --coeffs")
    if args.name:
        catalog = _load_catalog_arg(args.catalog)
        try:
            record = catalog.get(args.name)
        except KeyError:
            raise ConfigError(f"no catalog record named {args.name!r}") from None
        if record.coefficients is None:
            raise ConfigError(
                f"record {record.name} is reference metadata (no coefficients); "
                "its stored profile is already the analysis")
        c, theta, name = record.coefficients, record.theta_max, record.name
    else:
        c, theta, name = _coefficients_from_file(args.coeffs)
    if args.theta is not None:
        theta = args.theta
    if theta is None:
        raise ConfigError("no theta: pass --theta or store theta_max in the file")
    theta = float(theta)
    if theta <= 0:
        raise ConfigError("theta must be positive")

    try:
        profile = method_profile(c, theta)
    except StabilityDomainError as exc:
        _write_json(args.output, {"status": "unstable", "detail": str(exc)})
        return EXIT_TOLERANCE

    payload = {
        "name": name,
        "m": c.m,
        "launches": 1,
        "products_real_per_step": 2 * c.m + 1,
        "theta_max": profile.theta_max,
        "y_star": profile.y_star,
        "eps": profile.eps,
        "mu": profile.mu,
        "nu": profile.nu,
        "delta": profile.delta,
    }
    _write_json(args.output, payload)
    if args.trace:
        tr = error_trace(c, theta, n=args.points)
        _write_csv(args.trace, ["y", "C", "S", "deviation", "k_norm"],
                   list(zip(tr["y"], tr["C"], tr["S"], tr["dev"], tr["knorm"])))
    return EXIT_OK


# ---------------------------------------------------------------------------
# select / design

def cmd_select(args) -> int:
    if args.tbeta <= 0 or args.tol <= 0:
        raise ConfigError("select needs --tbeta > 0 and --tol > 0")
    catalog = _load_catalog_arg(args.catalog)
    try:
        sel = select_method(args.tbeta, args.tol, catalog)
    except SelectionError as exc:
        _write_json(args.output, {"status": "tolerance-not-met", "detail": str(exc)})
        return EXIT_TOLERANCE
    products, degree_equivalent = plan_cost(sel)
    steps = []
    if sel.head is not None:
        steps.append({"name": sel.head.record.name, "m": sel.head.record.m,
                      "n": sel.head.n, "tau_beta": sel.head.tau_beta})
    if sel.tail is not None:
        steps.append({"name": sel.tail.record.name, "m": sel.tail.record.m,
                      "n": 1, "tau_beta": sel.tail.tau_beta})
    _write_json(args.output, {
        "status": "ok",
        "plan": sel.describe(),
        "steps": steps,
        "certified_bound": sel.certified_bound,
        "cost_products_real": products,
        "cost_degree_equivalent": degree_equivalent,
    })
    return EXIT_OK


def cmd_design(args) -> int:
    details: dict = {}
    try:
        record = design_method(args.m, args.theta, l_window=args.l_window,
                               details=details)
    except DesignError as exc:
        payload = {"status": "design-failed", "detail": str(exc)}
        diag = getattr(exc, "diagnostics", None)
        if diag:
            payload["diagnostics"] = {str(k): str(v) for k, v in diag.items()}
        _write_json(args.output, payload)
        return EXIT_TOLERANCE

    payload = record_to_dict(record)
    payload["provenance"] = {
        "l": details.get("l"),
        "nodes": details.get("nodes", []),
        "phase_norm": details.get("phase_norm"),
        "residuals": {
            "tail_mass": details.get("tail_mass"),
            "deflation": details.get("deflation_residual"),
        },
        "model_eps": details.get("model_eps"),
        "certified_eps": details.get("certified_eps"),
    }
    if "path" in details:
        payload["provenance"]["path"] = details["path"]
    if "note" in details:
        payload["provenance"]["note"] = details["note"]
    _write_json(args.output, payload)
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench

def _bench_example1(args) -> int:
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    n, t, seed = args.n, args.t, args.seed
    op = TridiagonalLaplacian(n)
    e_min, e_max = spectral_bounds(op)
    shift = spectral_shift(e_min, e_max)
    theta = shift.beta * abs(t)
    u0 = _random_unit_state(n, seed)
    u_ref = _dense_reference(op, t, u0)
    uref_c = u_ref.to_complex()
    energy0 = _energy(op, u0)
    violations = []

    def _measures(u: WaveState):
        err = float(np.linalg.norm(u.to_complex() - uref_c))
        energy = abs(_energy(op, u) - energy0) / abs(energy0)
        unit = abs(u.norm() - 1.0)
        return err, energy, unit

    rows = []
    for m in range(args.cheb_min, args.cheb_max + 1, args.cheb_step):
        u, rep = _run_chebyshev({"m": m, "substeps": 1}, op, shift, t, theta, u0)
        err, energy, unit = _measures(u)
        bound = rep["bound"] if rep["bound"] is not None else float("inf")
        ok = err <= max(bound, 1e-14)
        if not ok:
            violations.append(f"chebyshev m={m}: error {err:.3g} > bound {bound:.3g}")
        rows.append([m, err, bound, energy, unit, ok])
    _write_csv(outdir / "example1_chebyshev.csv",
               ["m", "error", "bound", "energy_error", "unitarity_error",
                "within_bound"], rows)

    rows = []
    for m in range(args.taylor_min, args.taylor_max + 1, args.taylor_step):
        u, rep = _run_taylor({"m": m, "substeps": 1}, op, shift, t, theta, u0)
        err, energy, unit = _measures(u)
        bound = rep["bound"] if rep["bound"] is not None else float("inf")
        ok = err <= max(bound, 1e-14)
        if not ok:
            violations.append(f"taylor m={m}: error {err:.3g} > bound {bound:.3g}")
        rows.append([m, err, bound, energy, unit, ok])
    _write_csv(outdir / "example1_taylor.csv",
               ["m", "error", "bound", "energy_error", "unitarity_error",
                "within_bound"], rows)

    # Splitting: m-fold second-order compositions certified at theta_m, run
    # as single steps at their certified angle and as multi-step walks to t.
    rows = []
    for m_fold in (1, 2, 3, 4, 6, 8):
        c = strang_sequence(m_fold)
        theta_m = 1.6 * m_fold
        profile = method_profile(c, theta_m)
        # single certified step
        tau = theta_m / shift.beta
        plan = PropagationPlan(stages=[(c, tau, 1)], shift=shift, total_time=tau,
                               theta_limits=[theta_m])
        u_single, _ = execute_plan(plan, op, u0)
        unit_single = abs(u_single.norm() - 1.0)
        ok_single = unit_single <= profile.eps
        # n steps covering t
        steps = max(1, math.ceil(theta / theta_m))
        tau_n = t / steps
        plan = PropagationPlan(stages=[(c, tau_n, steps)], shift=shift,
                               total_time=t, theta_limits=[theta_m])
        u_multi, _ = execute_plan(plan, op, u0)
        err, energy, unit = _measures(u_multi)
        try:
            bound = nstep_bound(profile, steps)
        except BoundValidityError:
            bound = float("inf")
        ok_multi = err <= max(bound, 1e-14)
        if not ok_single:
            violations.append(
                f"splitting m={m_fold}: single-step unitarity {unit_single:.3g} "
                f"> eps {profile.eps:.3g}")
        if not ok_multi:
            violations.append(
                f"splitting m={m_fold}: error {err:.3g} > bound {bound:.3g}")
        rows.append([f"Strang{m_fold}", m_fold, theta_m, profile.eps,
                     unit_single, ok_single, steps, err, bound, energy, unit,
                     ok_multi])
    _write_csv(outdir / "example1_splitting.csv",
               ["name", "m", "theta_step", "eps", "unitarity_single",
                "within_eps", "steps", "error", "bound", "energy_error",
                "unitarity_error", "within_bound"], rows)

    summary = {
        "problem": f"tridiagonal(n={n})",
        "t": t,
        "theta": theta,
        "seed": seed,
        "files": ["example1_chebyshev.csv", "example1_taylor.csv",
                  "example1_splitting.csv"],
        "violations": violations,
        "status": "ok" if not violations else "bound-violated",
    }
    _write_json(str(outdir / "example1_summary.json"), summary)
    print(json.dumps(summary, indent=2, default=float))
    return EXIT_OK if not violations else EXIT_TOLERANCE


def _bench_example2(args) -> int:
    presets = {
        "I": {"N": 128, "t": 15 * math.pi, "tol": 1e-9, "taylor_substeps": 2},
        "II": {"N": 512, "t": 40 * math.pi, "tol": 1e-6, "taylor_substeps": 36},
    }
    if args.case:
        preset = presets[args.case]
        n_modes = preset["N"]
        t = preset["t"]
        tol = preset["tol"]
        taylor_substeps = args.taylor_substeps or preset["taylor_substeps"]
    else:
        n_modes, t, tol = args.N, args.t, args.tol
        taylor_substeps = args.taylor_substeps or 0
    op = FourierCollocation1D.poschl_teller(n_modes, args.L)
    e_min, e_max = spectral_bounds(op)
    shift = spectral_shift(e_min, e_max)
    theta = shift.beta * abs(t)
    u0 = gaussian_state(op)
    u_ref = _reference_state(op, t, u0, shift)
    uref_c = u_ref.to_complex()

    report: dict = {
        "problem": f"poschl_teller fourier1d(N={n_modes}, L={args.L:g})",
        "bounds": {"e_min": e_min, "e_max": e_max},
        "t": t,
        "tol": tol,
        "theta": theta,
        "methods": {},
    }

    # Chebyshev at its minimal certified degree.
    m_c = min_degree("chebyshev", theta, tol)
    u, rep = _run_chebyshev({"m": m_c, "substeps": 1}, op, shift, t, theta, u0)
    err_c = float(np.linalg.norm(u.to_complex() - uref_c))
    report["methods"]["chebyshev"] = {
        "degree": m_c, "products_real": 2 * m_c, "bound": rep["bound"],
        "error": err_c,
    }

    # Taylor with substep division against roundoff blowup.
    if taylor_substeps < 1:
        best = None
        for s in range(1, 65):
            try:
                m_s = min_degree("taylor", theta / s, tol / s)
            except (BoundValidityError, OverflowError):
                continue
            if best is None or s * m_s < best[0]:
                best = (s * m_s, s, m_s)
        if best is None:
            raise ConfigError("no Taylor substep count reaches the tolerance")
        taylor_substeps, m_t = best[1], best[2]
    else:
        m_t = min_degree("taylor", theta / taylor_substeps, tol / taylor_substeps)
    u, rep = _run_taylor({"m": m_t, "substeps": taylor_substeps}, op, shift, t,
                         theta, u0)
    err_t = float(np.linalg.norm(u.to_complex() - uref_c))
    report["methods"]["taylor"] = {
        "degree": m_t, "substeps": taylor_substeps,
        "products_real": 2 * m_t * taylor_substeps,
        "degree_total": m_t * taylor_substeps,
        "bound": rep["bound"], "error": err_t,
    }

    # Splitting plan from the catalog.
    catalog = _load_catalog_arg(args.catalog)
    try:
        sel = select_method(theta, tol, catalog)
        products, degree_equivalent = plan_cost(sel)
        split_entry = {
            "plan": sel.describe(),
            "certified_bound": sel.certified_bound,
            "products_real": products,
            "degree_equivalent": degree_equivalent,
        }
        runnable = all(
            part.record.coefficients is not None
            for part in (sel.head, sel.tail) if part is not None)
        if runnable and (sel.head or sel.tail):
            plan, _ = _plan_from_selection(sel, shift, t)
            u, _ = execute_plan(plan, op, u0, bound=sel.certified_bound)
            split_entry["error"] = float(np.linalg.norm(u.to_complex() - uref_c))
        else:
            split_entry["note"] = ("plan records are certificate metadata "
                                   "(no stored coefficients); costs reported "
                                   "from the certificates")
        report["methods"]["splitting"] = split_entry
    except SelectionError as exc:
        report["methods"]["splitting"] = {"status": "tolerance-not-met",
                                          "detail": str(exc)}

    violations = []
    for name, entry in report["methods"].items():
        err = entry.get("error")
        bound = entry.get("bound") or entry.get("certified_bound")
        if err is not None and bound is not None and err > bound:
            violations.append(f"{name}: error {err:.3g} > bound {bound:.3g}")
    report["violations"] = violations
    report["status"] = "ok" if not violations else "bound-violated"
    _write_json(args.output, report)
    return EXIT_OK if not violations else EXIT_TOLERANCE


def _bench_degrees(args) -> int:
    tols = args.tol or [1e-4, 1e-7, 1e-10]
    thetas = np.geomspace(args.theta_min, args.theta_max, args.theta_points)
    catalog = _load_catalog_arg(args.catalog)
    rows = []
    for tol in tols:
        for theta in thetas:
            try:
                m_t = min_degree("taylor", theta, tol)
            except (BoundValidityError, OverflowError):
                m_t = ""
            m_c = min_degree("chebyshev", theta, tol)
            try:
                sel = select_method(theta, tol, catalog)
                m_s = plan_cost(sel)[1]
            except SelectionError:
                m_s = ""
            rows.append([f"{theta:.6g}", f"{tol:g}", m_t, m_c, m_s])
    _write_csv(args.outfile,
               ["theta", "tol", "m_taylor", "m_chebyshev",
                "splitting_degree_equivalent"], rows)
    print(f"wrote {len(rows)} rows to {args.outfile}")
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.target == "example1":
        return _bench_example1(args)
    if args.target == "example2":
        return _bench_example2(args)
    return _bench_degrees(args)


# ---------------------------------------------------------------------------
# argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):  # invalid CLI input: exit 3, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INVALID)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="splitprop",
                     description="Spectral-splitting propagator toolbox")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("propagate", parents=[], help="run one propagation "
                       "from a JSON config")
    p.add_argument("--config", required=True, help="RunConfig JSON path")
    p.add_argument("-o", "--output", default=None,
                   help="report JSON path (default: stdout, unless the config "
                   "names one)")
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("analyze", help="error functionals of a method")
    p.add_argument("--name", help="catalog record name")
    p.add_argument("--coeffs", help="JSON file with shear coefficients a/b")
    p.add_argument("--catalog", help="catalog JSON path (default: bundled)")
    p.add_argument("--theta", type=float, default=None,
                   help="window half-angle (default: record theta_max)")
    p.add_argument("--trace", help="CSV path for the (y, C, S, deviation, "
                   "|K|) trace")
    p.add_argument("--points", type=int, default=1025,
                   help="trace grid size (default 1025)")
    p.add_argument("-o", "--output", default=None, help="JSON output path")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("select", help="cheapest certified plan for (t*beta, tol)")
    p.add_argument("--tbeta", type=float, required=True)
    p.add_argument("--tol", type=float, required=True)
    p.add_argument("--catalog", help="catalog JSON path (default: bundled)")
    p.add_argument("-o", "--output", default=None, help="JSON output path")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("design", help="design an m-stage method for a window")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--l-window", type=int, default=7, dest="l_window")
    p.add_argument("-o", "--output", default=None,
                   help="method record JSON path (default: stdout)")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("bench", help="benchmark tables (CSV/JSON)")
    bench_sub = p.add_subparsers(dest="target", required=True)

    b1 = bench_sub.add_parser("example1", help="tridiagonal sweeps")
    b1.add_argument("--n", type=int, default=100)
    b1.add_argument("--t", type=float, default=20.0)
    b1.add_argument("--seed", type=int, default=7)
    b1.add_argument("--cheb-min", type=int, default=20)
    b1.add_argument("--cheb-max", type=int, default=60)
    b1.add_argument("--cheb-step", type=int, default=4)
    b1.add_argument("--taylor-min", type=int, default=28)
    b1.add_argument("--taylor-max", type=int, default=72)
    b1.add_argument("--taylor-step", type=int, default=4)
    b1.add_argument("-o", "--outdir", default="bench_example1")
    b1.set_defaults(func=cmd_bench)

    b2 = bench_sub.add_parser("example2", help="Poschl-Teller cost table")
    b2.add_argument("--case", choices=["I", "II"], default=None)
    b2.add_argument("--N", type=int, default=128)
    b2.add_argument("--t", type=float, default=15 * math.pi)
    b2.add_argument("--tol", type=float, default=1e-9)
    b2.add_argument("--L", type=float, default=10.0)
    b2.add_argument("--taylor-substeps", type=int, default=0,
                    help="0 = search the cheapest substep count")
    b2.add_argument("--catalog", help="catalog JSON path (default: bundled)")
    b2.add_argument("-o", "--output", default=None, help="JSON output path")
    b2.set_defaults(func=cmd_bench)

    b3 = bench_sub.add_parser("degrees", help="minimum-degree curves")
    b3.add_argument("--tol", type=float, action="append", default=None)
    b3.add_argument("--theta-min", type=float, default=5.0)
    b3.add_argument("--theta-max", type=float, default=2000.0)
    b3.add_argument("--theta-points", type=int, default=12)
    b3.add_argument("--catalog", help="catalog JSON path (default: bundled)")
    b3.add_argument("-o", "--outfile", default="degree_curves.csv")
    b3.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (CatalogError, FileNotFoundError, json.JSONDecodeError, KeyError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (SelectionError, DesignError, ToleranceNotMet,
            StabilityDomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE


if __name__ == "__main__":
    sys.exit(main())
