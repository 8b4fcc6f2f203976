"""Method catalog and automatic scheme selection.

The bundled table ships the published error metadata (theta_max, y*, eps, mu,
nu, delta) for 21 designed splitting methods plus three Strang reference rows.
Coefficient payloads are optional: metadata is enough for selection and bound
arithmetic, while propagation needs actual coefficients (from the Strang rows,
a user-supplied file, or `designer` output).

One published value is adjusted: the 60-stage theta_max=84 "b" variant's nu is
stored as 2.6e-6 (the table cell prints 2.9e-6, duplicating its neighbors, but
the surrounding text and the 10452 crossover arithmetic both use 2.6e-6).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .analysis import (
    MethodErrorProfile,
    combined_bound,
    delta_sup,
    epsilon_sup,
    mu_nu,
    nstep_bound,
    stability_threshold,
)
from .propagators import SplitCoefficients

__all__ = [
    "MethodRecord",
    "Catalog",
    "SelectionPlan",
    "CatalogError",
    "SelectionError",
    "strang_sequence",
    "load_catalog",
    "bundled_catalog",
    "certify_record",
    "select_method",
    "plan_cost",
    "record_to_dict",
    "save_catalog",
]


class CatalogError(ValueError):
    """The catalog file is malformed or a record violates an invariant."""


class SelectionError(RuntimeError):
    """No candidate plan could be formed at all (e.g. empty catalog)."""


@dataclass(frozen=True)
class MethodRecord:
    """One catalog row: identity, error profile, optional coefficients."""

    name: str
    m: int
    gamma: float
    theta_max: float
    profile: MethodErrorProfile
    coefficients: SplitCoefficients | None = None
    certified: bool = False

    @property
    def is_reference(self) -> bool:
        return self.name.startswith("Strang")


@dataclass
class Catalog:
    """Ordered method table: designed rows by ascending (m, theta_max, name),
    reference rows last — the top-to-bottom scan order of the selector."""

    records: list
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        self.records = sorted(
            self.records,
            key=lambda r: (r.is_reference, r.m, r.theta_max, r.name),
        )

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)

    def get(self, name: str) -> MethodRecord:
        for r in self.records:
            if r.name == name:
                return r
        raise KeyError(name)


@dataclass(frozen=True)
class HeadPlan:
    record: MethodRecord
    n: int
    tau_beta: float  # step size in angle units (physical tau = tau_beta/beta)


@dataclass(frozen=True)
class TailPlan:
    record: MethodRecord
    tau_beta: float


@dataclass(frozen=True)
class SelectionPlan:
    head: HeadPlan | None
    tail: TailPlan | None
    certified_bound: float
    cost_degree_equivalent: int
    tolerance_met: bool = True

    def describe(self) -> str:
        parts = []
        if self.head is not None:
            parts.append(f"{self.head.n} x {self.head.record.name}")
        if self.tail is not None:
            parts.append(f"1 x {self.tail.record.name}")
        return " + ".join(parts) if parts else "(empty)"


# ---------------------------------------------------------------------------

def strang_sequence(m: int) -> SplitCoefficients:
    """m concatenated Strang steps over a unit interval:
    (1/(2m), 1/m, ..., 1/m, 1/(2m)) with all b = 1/m."""
    if m < 1:
        raise ValueError("m must be >= 1")
    a = [1.0 / (2 * m)] + [1.0 / m] * (m - 1) + [1.0 / (2 * m)]
    b = [1.0 / m] * m
    return SplitCoefficients(a=tuple(a), b=tuple(b))


# ---------------------------------------------------------------------------
# loading and certification

def _agree_within_factor(stored: float, recomputed: float, factor: float = 2.0) -> bool:
    if stored <= 1e-15 and recomputed <= 1e-15:
        return True
    if stored <= 0 or recomputed <= 0:
        return False
    ratio = recomputed / stored
    return 1.0 / factor <= ratio <= factor


def certify_record(record: MethodRecord) -> tuple[bool, list]:
    """Recompute the functionals from the coefficients and compare with the
    stored profile (factor-2 agreement); also require y* >= theta_max."""
    if record.coefficients is None:
        return False, ["no coefficients: metadata-only record (uncertified)"]
    c = record.coefficients
    problems = []
    theta = record.theta_max
    y_star = stability_threshold(c)
    if y_star < theta * (1.0 - 1e-9):
        problems.append(f"recomputed y* = {y_star:.6g} below theta_max = {theta:.6g}")
        return False, problems
    p = record.profile
    recomputed = {
        "eps": epsilon_sup(c, theta),
        "delta": delta_sup(c, theta),
    }
    recomputed["mu"], recomputed["nu"] = mu_nu(c, theta, y_star=y_star)
    for key, rec_val in recomputed.items():
        stored = getattr(p, key)
        if not _agree_within_factor(stored, rec_val):
            problems.append(
                f"{key}: stored {stored:.3g} vs recomputed {rec_val:.3g} (beyond factor 2)"
            )
    return (not problems), problems


def _record_from_dict(raw: dict) -> MethodRecord:
    try:
        name = str(raw["name"])
        m = int(raw["m"])
        gamma = float(raw["gamma"])
        theta_max = float(raw["theta_max"])
        profile = MethodErrorProfile(
            theta_max=theta_max,
            y_star=float(raw["y_star"]),
            eps=float(raw["eps"]),
            mu=float(raw["mu"]),
            nu=float(raw["nu"]),
            delta=float(raw["delta"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CatalogError(f"malformed record {raw!r}: {exc}") from exc
    coeffs = None
    if "a" in raw or "b" in raw:
        try:
            coeffs = SplitCoefficients(a=raw["a"], b=raw["b"])
        except (KeyError, TypeError, ValueError) as exc:
            raise CatalogError(f"record {name}: bad coefficients: {exc}") from exc
    return MethodRecord(name=name, m=m, gamma=gamma, theta_max=theta_max,
                        profile=profile, coefficients=coeffs)


def _validate_and_certify(records: list) -> tuple[list, list]:
    kept, notes = [], []
    for rec in records:
        if abs(rec.theta_max - rec.gamma * rec.m) > 1e-12 * max(1.0, rec.theta_max):
            notes.append(
                f"rejected {rec.name}: theta_max {rec.theta_max} != gamma*m "
                f"{rec.gamma * rec.m}"
            )
            continue
        if rec.profile.y_star < rec.theta_max * (1.0 - 1e-12):
            notes.append(f"rejected {rec.name}: stored y* below theta_max")
            continue
        if rec.coefficients is not None:
            # Gap-completed designs are consistent only up to their window
            # error (the even gap forces a nonzero odd completion slope at
            # the origin), so the tolerance scales with the certified eps.
            try:
                rec.coefficients.check_consistency(
                    tol=max(1e-9, 1e3 * rec.profile.eps))
            except ValueError as exc:
                notes.append(f"rejected {rec.name}: {exc}")
                continue
            ok, problems = certify_record(rec)
            if not ok:
                notes.append(f"rejected {rec.name}: " + "; ".join(problems))
                continue
            rec = MethodRecord(rec.name, rec.m, rec.gamma, rec.theta_max,
                               rec.profile, rec.coefficients, certified=True)
        else:
            notes.append(f"{rec.name}: uncertified (metadata only)")
        kept.append(rec)
    return kept, notes


def load_catalog(path) -> Catalog:
    """Load, validate, and certify a JSON method table."""
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CatalogError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(raw, list):
        raise CatalogError("catalog file must hold a JSON array of records")
    records = [_record_from_dict(item) for item in raw]
    kept, notes = _validate_and_certify(records)
    return Catalog(records=kept, warnings=notes)


def bundled_catalog() -> Catalog:
    """The packaged table of published methods."""
    ref = resources.files("splitprop").joinpath("data/methods.json")
    raw = json.loads(ref.read_text())
    kept, notes = _validate_and_certify([_record_from_dict(item) for item in raw])
    return Catalog(records=kept, warnings=notes)


def record_to_dict(record: MethodRecord) -> dict:
    out = {
        "name": record.name,
        "m": record.m,
        "gamma": record.gamma,
        "theta_max": record.theta_max,
        "y_star": record.profile.y_star,
        "eps": record.profile.eps,
        "mu": record.profile.mu,
        "nu": record.profile.nu,
        "delta": record.profile.delta,
    }
    if record.coefficients is not None:
        out["a"] = list(record.coefficients.a)
        out["b"] = list(record.coefficients.b)
    return out


def save_catalog(records, path) -> None:
    Path(path).write_text(json.dumps([record_to_dict(r) for r in records], indent=2))


# ---------------------------------------------------------------------------
# selection

_HEAD_STAGES = 60  # composition heads are the 60-stage family by default


def _empty_plan() -> SelectionPlan:
    return SelectionPlan(head=None, tail=None, certified_bound=0.0,
                         cost_degree_equivalent=0, tolerance_met=True)


def _single_step_plan(catalog: Catalog, t_beta: float, tol: float) -> SelectionPlan | None:
    first = None
    for rec in catalog:
        if t_beta <= rec.theta_max * (1.0 + 1e-12) and rec.profile.eps <= tol:
            first = rec
            break
    if first is None:
        return None
    # among qualifiers with the same stage count, prefer the smallest bound
    best = first
    for rec in catalog:
        if (rec.m == first.m
                and t_beta <= rec.theta_max * (1.0 + 1e-12)
                and rec.profile.eps <= tol
                and rec.profile.eps < best.profile.eps):
            best = rec
    return SelectionPlan(
        head=None,
        tail=TailPlan(record=best, tau_beta=t_beta),
        certified_bound=best.profile.eps,
        cost_degree_equivalent=best.m,
        tolerance_met=True,
    )


def _composition_candidates(catalog: Catalog, t_beta: float, allow_any_head: bool):
    if allow_any_head:
        heads = list(catalog)
    else:
        heads = [r for r in catalog if r.m == _HEAD_STAGES and not r.is_reference]
    for head in heads:
        theta_h = head.theta_max
        # pure repetition: n equal steps fitting under theta_max
        n_rep = max(1, math.ceil(t_beta / theta_h - 1e-12))
        yield SelectionPlan(
            head=HeadPlan(record=head, n=n_rep, tau_beta=t_beta / n_rep),
            tail=None,
            certified_bound=nstep_bound(head.profile, n_rep),
            cost_degree_equivalent=n_rep * head.m,
            tolerance_met=True,
        )
        # head at full theta_max + one tail step on the remainder
        n = math.floor(t_beta / theta_h + 1e-12)
        if n < 1:
            continue
        remainder = t_beta - n * theta_h
        if remainder <= 1e-12 * max(1.0, t_beta):
            continue  # exact multiple already covered by repetition
        for tail in catalog:
            if remainder <= tail.theta_max * (1.0 + 1e-12):
                yield SelectionPlan(
                    head=HeadPlan(record=head, n=n, tau_beta=theta_h),
                    tail=TailPlan(record=tail, tau_beta=remainder),
                    certified_bound=combined_bound(
                        tail.profile, head.profile, n, simplified=True),
                    cost_degree_equivalent=n * head.m + tail.m,
                    tolerance_met=True,
                )


def _plan_rank(plan: SelectionPlan) -> tuple:
    tail_m = plan.tail.record.m if plan.tail is not None else 0
    head_name = plan.head.record.name if plan.head is not None else ""
    tail_name = plan.tail.record.name if plan.tail is not None else ""
    return (plan.cost_degree_equivalent, plan.certified_bound,
            tail_m, head_name, tail_name)


def select_method(t_beta: float, tol: float, catalog: Catalog,
                  allow_any_head: bool = False) -> SelectionPlan:
    """Cheapest plan whose certified bound is below tol.

    Scan order: (1) a single step of the first (then smallest-bound same-m)
    record with t_beta <= theta_max and eps <= tol; (2) otherwise compositions
    n x head + tail and pure repetitions, ranked by degree-equivalent cost,
    then bound, then fewer tail stages, then name.  If nothing meets tol the
    best-achievable plan is returned flagged tolerance_met=False.
    """
    if t_beta < 0:
        raise ValueError("t_beta must be >= 0")
    if tol <= 0:
        raise ValueError("tol must be > 0")
    if len(catalog) == 0:
        raise SelectionError("empty catalog")
    if t_beta == 0.0:
        return _empty_plan()

    single = _single_step_plan(catalog, t_beta, tol)
    if single is not None:
        return single

    candidates = list(_composition_candidates(catalog, t_beta, allow_any_head))
    if not candidates:
        raise SelectionError(
            f"no composition candidates for t_beta = {t_beta:.6g} "
            "(catalog has no usable head records)"
        )
    feasible = [p for p in candidates if p.certified_bound <= tol]
    if feasible:
        return min(feasible, key=_plan_rank)
    # nothing meets tol: report the tightest-bound plan, cheapest first on ties
    best = min(candidates, key=lambda p: (p.certified_bound, _plan_rank(p)))
    return SelectionPlan(head=best.head, tail=best.tail,
                         certified_bound=best.certified_bound,
                         cost_degree_equivalent=best.cost_degree_equivalent,
                         tolerance_met=False)


def plan_cost(plan: SelectionPlan) -> tuple[int, int]:
    """(real_products, degree_equivalent): 2*degree + one extra real product
    per splitting launch (the closing a_{m+1} stage)."""
    degree = 0
    launches = 0
    if plan.head is not None:
        degree += plan.head.n * plan.head.record.m
        launches += plan.head.n
    if plan.tail is not None:
        degree += plan.tail.record.m
        launches += 1
    return 2 * degree + launches, degree
