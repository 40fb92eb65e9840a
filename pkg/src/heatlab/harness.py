"""Scenario orchestration: sweeps, margin checks, counterexamples, reports.

Suprema here are grid maxima, not certified global maxima; every report
carries a refinement-stability flag (doubling the space resolution must move
no per-t supremum by more than 1%).  Points whose evaluation error cannot
certify a margin at the scenario tolerance are excluded and listed, never
silently dropped.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .bounds import (
    AlphaFamily,
    BoundConstants,
    gaussian_envelope,
    harnack_rhs,
    minimal_constant_fit,
    rhs_classical,
    rhs_kernel_gradient,
    rhs_noncompact,
    rhs_sharp_compact,
)
from .calculus import MixtureSolution, mixture_grid_log_derivatives
from .errors import DomainError, IncompatibleCheckError, TruncationError
from .grids import GridSpec, space_points
from .kernels import (
    grid_log_derivatives,
    h3_neg_t_lap_ln,
    kernel_sup,
    kernel_validity_threshold,
)
from .manifolds import (
    Circle,
    Euclidean,
    FlatTorus,
    Hyperbolic3,
    Manifold,
    Product,
    RevolutionSurface,
    Sphere2,
    chart_arity,
    curvature_summary,
    diameter_estimate,
    distance,
    format_manifold,
)

BOUND_NAMES = ("sharp-compact", "classical", "hamilton", "kernel-gradient",
               "harnack", "gaussian-envelope", "noncompact")

MAX_CSV_ROWS = 1 << 20
LARGE_TIME_PROBES = (1.0, 10.0, 100.0)


def violation_tolerance(m: Manifold) -> float:
    """Scenario tolerance: truncation-dominated manifolds get looser classes."""
    match m:
        case RevolutionSurface():
            return 1e-5
        case Sphere2():
            return 1e-6
        case Product(left, right):
            return max(violation_tolerance(left), violation_tolerance(right))
        case _:
            return 1e-8


def _coords(x) -> list[float]:
    return [float(c) for c in np.atleast_1d(x)]


# ---------------------------------------------------------------------------
# sup t*Y sweeps
# ---------------------------------------------------------------------------

def _ty_sup_single(m: Manifold, X, t: float, pole, tol: float, alpha: float = 1.0):
    """(sup, argmax coords, n_excluded) of t*Y_alpha over X for one pole."""
    ev = grid_log_derivatives(m, X, t, pole)
    ty = t * (ev.gnsq - alpha * ev.dtln)
    ok = ev.resolved & (t * ev.err <= tol)
    n_exc = int(np.sum(~ok))
    if not np.any(ok):
        return -math.inf, None, n_exc
    masked = np.where(ok, ty, -math.inf)
    i = int(np.argmax(masked))
    return float(masked[i]), tuple(float(c) for c in X[i]), n_exc


def _factorizable(m: Manifold) -> bool:
    return isinstance(m, (FlatTorus, Product))


def _factors(m: Manifold):
    """Flatten a product-structured manifold into (factor, pole-slices)."""
    if isinstance(m, FlatTorus):
        return [Circle(L) for L in m.lengths]
    if isinstance(m, Product):
        return _factors(m.left) + _factors(m.right)
    return [m]


def _split_pole(m: Manifold, pole):
    out = []
    pole = np.atleast_1d(np.asarray(pole, dtype=float))
    i = 0
    for f in _factors(m):
        k = chart_arity(f)
        out.append(pole[i:i + k])
        i += k
    return out


def _ty_sup(m: Manifold, t: float, pole, res: int, window: float, tol: float,
            alpha: float = 1.0):
    """Per-t supremum of t*Y_alpha; products decompose exactly because t*Y
    on a metric product is the sum of the factor quantities on a product grid."""
    if _factorizable(m) and alpha == 1.0:
        total, arg, exc = 0.0, [], 0
        for f, p in zip(_factors(m), _split_pole(m, pole)):
            s, a, e = _ty_sup(f, t, p, res, window, tol)
            if a is None:
                return -math.inf, None, e
            total += s
            arg.extend(a)
            exc += e
        return total, tuple(arg), exc
    if isinstance(m, RevolutionSurface) and alpha == 1.0:
        from .kernels import revsurface_ty_grid
        u = np.arange(res) * (2 * np.pi / res)
        v = np.arange(res) * (2 * np.pi / res)
        ty, err, resolved = revsurface_ty_grid(m, u, v, t, pole)
        ok = resolved & (err <= tol)
        n_exc = int(np.sum(~ok))
        if not np.any(ok):
            return -math.inf, None, n_exc
        masked = np.where(ok, ty, -math.inf)
        iu, iv = np.unravel_index(int(np.argmax(masked)), masked.shape)
        return float(masked[iu, iv]), (float(u[iu]), float(v[iv])), n_exc
    X = space_points(m, res, window)
    return _ty_sup_single(m, X, t, pole, tol, alpha)


@dataclass
class SweepResult:
    manifold: str
    grid: dict
    rows: list            # dicts: t, sup_ty, argmax_x, pole, excluded
    refinement_stable: bool
    max_refinement_shift: float
    large_time: dict | None
    wall_time_s: float

    def to_dict(self) -> dict:
        return {
            "schema": "heatlab-sweep-v1",
            "manifold": self.manifold,
            "grid": self.grid,
            "rows": self.rows,
            "refinement_stable": self.refinement_stable,
            "max_refinement_shift": self.max_refinement_shift,
            "large_time": self.large_time,
            "wall_time_s": self.wall_time_s,
            "version": __version__,
        }


def sweep_sup_tY(m: Manifold, g: GridSpec, refine: bool = True) -> SweepResult:
    """Per-t supremum of t*Y over the space grid and pole set."""
    t_start = time.perf_counter()
    _check_grid_times(m, g)
    tol = violation_tolerance(m)
    rows = []
    shifts = []
    for t in g.t_points:
        best = (-math.inf, None, None, 0)
        exc = 0
        for pole in g.pole_set:
            s, a, e = _ty_sup(m, t, pole, g.space_resolution, g.window, tol)
            exc += e
            if s > best[0]:
                best = (s, a, pole, e)
        sup2 = None
        if refine:
            sup2 = max(
                _ty_sup(m, t, pole, 2 * g.space_resolution, g.window, tol)[0]
                for pole in g.pole_set)
            denom = max(abs(best[0]), 1e-12)
            shifts.append(abs(sup2 - best[0]) / denom if math.isfinite(best[0]) else 0.0)
        rows.append({
            "t": float(t),
            "sup_ty": best[0] if math.isfinite(best[0]) else None,
            "argmax_x": list(best[1]) if best[1] is not None else None,
            "pole": _coords(best[2]) if best[2] is not None else None,
            "excluded": exc,
        })
    max_shift = max(shifts) if shifts else 0.0
    return SweepResult(
        manifold=format_manifold(m),
        grid=_grid_dict(g),
        rows=rows,
        refinement_stable=(max_shift < 0.01),
        max_refinement_shift=max_shift,
        large_time=_large_time_metric(m, g) if m.compact else None,
        wall_time_s=time.perf_counter() - t_start)


def _large_time_metric(m: Manifold, g: GridSpec) -> dict:
    """sup_tY(t)/t at the long-horizon probes; recorded, never asserted."""
    tol = violation_tolerance(m)
    thr = kernel_validity_threshold(m)
    vals = {}
    for t in LARGE_TIME_PROBES:
        if t < thr:
            continue
        sup = max(_ty_sup(m, t, pole, g.space_resolution, g.window, tol)[0]
                  for pole in g.pole_set)
        vals[f"{t:g}"] = sup / t
    ratios = list(vals.values())
    return {"sup_ty_over_t": vals,
            "decreasing": all(b <= a for a, b in zip(ratios, ratios[1:]))}


def _check_grid_times(m: Manifold, g: GridSpec):
    thr = kernel_validity_threshold(m)
    if g.t_points[0] < thr:
        raise TruncationError(
            f"t grid starts at {g.t_points[0]} but kernel evaluation on "
            f"{format_manifold(m)} is certified only for t >= {thr}; "
            "raise the grid floor or rebuild the spectral model")


def _grid_dict(g: GridSpec) -> dict:
    return {
        "t_lo": g.t_points[0], "t_hi": g.t_points[-1], "t_count": len(g.t_points),
        "space_resolution": g.space_resolution, "poles": len(g.pole_set),
        "window": g.window,
    }


# ---------------------------------------------------------------------------
# check reports
# ---------------------------------------------------------------------------

@dataclass
class CheckReport:
    scenario: str
    manifold: str
    bound: str
    constants: dict
    grid: dict
    seed: int | None
    tolerance: float
    sup_lhs: float | None
    sup_lhs_arg: dict | None
    min_margin: float | None
    min_margin_arg: dict | None
    violations: list
    excluded: list
    passed: bool
    fit: dict | None = None
    diam_sensitivity: dict | None = None
    large_time: dict | None = None
    refinement: dict | None = None
    notes: list = field(default_factory=list)
    wall_time_s: float = 0.0
    csv_rows: list | None = None     # populated on request, not serialized

    def to_dict(self) -> dict:
        return {
            "schema": "heatlab-check-v1",
            "scenario": self.scenario,
            "manifold": self.manifold,
            "bound": self.bound,
            "constants": self.constants,
            "grid": self.grid,
            "seed": self.seed,
            "tolerance": self.tolerance,
            "sup_tY": self.sup_lhs,
            "sup_tY_arg": self.sup_lhs_arg,
            "min_margin": self.min_margin,
            "min_margin_arg": self.min_margin_arg,
            "violations": self.violations,
            "excluded": self.excluded,
            "passed": self.passed,
            "fit": self.fit,
            "diam_sensitivity": self.diam_sensitivity,
            "large_time": self.large_time,
            "refinement": self.refinement,
            "notes": self.notes,
            "wall_time_s": self.wall_time_s,
            "version": __version__,
        }


class _Accumulator:
    """Collects margins, violations, exclusions and optional CSV rows."""

    def __init__(self, manifold_str: str, tol: float, want_csv: bool):
        self.manifold = manifold_str
        self.tol = tol
        self.want_csv = want_csv
        self.sup = -math.inf
        self.sup_arg = None
        self.min_margin = math.inf
        self.min_arg = None
        self.violations = []
        self.excluded = []
        self.rows = [] if want_csv else None

    def add(self, t: float, pole, X, lhs, rhs, ok):
        lhs = np.asarray(lhs, dtype=float)
        rhs = np.broadcast_to(np.asarray(rhs, dtype=float), lhs.shape)
        self.add_margins(t, pole, X, lhs, rhs, rhs - lhs, ok)

    def add_margins(self, t: float, pole, X, lhs, rhs, margins, ok):
        """Track sup(lhs), min(margin), violations; lhs is display-only."""
        lhs = np.asarray(lhs, dtype=float)
        rhs = np.broadcast_to(np.asarray(rhs, dtype=float), lhs.shape)
        margins = np.asarray(margins, dtype=float)
        ok = np.broadcast_to(np.asarray(ok, dtype=bool), lhs.shape)
        n_exc = int(np.sum(~ok))
        if n_exc:
            j = int(np.argmin(ok))
            self.excluded.append({"t": float(t), "pole": _coords(pole),
                                  "count": n_exc, "example_x": _coords(X[j])})
        if np.any(ok):
            masked_lhs = np.where(ok, lhs, -math.inf)
            i = int(np.argmax(masked_lhs))
            if masked_lhs[i] > self.sup:
                self.sup = float(masked_lhs[i])
                self.sup_arg = {"t": float(t), "x": _coords(X[i]), "pole": _coords(pole)}
            masked_m = np.where(ok, margins, math.inf)
            k = int(np.argmin(masked_m))
            if masked_m[k] < self.min_margin:
                self.min_margin = float(masked_m[k])
                self.min_arg = {"t": float(t), "x": _coords(X[k]), "pole": _coords(pole)}
            bad = ok & (margins < -self.tol)
            for j in np.nonzero(bad)[0][:256]:
                self.violations.append({
                    "t": float(t), "x": _coords(X[j]), "pole": _coords(pole),
                    "lhs": float(lhs[j]), "rhs": float(rhs[j]),
                    "margin": float(margins[j])})
        if self.want_csv:
            if len(self.rows) + len(lhs) > MAX_CSV_ROWS:
                raise DomainError(
                    f"CSV dump would exceed {MAX_CSV_ROWS} rows; lower --res "
                    "or the t-grid count")
            for j in range(len(lhs)):
                self.rows.append((self.manifold, float(t),
                                  ";".join(f"{c:.17g}" for c in X[j]),
                                  ";".join(f"{c:.17g}" for c in np.atleast_1d(pole)),
                                  float(lhs[j]) if ok[j] else math.nan,
                                  float(rhs[j]), float(margins[j]) if ok[j] else math.nan))

    def finish(self, report: CheckReport) -> CheckReport:
        report.sup_lhs = self.sup if math.isfinite(self.sup) else None
        report.sup_lhs_arg = self.sup_arg
        report.min_margin = self.min_margin if math.isfinite(self.min_margin) else None
        report.min_margin_arg = self.min_arg
        report.violations = self.violations
        report.excluded = self.excluded
        report.passed = not self.violations
        report.csv_rows = self.rows
        return report


def run_check(m: Manifold, g: GridSpec, bound: str,
              constants: BoundConstants | None = None, *,
              alpha: float = 2.0, t0: float = 0.5, trials: int = 500,
              seed: int = 0, fit: bool = False, want_csv: bool = False,
              refine: bool = True) -> CheckReport:
    """Evaluate one bound over the grid and aggregate signed margins."""
    t_start = time.perf_counter()
    if bound not in BOUND_NAMES:
        raise DomainError(
            f"unknown bound {bound!r}; choose from {', '.join(BOUND_NAMES)}")
    c = constants or BoundConstants()
    _check_compat(m, bound)
    tol = violation_tolerance(m)
    acc = _Accumulator(format_manifold(m), tol, want_csv)
    report = CheckReport(
        scenario=f"check:{bound}", manifold=format_manifold(m), bound=bound,
        constants=c.as_dict(m.dim), grid=_grid_dict(g), seed=seed, tolerance=tol,
        sup_lhs=None, sup_lhs_arg=None, min_margin=None, min_margin_arg=None,
        violations=[], excluded=[], passed=False)

    handler = {
        "sharp-compact": _check_sharp_compact,
        "classical": _check_classical,
        "hamilton": _check_hamilton,
        "kernel-gradient": _check_kernel_gradient,
        "harnack": _check_harnack,
        "gaussian-envelope": _check_gaussian_envelope,
        "noncompact": _check_noncompact,
    }[bound]
    handler(m, g, c, acc, report, alpha=alpha, t0=t0, trials=trials, seed=seed)

    if fit and bound == "sharp-compact":
        report.fit = fit_sharp_constants(m, g).to_dict_inner()
    if refine and bound in ("sharp-compact", "classical", "noncompact"):
        report.refinement = _check_refinement(m, g, report)
    if m.compact:
        report.large_time = _large_time_metric(m, g)
    report.wall_time_s = time.perf_counter() - t_start
    acc.finish(report)
    report.passed = not report.violations
    return report


def _check_compat(m: Manifold, bound: str):
    compact_only = {
        "sharp-compact": "the alpha=1 compact bound has no finite right-hand "
                         "side on noncompact manifolds (hyperbolic space "
                         "already defeats it)",
        "hamilton": "the Hamilton check needs the finite kernel supremum A of "
                    "a compact manifold",
        "kernel-gradient": "the kernel-gradient bound uses the diameter",
        "gaussian-envelope": None,
    }
    if bound in ("sharp-compact", "hamilton", "kernel-gradient") and not m.compact:
        raise IncompatibleCheckError(
            f"bound '{bound}' requires a compact manifold but "
            f"{format_manifold(m)} is noncompact: {compact_only[bound]}")
    if bound == "noncompact" and m.compact:
        raise IncompatibleCheckError(
            f"bound 'noncompact' applies to euclidean or h3 kernels; "
            f"{format_manifold(m)} is compact, use 'sharp-compact'")
    if bound == "gaussian-envelope" and isinstance(m, (RevolutionSurface, Product)):
        raise IncompatibleCheckError(
            f"bound 'gaussian-envelope' needs closed-form ball volumes; "
            f"{format_manifold(m)} is outside that catalog")
    if bound == "harnack" and isinstance(m, (RevolutionSurface, Product, Hyperbolic3)):
        raise IncompatibleCheckError(
            f"bound 'harnack' is exercised on circle, flat torus, sphere and "
            f"euclidean space; got {format_manifold(m)}")


def _check_sharp_compact(m, g, c, acc, report, **kw):
    _check_grid_times(m, g)
    n = m.dim
    K = curvature_summary(m).ricci_lower
    diam_lo, diam_up = diameter_estimate(m)
    X = None if _factorizable(m) else space_points(m, g.space_resolution, g.window)
    min_margin_lower_diam = math.inf
    for t in g.t_points:
        rhs_up = float(rhs_sharp_compact(n, K, t, diam_up, c))
        rhs_lo = float(rhs_sharp_compact(n, K, t, diam_lo, c))
        for pole in g.pole_set:
            if X is None:
                # product structure: sup decomposes exactly over factors, so
                # only the composed argmax point is materialized
                s, a, e = _ty_sup(m, t, pole, g.space_resolution, g.window, acc.tol)
                if e:
                    acc.excluded.append({"t": float(t), "pole": _coords(pole),
                                         "count": e, "example_x": None})
                if a is not None:
                    acc.add(t, pole, np.array([a]), np.array([s]), rhs_up,
                            np.array([True]))
                    min_margin_lower_diam = min(min_margin_lower_diam, rhs_lo - s)
            else:
                ev = grid_log_derivatives(m, X, t, pole)
                ty = ev.ty(t)
                ok = ev.resolved & (t * ev.err <= acc.tol)
                acc.add(t, pole, X, ty, rhs_up, ok)
                if np.any(ok):
                    min_margin_lower_diam = min(
                        min_margin_lower_diam,
                        float(np.min(np.where(ok, rhs_lo - ty, math.inf))))
    if X is None and acc.want_csv:
        report.notes.append(
            "product structure: CSV rows carry composed per-(t, pole) argmax "
            "points, not the full product grid")
    report.diam_sensitivity = {
        "diam_lower": diam_lo, "diam_upper": diam_up,
        "min_margin_with_diam_lower":
            min_margin_lower_diam if math.isfinite(min_margin_lower_diam) else None,
        "note": "primary margins use the upper diameter estimate (the "
                "conservative direction for this increasing right-hand side)",
    }


def _check_classical(m, g, c, acc, report, *, alpha, **kw):
    _check_grid_times(m, g)
    n = m.dim
    K = curvature_summary(m).ricci_lower
    X = space_points(m, g.space_resolution, g.window)
    for t in g.t_points:
        rhs = float(rhs_classical(n, K, t, alpha))
        for pole in g.pole_set:
            ev = grid_log_derivatives(m, X, t, pole)
            lhs = t * (ev.gnsq - alpha * ev.dtln)
            ok = ev.resolved & (t * ev.err * max(1.0, alpha) <= acc.tol)
            acc.add(t, pole, X, lhs, rhs, ok)
    report.notes.append(f"classical bound evaluated at alpha={alpha}")


def _check_hamilton(m, g, c, acc, report, *, t0, **kw):
    K = curvature_summary(m).ricci_lower
    thr = kernel_validity_threshold(m)
    if t0 <= thr:
        raise DomainError(f"hamilton window t0={t0} must exceed the kernel "
                          f"validity threshold {thr}")
    X = space_points(m, g.space_resolution, g.window)
    count = len(g.t_points)
    ts = np.linspace(t0 / count, t0, count)
    for pole in g.pole_set:
        A = kernel_sup(m, pole, (t0, 2 * t0), g).value
        for t in ts:
            ev = grid_log_derivatives(m, X, float(t) + t0, pole)
            lhs = t * ev.gnsq
            rhs = (1 + 2 * K * t) * (math.log(A) - ev.logv)
            ok = ev.resolved & (t * ev.err <= acc.tol)
            acc.add(float(t), pole, X, lhs, rhs, ok)
    report.notes.append(
        f"f(x,t) = G(x, t+t0, y) with t0={t0}; A = grid sup of the kernel on "
        f"[t0, 2 t0] (peaked at the pole at t0, so the grid value is exact)")


def _check_kernel_gradient(m, g, c, acc, report, **kw):
    _check_grid_times(m, g)
    n = m.dim
    K = curvature_summary(m).ricci_lower
    _, diam_up = diameter_estimate(m)
    X = space_points(m, g.space_resolution, g.window)
    from .bounds import KERNEL_GRADIENT_SPLIT
    for t in g.t_points:
        regime = "small_t" if t < KERNEL_GRADIENT_SPLIT else "large_t"
        rhs = float(rhs_kernel_gradient(t, K, diam_up, c, regime, n=n))
        for pole in g.pole_set:
            ev = grid_log_derivatives(m, X, t, pole)
            lhs = t * ev.gnsq
            ok = ev.resolved & (t * ev.err <= acc.tol)
            acc.add(t, pole, X, lhs, rhs, ok)
    report.notes.append(
        f"regime split at t = {KERNEL_GRADIENT_SPLIT:g}: small_t below, large_t at or above")


def _check_harnack(m, g, c, acc, report, *, alpha, trials, seed, **kw):
    n = m.dim
    K = curvature_summary(m).ricci_lower
    X = space_points(m, g.space_resolution, g.window)
    rng = np.random.default_rng(seed)
    t_lo, t_hi = g.t_points[0], g.t_points[-1]
    if t_hi <= t_lo:
        raise DomainError(
            f"harnack sampling needs a nondegenerate time window, got "
            f"[{t_lo}, {t_hi}]")
    for k in range(trials):
        pole = g.pole_set[k % len(g.pole_set)]
        i, j = rng.integers(0, len(X), size=2)
        x, z = X[int(i)], X[int(j)]
        t1 = t_lo + rng.random() * (t_hi - t_lo) * 0.5
        t2 = t1 + (0.05 + rng.random()) * (t_hi - t1) * 0.5
        u_x = grid_log_derivatives(m, x[None, :], float(t1), pole)
        u_z = grid_log_derivatives(m, z[None, :], float(t2), pole)
        if not (u_x.resolved[0] and u_z.resolved[0]):
            acc.excluded.append({"t": float(t1), "pole": _coords(pole),
                                 "count": 1, "example_x": _coords(x)})
            continue
        lhs = float(np.exp(u_x.logv[0]))
        rhs = harnack_rhs(float(np.exp(u_z.logv[0])), float(t1), float(t2),
                          distance(m, x, z), n, K, alpha)
        acc.add(float(t1), pole, x[None, :], np.array([lhs]), np.array([rhs]),
                np.array([True]))
    report.notes.append(
        f"{trials} random (x, z, t1, t2) configurations at alpha={alpha}, seed={seed}")


def _check_gaussian_envelope(m, g, c, acc, report, **kw):
    _check_grid_times(m, g)
    X = space_points(m, g.space_resolution, g.window)
    fitted = []
    for t in g.t_points:
        for pole in g.pole_set:
            ev = grid_log_derivatives(m, X, t, pole)
            lo_up = np.array([gaussian_envelope(m, x, pole, t, c) for x in X])
            G = np.exp(ev.logv)
            margins = np.minimum(G - lo_up[:, 0], lo_up[:, 1] - G)
            ok = ev.resolved
            acc.add_margins(t, pole, X, G, lo_up[:, 1], margins, ok)
            fitted.append(_fit_envelope_c1(m, X[ok], pole, t, ev.logv[ok], c))
    report.fit = {"gaussian_c1_min_per_scene": fitted,
                  "gaussian_c1_min": max(fitted) if fitted else None}
    report.notes.append(
        "margins are min(G - lower, upper - G); fit reports the smallest "
        "gaussian_c1 that would bracket every resolved grid value")


def _fit_envelope_c1(m, X, pole, t, logv, c) -> float:
    K = curvature_summary(m).ricci_lower
    need = 0.0
    from .manifolds import ball_volume
    for xi, lv in zip(X, logv):
        d = distance(m, xi, pole)
        vol = ball_volume(m, xi, math.sqrt(t))
        up = math.exp(min(lv + math.log(vol) - c.gaussian_c2 * K * t + d**2 / (5 * t), 700))
        lo = math.exp(min(-c.gaussian_c2 * K * t - d**2 / (3 * t) - lv - math.log(vol), 700))
        need = max(need, up, lo)
    return need


def _check_noncompact(m, g, c, acc, report, **kw):
    _check_grid_times(m, g)
    n = m.dim
    K = curvature_summary(m).ricci_lower
    fam = AlphaFamily.linear()
    X = space_points(m, g.space_resolution, g.window)
    for t in g.t_points:
        for pole in g.pole_set:
            ev = grid_log_derivatives(m, X, t, pole)
            d = np.array([distance(m, x, pole) for x in X])
            rhs = rhs_noncompact(n, K, t, fam, d, 0.0, c)
            ty = ev.ty(t)
            ok = ev.resolved & (t * ev.err <= acc.tol)
            acc.add(t, pole, X, ty, rhs, ok)
    report.notes.append(
        f"kernel case: R=0, origin at the pole, alpha family {fam.name}, "
        "beta = alpha^2 (illustrative choice, not canonical)")


def _check_refinement(m: Manifold, g: GridSpec, report: CheckReport) -> dict:
    tol = violation_tolerance(m)
    shifts = []
    for t in (g.t_points[0], g.t_points[len(g.t_points) // 2], g.t_points[-1]):
        base = max(_ty_sup(m, t, p, g.space_resolution, g.window, tol)[0]
                   for p in g.pole_set)
        fine = max(_ty_sup(m, t, p, 2 * g.space_resolution, g.window, tol)[0]
                   for p in g.pole_set)
        if math.isfinite(base) and math.isfinite(fine):
            shifts.append(abs(fine - base) / max(abs(base), 1e-12))
    max_shift = max(shifts) if shifts else 0.0
    return {"max_sup_shift": max_shift, "stable": max_shift < 0.01,
            "probe_times": 3}


# ---------------------------------------------------------------------------
# fit scenario
# ---------------------------------------------------------------------------

@dataclass
class FitReport:
    manifold: str
    grid: dict
    K: float
    diam_upper: float
    c1: float | None
    c2: float | None
    feasible: bool
    refined: dict
    stable_within_factor_2: bool
    wall_time_s: float

    def to_dict_inner(self) -> dict:
        return {"c1": self.c1, "c2": self.c2, "feasible": self.feasible,
                "refined": self.refined,
                "stable_within_factor_2": self.stable_within_factor_2}

    def to_dict(self) -> dict:
        return {
            "schema": "heatlab-fit-v1", "manifold": self.manifold,
            "grid": self.grid, "K": self.K, "diam_upper": self.diam_upper,
            **self.to_dict_inner(), "wall_time_s": self.wall_time_s,
            "version": __version__,
        }


def fit_sharp_constants(m: Manifold, g: GridSpec) -> FitReport:
    """Empirical minimal (c1, c2) for the sharp compact bound, with a doubled
    resolution rerun to witness stability."""
    t_start = time.perf_counter()
    if not m.compact:
        raise IncompatibleCheckError(
            f"constant fitting needs a compact manifold, got {format_manifold(m)}")
    K = curvature_summary(m).ricci_lower
    n = m.dim
    _, diam_up = diameter_estimate(m)
    tol = violation_tolerance(m)

    def samples(res):
        out = []
        for t in g.t_points:
            sup = max(_ty_sup(m, t, p, res, g.window, tol)[0] for p in g.pole_set)
            if math.isfinite(sup):
                out.append((t, sup))
        return out

    base = minimal_constant_fit(samples(g.space_resolution), n, K, diam_up)
    fine = minimal_constant_fit(samples(2 * g.space_resolution), n, K, diam_up)

    def within2(a, b):
        if a is None or b is None:
            return a == b
        if a == 0.0 or b == 0.0:
            return a == b
        return 0.5 <= a / b <= 2.0

    stable = (base.feasible and fine.feasible
              and within2(base.c1, fine.c1) and within2(base.c2, fine.c2))
    return FitReport(
        manifold=format_manifold(m), grid=_grid_dict(g), K=K, diam_upper=diam_up,
        c1=base.c1, c2=base.c2, feasible=base.feasible,
        refined={"c1": fine.c1, "c2": fine.c2, "feasible": fine.feasible},
        stable_within_factor_2=stable,
        wall_time_s=time.perf_counter() - t_start)


# ---------------------------------------------------------------------------
# counterexample scan
# ---------------------------------------------------------------------------

def h3_counterexample_scan(r_max: float = 40.0, t: float = 1.0,
                           steps: int = 40) -> dict:
    """-t Delta ln G on hyperbolic 3-space against the linear asymptote
    r + 2t + 1/2; the residual decays like O(1/r), witnessing unbounded t*Y."""
    if r_max <= 1:
        raise DomainError(f"r_max must exceed 1, got {r_max}")
    if t <= 0:
        raise DomainError(f"t must be positive, got {t}")
    r = np.linspace(r_max / steps, r_max, steps)
    ty = h3_neg_t_lap_ln(r, t)
    asym = r + 2 * t + 0.5
    residual = ty - asym
    upper = r >= r_max / 2
    logs = np.log(np.abs(residual[upper]))
    exponent = float(np.polyfit(np.log(r[upper]), logs, 1)[0])
    rows = [{"r": float(a), "ty": float(b), "asymptote": float(c),
             "residual": float(d)}
            for a, b, c, d in zip(r, ty, asym, residual)]
    return {
        "schema": "heatlab-h3scan-v1",
        "t": t, "r_max": r_max, "steps": steps,
        "rows": rows,
        "fitted_decay_exponent": exponent,
        "small_r_limit": float(h3_neg_t_lap_ln(np.array([1e-8]), t)[0]),
        "small_r_expected": 1.5 + t,
        "version": __version__,
    }


# ---------------------------------------------------------------------------
# product additivity
# ---------------------------------------------------------------------------

def product_additivity_check(m0: Manifold, g: GridSpec, points: int = 200,
                             z_offsets=(0.0, 0.7), seed: int = 0) -> dict:
    """t*Y on Product(m0, R^1) must equal t*Y on m0 plus exactly 1/2.

    The euclidean line factor contributes 1/2 at every point and time, so the
    product admits the same t-scaled bound with n/2 shifted to (n+1)/2.
    """
    if not m0.compact:
        raise IncompatibleCheckError(
            f"product additivity check expects a compact base, got {format_manifold(m0)}")
    prod = Product(m0, Euclidean(1))
    if m0.dim == 1:
        X0 = space_points(m0, g.space_resolution, g.window)
        if len(X0) > points:
            idx = np.linspace(0, len(X0) - 1, points).astype(int)
            X0 = X0[idx]
    else:
        # 2-d bases get seeded random chart points (even grids would oversample
        # chart poles on the sphere)
        rng = np.random.default_rng(seed)
        if isinstance(m0, Sphere2):
            theta = np.arccos(1 - 2 * rng.random(points))
            phi = 2 * np.pi * rng.random(points)
            X0 = np.stack([theta, phi], axis=1)
        else:
            X0 = rng.random((points, chart_arity(m0))) * (2 * np.pi)
    pole0 = np.asarray(g.pole_set[0], dtype=float)
    tol = violation_tolerance(m0)
    worst = 0.0
    n_checked = 0
    excluded = 0
    for t in g.t_points:
        ev0 = grid_log_derivatives(m0, X0, t, pole0)
        for z in z_offsets:
            Xp = np.hstack([X0, np.full((len(X0), 1), z)])
            evp = grid_log_derivatives(prod, Xp, t, np.concatenate([pole0, [0.0]]))
            ok = ev0.resolved & evp.resolved & (t * (ev0.err + evp.err) <= max(tol, 1e-9))
            dev = np.abs(evp.ty(t) - (ev0.ty(t) + 0.5))
            if np.any(ok):
                worst = max(worst, float(dev[ok].max()))
            n_checked += int(ok.sum())
            excluded += int((~ok).sum())
    # exact kernels admit a much tighter additivity tolerance than the
    # general violation class
    add_tol = 1e-10 if isinstance(m0, (Circle, FlatTorus)) else violation_tolerance(m0)
    return {
        "schema": "heatlab-product-v1",
        "base_manifold": format_manifold(m0),
        "product_manifold": format_manifold(prod),
        "points_checked": n_checked,
        "excluded": excluded,
        "max_additivity_deviation": worst,
        "expected_shift": 0.5,
        "tolerance": add_tol,
        "passed": bool(worst <= add_tol),
        "version": __version__,
    }


# ---------------------------------------------------------------------------
# transfer argument
# ---------------------------------------------------------------------------

def transfer_check(m: Manifold, trials: int = 50, seed: int = 0,
                   g: GridSpec | None = None) -> dict:
    """Random positive mixtures must obey grid-max t*Y[u] <= source-max t*Y[G].

    The Cauchy-Schwarz superposition argument makes this exact pointwise, so
    any gap beyond evaluation noise is a bug in the mixture calculus.
    """
    if not isinstance(m, (Circle, FlatTorus)):
        raise IncompatibleCheckError(
            f"transfer check runs on circle and flat torus (fast exact "
            f"kernels); got {format_manifold(m)}")
    if g is None:
        g = GridSpec.build(m, tgrid="0.05:2:log:6", res=128)
    rng = np.random.default_rng(seed)
    X = space_points(m, g.space_resolution, g.window)
    lengths = m.lengths if isinstance(m, FlatTorus) else (m.circumference,)
    worst_gap = -math.inf
    results = []
    for trial in range(trials):
        n_src = int(rng.integers(1, 6))
        coords = [tuple(float(rng.random() * L) for L in lengths) for _ in range(n_src)]
        weights = [float(10.0 ** rng.uniform(-3, 3)) for _ in range(n_src)]
        mix = MixtureSolution(m, tuple(zip(coords, weights)))
        mix_max = -math.inf
        src_max = -math.inf
        for t in g.t_points:
            evu = mixture_grid_log_derivatives(mix, X, t)
            tyu = evu.ty(t)
            mix_max = max(mix_max, float(np.max(np.where(evu.resolved, tyu, -math.inf))))
            for y in coords:
                evg = grid_log_derivatives(m, X, t, np.asarray(y))
                src_max = max(src_max, float(np.max(evg.ty(t))))
        gap = mix_max - src_max
        worst_gap = max(worst_gap, gap)
        results.append({"trial": trial, "sources": n_src,
                        "mix_max": mix_max, "source_max": src_max, "gap": gap})
    return {
        "schema": "heatlab-transfer-v1",
        "manifold": format_manifold(m),
        "trials": trials, "seed": seed,
        "grid": _grid_dict(g),
        "worst_gap": worst_gap,
        "all_within": bool(worst_gap <= 1e-8),
        "results": results,
        "version": __version__,
    }


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

CSV_SCHEMAS = {
    "check": "#schema=heatlab-check-v1 manifold,t,x,y,tY,rhs,margin",
    "sweep": "#schema=heatlab-sweep-v1 manifold,t,sup_tY,argmax_x,pole,excluded",
    "h3scan": "#schema=heatlab-h3scan-v1 r,tY,asymptote,residual",
}


def report_to_json(report_dict: dict) -> str:
    """Stable-key-order JSON; identical inputs give byte-identical aggregates."""
    return json.dumps(report_dict, indent=2, allow_nan=True)


def check_rows_to_csv(rows) -> str:
    lines = [CSV_SCHEMAS["check"], "manifold,t,x,y,tY,rhs,margin"]
    for r in rows:
        lines.append(f'{r[0]},{r[1]:.17g},"{r[2]}","{r[3]}",{r[4]:.17g},'
                     f'{r[5]:.17g},{r[6]:.17g}')
    return "\n".join(lines) + "\n"


def sweep_to_csv(res: SweepResult) -> str:
    lines = [CSV_SCHEMAS["sweep"], "manifold,t,sup_tY,argmax_x,pole,excluded"]
    for row in res.rows:
        argx = ";".join(f"{c:.17g}" for c in row["argmax_x"]) if row["argmax_x"] else ""
        pole = ";".join(f"{c:.17g}" for c in row["pole"]) if row["pole"] else ""
        sup = f'{row["sup_ty"]:.17g}' if row["sup_ty"] is not None else "nan"
        lines.append(f'{res.manifold},{row["t"]:.17g},{sup},"{argx}","{pole}",'
                     f'{row["excluded"]}')
    return "\n".join(lines) + "\n"


def h3scan_to_csv(scan: dict) -> str:
    lines = [CSV_SCHEMAS["h3scan"], "r,tY,asymptote,residual"]
    for row in scan["rows"]:
        lines.append(f'{row["r"]:.17g},{row["ty"]:.17g},{row["asymptote"]:.17g},'
                     f'{row["residual"]:.17g}')
    return "\n".join(lines) + "\n"


def summarize(report_dict: dict) -> str:
    """One-paragraph console summary; pure function of the report dict so the
    JSON round-trip reproduces it verbatim."""
    schema = report_dict.get("schema", "")
    if schema == "heatlab-check-v1":
        lines = [
            f"check {report_dict['bound']} on {report_dict['manifold']}: "
            f"{'PASS' if report_dict['passed'] else 'FAIL'}",
            f"  sup lhs = {report_dict['sup_tY']}",
            f"  min margin = {report_dict['min_margin']} "
            f"(tolerance {report_dict['tolerance']})",
            f"  violations: {len(report_dict['violations'])}, "
            f"excluded scenes: {len(report_dict['excluded'])}",
        ]
        if report_dict.get("fit"):
            lines.append(f"  fit: {report_dict['fit']}")
        return "\n".join(lines)
    if schema == "heatlab-sweep-v1":
        sups = [r["sup_ty"] for r in report_dict["rows"] if r["sup_ty"] is not None]
        return (f"sweep on {report_dict['manifold']}: {len(report_dict['rows'])} "
                f"times, sup tY in [{min(sups):.6g}, {max(sups):.6g}], "
                f"refinement {'stable' if report_dict['refinement_stable'] else 'UNSTABLE'}")
    if schema == "heatlab-h3scan-v1":
        return (f"h3 counterexample scan t={report_dict['t']}: decay exponent "
                f"{report_dict['fitted_decay_exponent']:.3f}, small-r limit "
                f"{report_dict['small_r_limit']:.6f} "
                f"(expected {report_dict['small_r_expected']:.6f})")
    if schema == "heatlab-transfer-v1":
        return (f"transfer check on {report_dict['manifold']}: worst gap "
                f"{report_dict['worst_gap']:.3g} over {report_dict['trials']} "
                f"mixtures: {'PASS' if report_dict['all_within'] else 'FAIL'}")
    if schema == "heatlab-product-v1":
        return (f"product additivity on {report_dict['base_manifold']}: max "
                f"deviation {report_dict['max_additivity_deviation']:.3g} over "
                f"{report_dict['points_checked']} points")
    if schema == "heatlab-fit-v1":
        return (f"fit on {report_dict['manifold']}: (c1, c2) = "
                f"({report_dict['c1']}, {report_dict['c2']}), stable x2: "
                f"{report_dict['stable_within_factor_2']}")
    return json.dumps(report_dict)[:200]
