"""Heat-kernel evaluation G(x, t, y) and log-derivatives for the catalog.

Evaluation routes:

* Euclidean, Hyperbolic3: closed forms, analytic derivatives (the Laplacian
  of ln G comes from its own formula, so the heat-equation identity is a real
  cross-check there).
* Circle, FlatTorus: wrapped-Gaussian image sums, term-wise derivatives.
  All image terms are positive, so the value has no cancellation floor.
* Sphere2: Legendre series in w = cos(geodesic angle); derivatives through
  dG/dw, which stays finite at the antipode.  The series has a float rounding
  floor ~ eps * sum|terms|; points below it are reported unresolved.
* RevolutionSurface: spectral sum from a SpectralModel (built and cached on
  demand), term-wise derivatives with certified truncation tails.
* Product: factor kernels multiply; log-derivatives concatenate/add.

Every vectorized evaluation carries an error estimate combining truncation
tails and rounding floors; the harness uses it to exclude (and list) points
that cannot be certified at the requested tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import spectral
from .errors import (
    DomainError,
    InvalidPointError,
    TruncationError,
    UnresolvedEvaluationError,
    UnsupportedManifoldError,
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
    chart_geometry,
    format_manifold,
    reduce_point,
)

EPS = np.finfo(float).eps
_NOISE = 64.0 * EPS          # rounding-floor factor on abs-sums of series
_IMAGE_LOG_CUT = 60.0        # dropped wrapped-Gaussian images are e^-60 relative
SPHERE_MIN_TAU = 0.01        # refuse t/R^2 below this rather than lose precision


@dataclass(frozen=True)
class KernelEvaluation:
    """A kernel value with its truncation error bound."""
    value: float
    log_value: float
    tail_bound: float


@dataclass(frozen=True)
class LogDerivatives:
    """(grad ln u, Delta ln u, dt ln u) at a space-time point.

    grad_ln holds chart components; grad_norm_sq is the metric norm squared.
    method is one of 'analytic', 'series_termwise', 'finite_difference'.
    """
    grad_ln: tuple[float, ...]
    grad_norm_sq: float
    lap_ln: float
    dt_ln: float
    method: str
    error_estimate: float

    def heat_identity_residual(self) -> float:
        """|grad ln u|^2 - dt ln u + lap ln u; zero for heat solutions."""
        return self.grad_norm_sq - self.dt_ln + self.lap_ln


@dataclass
class GridEval:
    """Vectorized log-derivative evaluation over P points (internal)."""
    logv: np.ndarray        # (P,) log kernel value; -inf where unresolved
    grad: np.ndarray        # (P, arity) chart components of grad ln
    gnsq: np.ndarray        # (P,)
    dtln: np.ndarray        # (P,)
    lapln: np.ndarray       # (P,)
    err: np.ndarray         # (P,) error estimate on gnsq and dtln combined
    value_tail: np.ndarray  # (P,) absolute truncation bound on the value
    resolved: np.ndarray    # (P,) bool
    method: str

    @property
    def value(self) -> np.ndarray:
        return np.exp(self.logv)

    def ty(self, t: float) -> np.ndarray:
        return t * (self.gnsq - self.dtln)


# ---------------------------------------------------------------------------
# family evaluators (vectorized over points)
# ---------------------------------------------------------------------------

def _euclidean_eval(m: Euclidean, X, t, y) -> GridEval:
    diff = X - y[None, :]
    dsq = np.sum(diff**2, axis=1)
    n = m.n
    logv = -(n / 2) * math.log(4 * math.pi * t) - dsq / (4 * t)
    grad = -diff / (2 * t)
    gnsq = dsq / (4 * t**2)
    dtln = -n / (2 * t) + dsq / (4 * t**2)
    lapln = np.full_like(dsq, -n / (2 * t))
    err = 1e-13 * (1.0 + gnsq + np.abs(dtln))
    P = len(dsq)
    return GridEval(logv, grad, gnsq, dtln, lapln, err,
                    np.zeros(P), np.ones(P, bool), "analytic")


def _circle_parts(L: float, delta: np.ndarray, t: float):
    """Image-sum pieces for one circle factor at wrapped offsets delta.

    Returns (logv, dln, dtln, err) per point; value terms are all positive so
    only eps-level rounding enters.
    """
    kmax = int(math.ceil((math.sqrt(4 * t * _IMAGE_LOG_CUT) + L) / L)) + 1
    k = np.arange(-kmax, kmax + 1)
    z = delta[:, None] + k[None, :] * L
    ex = -z**2 / (4 * t)
    emax = ex.max(axis=1, keepdims=True)
    w = np.exp(ex - emax)
    s0 = w.sum(axis=1)
    logv = emax[:, 0] + np.log(s0) - 0.5 * math.log(4 * math.pi * t)
    dln = (w * (-z / (2 * t))).sum(axis=1) / s0
    dtln = (w * (z**2 / (4 * t**2) - 1 / (2 * t))).sum(axis=1) / s0
    err = 50 * EPS * (1.0 + dln**2 + np.abs(dtln))
    return logv, dln, dtln, err


def _circle_eval(m: Circle, X, t, y) -> GridEval:
    L = m.circumference
    delta = np.mod(X[:, 0] - y[0] + L / 2, L) - L / 2
    logv, dln, dtln, err = _circle_parts(L, delta, t)
    gnsq = dln**2
    P = len(delta)
    return GridEval(logv, dln[:, None], gnsq, dtln, dtln - gnsq, err,
                    np.exp(logv) * 1e-24, np.ones(P, bool), "series_termwise")


def _flattorus_eval(m: FlatTorus, X, t, y) -> GridEval:
    P = X.shape[0]
    logv = np.zeros(P)
    dtln = np.zeros(P)
    gnsq = np.zeros(P)
    err = np.zeros(P)
    grad = np.zeros_like(X)
    for i, L in enumerate(m.lengths):
        delta = np.mod(X[:, i] - y[i] + L / 2, L) - L / 2
        lv, dln, dt, e = _circle_parts(L, delta, t)
        logv += lv
        grad[:, i] = dln
        gnsq += dln**2
        dtln += dt
        err += e
    return GridEval(logv, grad, gnsq, dtln, dtln - gnsq, err,
                    np.exp(logv) * 1e-23, np.ones(P, bool), "series_termwise")


def _sphere_lmax(tau: float, tol_terms: float = 1e-18) -> int:
    l = 8
    while (2 * l + 1) * math.exp(-l * (l + 1) * tau) > tol_terms and l < 2000:
        l += 4
    # geometric ratio of successive value terms must be < 1/2 for tail bounds
    while (2 * l + 3) / (2 * l + 1) * math.exp(-2 * (l + 1) * tau) >= 0.5:
        l += 4
    return l


def _sphere_series(w: np.ndarray, t: float, radius: float):
    """Legendre sums: G, dG/dw, dG/dt with abs-sums and truncation tails."""
    tau = t / radius**2
    if tau < SPHERE_MIN_TAU:
        raise TruncationError(
            f"sphere kernel refused at t/R^2 = {tau:.4g} < {SPHERE_MIN_TAU}; "
            "small-time evaluation would silently lose precision")
    lmax = _sphere_lmax(tau)
    norm = 1.0 / (4 * math.pi * radius**2)
    G = np.zeros_like(w)
    Gw = np.zeros_like(w)
    Gt = np.zeros_like(w)
    aG = np.zeros_like(w)
    aGw = np.zeros_like(w)
    aGt = np.zeros_like(w)
    P_nm1 = np.ones_like(w)   # P_{l-1}
    P_n = w.copy()            # P_l
    dP_nm1 = np.zeros_like(w)
    dP_n = np.ones_like(w)
    for l in range(0, lmax + 1):
        if l == 0:
            Pl, dPl = P_nm1, dP_nm1
        elif l == 1:
            Pl, dPl = P_n, dP_n
        else:
            P_new = ((2 * l - 1) * w * P_n - (l - 1) * P_nm1) / l
            dP_new = ((2 * l - 1) * (P_n + w * dP_n) - (l - 1) * dP_nm1) / l
            P_nm1, P_n = P_n, P_new
            dP_nm1, dP_n = dP_n, dP_new
            Pl, dPl = P_n, dP_n
        lam = l * (l + 1) / radius**2
        c = (2 * l + 1) * norm * math.exp(-lam * t)
        G += c * Pl
        Gw += c * dPl
        Gt += -lam * c * Pl
        aG += np.abs(c * Pl)
        aGw += np.abs(c * dPl)
        aGt += np.abs(lam * c * Pl)
    # tails: |P_l| <= 1, |P_l'| <= l(l+1)/2 on [-1, 1], ratio < 1/2 by lmax choice
    l1 = lmax + 1
    base = (2 * l1 + 1) * norm * math.exp(-l1 * (l1 + 1) * tau)
    tail_G = 2 * base
    tail_Gw = 2 * base * l1 * (l1 + 1) / 2
    tail_Gt = 2 * base * l1 * (l1 + 1) / radius**2
    return G, Gw, Gt, aG, aGw, aGt, (tail_G, tail_Gw, tail_Gt)


def _sphere_eval(m: Sphere2, X, t, y) -> GridEval:
    R = m.radius
    t1, p1 = X[:, 0], X[:, 1]
    t2, p2 = y
    w = np.cos(t1) * math.cos(t2) + np.sin(t1) * math.sin(t2) * np.cos(p1 - p2)
    w = np.clip(w, -1.0, 1.0)
    G, Gw, Gt, aG, aGw, aGt, tails = _sphere_series(w, t, R)
    noise = _NOISE * aG + tails[0]
    resolved = (G > 0) & (noise < 0.25 * np.abs(G))
    Gs = np.where(resolved, G, 1.0)
    rel = noise / Gs
    ratio_w = Gw / Gs
    one_m_w2 = np.clip(1.0 - w**2, 0.0, None)
    gnsq = ratio_w**2 * one_m_w2 / R**2
    dtln = Gt / Gs
    # chart components through dw/dtheta, dw/dphi
    dw_dt1 = -np.sin(t1) * math.cos(t2) + np.cos(t1) * math.sin(t2) * np.cos(p1 - p2)
    dw_dp1 = -np.sin(t1) * math.sin(t2) * np.sin(p1 - p2)
    grad = np.stack([ratio_w * dw_dt1, ratio_w * dw_dp1], axis=1)
    e_w = (_NOISE * aGw + tails[1]) / Gs + np.abs(ratio_w) * rel
    e_t = (_NOISE * aGt + tails[2]) / Gs + np.abs(dtln) * rel
    err = 2 * np.abs(ratio_w) * one_m_w2 / R**2 * e_w + e_t + 1e-14
    logv = np.where(resolved, np.log(np.abs(Gs)), -np.inf)
    return GridEval(logv, grad, gnsq, dtln, dtln - gnsq, err,
                    np.full_like(w, tails[0]), resolved, "series_termwise")


def h3_grad_ln_radial(r, t):
    """d/dr ln G on H3: 1/r - coth r - r/(2t), series-protected near r = 0."""
    r = np.asarray(r, dtype=float)
    small = np.abs(r) < 1e-3
    rs = np.where(small, 1.0, r)
    direct = 1.0 / rs - 1.0 / np.tanh(rs)
    series = -r / 3 + r**3 / 45
    return np.where(small, series, direct) - r / (2 * t)


def h3_neg_t_lap_ln(r, t):
    """E(r, t) = -t * Delta ln G; the 1/r^2 pieces cancel, so use the series
    expansion below r = 1e-3 to dodge catastrophic cancellation."""
    r = np.asarray(r, dtype=float)
    small = np.abs(r) < 1e-3
    rs = np.where(small, 1.0, r)
    c = 1.0 / np.tanh(rs)
    direct = t / rs**2 + 0.5 + t + t * c**2 - 2 * t * c / rs + rs * c
    series = 1.5 + t + r**2 * (1.0 / 3.0 + t / 9.0)
    return np.where(small, series, direct)


def _h3_eval(m: Hyperbolic3, X, t, y) -> GridEval:
    if abs(float(y[0])) > 0:
        raise InvalidPointError(
            "hyperbolic kernel evaluations use the radial chart with the pole "
            "at the origin; pass y = (0,)")
    r = np.abs(X[:, 0])
    small = r < 1e-4
    rs = np.where(small, 1.0, r)
    # log(r/sinh r) = log(2r) - r - log1p(-e^{-2r}), overflow-free for large r
    log_r_sinh = np.where(small, -r**2 / 6 + r**4 / 180,
                          np.log(2 * rs) - rs - np.log1p(-np.exp(-2 * rs)))
    logv = -1.5 * math.log(4 * math.pi * t) + log_r_sinh - t - r**2 / (4 * t)
    dr = h3_grad_ln_radial(r, t) * np.sign(X[:, 0] + (X[:, 0] == 0))
    gnsq = dr**2
    dtln = -1.5 / t - 1.0 + r**2 / (4 * t**2)
    lapln = -h3_neg_t_lap_ln(r, t) / t
    err = 1e-12 * (1.0 + gnsq + np.abs(dtln) + np.abs(lapln))
    P = len(r)
    return GridEval(logv, dr[:, None], gnsq, dtln, lapln, err,
                    np.zeros(P), np.ones(P, bool), "analytic")


def _spectral_algebra(out: dict, rho: np.ndarray, a: float) -> dict:
    """Log-derivative algebra on raw spectral sums; shape-agnostic (rho must
    broadcast against the value arrays)."""
    tails = out["tails"]
    G = out["value"]
    noise = _NOISE * out["abs_value"] + tails["value"]
    resolved = (G > 0) & (noise < 0.25 * np.abs(G))
    Gs = np.where(resolved, G, 1.0)
    rel = noise / Gs
    du_ln = out["du"] / Gs
    dv_ln = out["dv"] / Gs
    dtln = out["dt"] / Gs
    gnsq = du_ln**2 / rho**2 + dv_ln**2 / a**2
    e_u = (_NOISE * out["abs_du"] + tails["grad_u"]) / Gs + np.abs(du_ln) * rel
    e_v = (_NOISE * out["abs_dv"] + tails["grad_v"]) / Gs + np.abs(dv_ln) * rel
    e_t = (_NOISE * out["abs_dt"] + tails["dt"]) / Gs + np.abs(dtln) * rel
    err = (2 * np.abs(du_ln) / rho**2 * e_u + 2 * np.abs(dv_ln) / a**2 * e_v
           + e_t + 1e-14)
    logv = np.where(resolved, np.log(np.abs(Gs)), -np.inf)
    return {"logv": logv, "du_ln": du_ln, "dv_ln": dv_ln, "gnsq": gnsq,
            "dtln": dtln, "err": err, "resolved": resolved,
            "value_tail": np.full_like(G, tails["value"])}


def _revsurface_eval(m: RevolutionSurface, X, t, y) -> GridEval:
    model = get_spectral_model(m)
    out = spectral.eval_points(model, X, t, y)
    rho = np.asarray(m.profile.rho(X[:, 1]), dtype=float)
    alg = _spectral_algebra(out, rho, m.profile.a)
    grad = np.stack([alg["du_ln"], alg["dv_ln"]], axis=1)
    return GridEval(alg["logv"], grad, alg["gnsq"], alg["dtln"],
                    alg["dtln"] - alg["gnsq"], alg["err"], alg["value_tail"],
                    alg["resolved"], "series_termwise")


def revsurface_ty_grid(m: RevolutionSurface, u: np.ndarray, v: np.ndarray,
                       t: float, y) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(t*Y, error, resolved) on the tensor grid u x v; the tensor-product
    structure of the spectral sum makes this far cheaper than scattered points."""
    model = get_spectral_model(m)
    out = spectral.eval_grid(model, u, v, t, y)
    rho = np.asarray(m.profile.rho(v), dtype=float)[None, :]
    alg = _spectral_algebra(out, rho, m.profile.a)
    ty = t * (alg["gnsq"] - alg["dtln"])
    return ty, t * alg["err"], alg["resolved"]


def _product_eval(m: Product, X, t, y) -> GridEval:
    kl = chart_arity(m.left)
    el = grid_log_derivatives(m.left, X[:, :kl], t, y[:kl])
    er = grid_log_derivatives(m.right, X[:, kl:], t, y[kl:])
    method = "analytic" if el.method == er.method == "analytic" else "series_termwise"
    return GridEval(
        logv=el.logv + er.logv,
        grad=np.hstack([el.grad, er.grad]),
        gnsq=el.gnsq + er.gnsq,
        dtln=el.dtln + er.dtln,
        lapln=el.lapln + er.lapln,
        err=el.err + er.err,
        value_tail=el.value_tail * np.exp(er.logv) + er.value_tail * np.exp(el.logv),
        resolved=el.resolved & er.resolved,
        method=method)


# ---------------------------------------------------------------------------
# dispatch and public API
# ---------------------------------------------------------------------------

_MODEL_CACHE: dict = {}


def get_spectral_model(m: RevolutionSurface, grid_n: int | None = None,
                       tol: float = spectral.DEFAULT_TOL,
                       t_min: float = spectral.DEFAULT_T_MIN,
                       cache_dir: str | None = None) -> spectral.SpectralModel:
    """Build (or fetch) the spectral model backing kernel evaluation on m."""
    n = grid_n or spectral.DEFAULT_GRID_N
    key = (m.profile.cache_key(), n, tol, t_min)
    if key not in _MODEL_CACHE:
        _MODEL_CACHE[key] = spectral.build_spectral_model(
            m.profile, grid_n=n, tol=tol, t_min=t_min, cache_dir=cache_dir)
    return _MODEL_CACHE[key]


def kernel_validity_threshold(m: Manifold) -> float:
    """Smallest t at which kernel evaluation is certified for m."""
    match m:
        case RevolutionSurface():
            return spectral.DEFAULT_T_MIN
        case Sphere2(radius):
            return SPHERE_MIN_TAU * radius**2
        case Product(left, right):
            return max(kernel_validity_threshold(left), kernel_validity_threshold(right))
        case _:
            return 0.0


def grid_log_derivatives(m: Manifold, X, t: float, y) -> GridEval:
    """Vectorized kernel log-derivatives at points X (P, arity), pole y."""
    if t <= 0:
        raise DomainError(f"kernel time must be positive, got t={t}")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    match m:
        case Euclidean():
            return _euclidean_eval(m, X, t, y)
        case Circle():
            return _circle_eval(m, X, t, y)
        case FlatTorus():
            return _flattorus_eval(m, X, t, y)
        case Sphere2():
            return _sphere_eval(m, X, t, y)
        case Hyperbolic3():
            return _h3_eval(m, X, t, y)
        case RevolutionSurface():
            return _revsurface_eval(m, X, t, y)
        case Product():
            return _product_eval(m, X, t, y)
    raise UnsupportedManifoldError(f"no kernel for {m!r}")


def kernel_value(m: Manifold, x, t: float, y) -> KernelEvaluation:
    """G(x, t, y) with a certified truncation bound.

    Raises UnresolvedEvaluationError when the value sits below the series
    rounding/truncation floor, TruncationError when t is below the validity
    threshold of the evaluation route.
    """
    xa = reduce_point(m, x)
    ya = reduce_point(m, y)
    ev = grid_log_derivatives(m, xa[None, :], t, ya)
    if not ev.resolved[0]:
        raise UnresolvedEvaluationError(
            f"kernel value at x={x}, t={t} on {format_manifold(m)} is below "
            "the truncation/rounding floor and cannot be certified")
    value = float(np.exp(ev.logv[0]))
    return KernelEvaluation(value=value, log_value=float(ev.logv[0]),
                            tail_bound=float(ev.value_tail[0]))


def kernel_log_derivatives(m: Manifold, x, t: float, y) -> LogDerivatives:
    """Log-derivatives of the kernel at (x, t) for pole y.

    Term-wise series differentiation when certified; falls back to finite
    differences (method flag set) if the differentiated tails cannot resolve
    the derivatives while the value itself is fine.
    """
    xa = reduce_point(m, x)
    ya = reduce_point(m, y)
    ev = grid_log_derivatives(m, xa[None, :], t, ya)
    if not ev.resolved[0]:
        raise UnresolvedEvaluationError(
            f"kernel at x={x}, t={t} on {format_manifold(m)} is unresolved")
    scale = 1.0 + ev.gnsq[0] + abs(ev.dtln[0])
    if ev.err[0] > 1e-3 * scale:
        return fd_log_derivatives(m, xa, t, ya)
    return LogDerivatives(
        grad_ln=tuple(float(g) for g in ev.grad[0]),
        grad_norm_sq=float(ev.gnsq[0]),
        lap_ln=float(ev.lapln[0]),
        dt_ln=float(ev.dtln[0]),
        method=ev.method,
        error_estimate=float(ev.err[0]))


# ---------------------------------------------------------------------------
# dual-representation cross check
# ---------------------------------------------------------------------------

def poisson_dual_check(L: float, t: float, offset: float):
    """Circle kernel as wrapped Gaussian vs Fourier sum; both cut adaptively.

    Returns (image_sum, spectral_sum, discrepancy).  Poisson summation makes
    the two identical; the discrepancy measures float rounding only.
    """
    if t <= 0 or L <= 0:
        raise DomainError("poisson_dual_check needs L > 0 and t > 0")
    delta = math.remainder(offset, L)
    kmax = int(math.ceil((math.sqrt(4 * t * 46.0) + L) / L)) + 1
    k = np.arange(-kmax, kmax + 1)
    image = float(np.sum(np.exp(-((delta + k * L) ** 2) / (4 * t)))
                  / math.sqrt(4 * math.pi * t))
    nmax = int(math.ceil(math.sqrt(46.0 / t) * L / (2 * math.pi))) + 2
    n = np.arange(1, nmax + 1)
    spec_sum = float((1.0 + 2 * np.sum(np.exp(-((2 * math.pi * n / L) ** 2) * t)
                                       * np.cos(2 * math.pi * n * delta / L))) / L)
    return image, spec_sum, abs(image - spec_sum)


# ---------------------------------------------------------------------------
# kernel supremum over a space-time window
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelSup:
    value: float
    argmax_t: float
    argmax_x: tuple[float, ...]
    space_resolution: int
    t_count: int


def kernel_sup(m: Manifold, y, t_window: tuple[float, float], grid) -> KernelSup:
    """Maximum kernel value over the space-time grid (the Hamilton constant A)."""
    from .grids import space_points  # local import to keep layering one-way

    if not m.compact:
        raise UnsupportedManifoldError(
            f"kernel_sup needs a compact manifold, got {format_manifold(m)}")
    t_lo, t_hi = t_window
    if t_lo < kernel_validity_threshold(m):
        raise TruncationError(
            f"t_lo={t_lo} below kernel validity threshold "
            f"{kernel_validity_threshold(m)} for {format_manifold(m)}")
    res = grid.space_resolution
    if res < 16:
        raise DomainError(f"space resolution {res} too coarse; need >= 16 per period")
    X = space_points(m, res)
    ya = reduce_point(m, y)
    ts = np.linspace(t_lo, t_hi, max(len(grid.t_points), 2))
    best = (-np.inf, None, None)
    for t in ts:
        ev = grid_log_derivatives(m, X, float(t), ya)
        logv = np.where(ev.resolved, ev.logv, -np.inf)
        i = int(np.argmax(logv))
        if logv[i] > best[0]:
            best = (logv[i], float(t), tuple(float(c) for c in X[i]))
    return KernelSup(value=float(np.exp(best[0])), argmax_t=best[1],
                     argmax_x=best[2], space_resolution=res, t_count=len(ts))


# ---------------------------------------------------------------------------
# finite-difference oracle
# ---------------------------------------------------------------------------

def _raw_logv(m: Manifold, coords: np.ndarray, t: float, y: np.ndarray) -> float:
    """Log kernel value at unreduced chart coordinates (smooth extensions)."""
    match m:
        case Euclidean():
            d2 = float(np.sum((coords - y) ** 2))
            return -(m.n / 2) * math.log(4 * math.pi * t) - d2 / (4 * t)
        case Circle(L):
            delta = np.array([math.remainder(coords[0] - y[0], L)])
            return float(_circle_parts(L, delta, t)[0][0])
        case FlatTorus(lengths):
            tot = 0.0
            for i, L in enumerate(lengths):
                delta = np.array([math.remainder(coords[i] - y[i], L)])
                tot += float(_circle_parts(L, delta, t)[0][0])
            return tot
        case Sphere2(radius):
            w = (math.cos(coords[0]) * math.cos(y[0])
                 + math.sin(coords[0]) * math.sin(y[0]) * math.cos(coords[1] - y[1]))
            G = _sphere_series(np.array([min(1.0, max(-1.0, w))]), t, radius)[0][0]
            if G <= 0:
                raise UnresolvedEvaluationError(
                    "sphere kernel below rounding floor in FD oracle")
            return math.log(G)
        case Hyperbolic3():
            r = abs(float(coords[0]))
            if r < 1e-4:
                lrs = -r**2 / 6 + r**4 / 180
            else:
                lrs = math.log(2 * r) - r - math.log1p(-math.exp(-2 * r))
            return -1.5 * math.log(4 * math.pi * t) + lrs - t - r**2 / (4 * t)
        case RevolutionSurface():
            model = get_spectral_model(m)
            G = spectral.eval_points(model, coords[None, :], t, y)["value"][0]
            if G <= 0:
                raise UnresolvedEvaluationError(
                    "spectral kernel below rounding floor in FD oracle")
            return math.log(G)
        case Product():
            kl = chart_arity(m.left)
            return (_raw_logv(m.left, coords[:kl], t, y[:kl])
                    + _raw_logv(m.right, coords[kl:], t, y[kl:]))
    raise UnsupportedManifoldError(f"no kernel for {m!r}")


def _richardson_first(f, x0: float, h: float):
    d_h = (f(x0 + h) - f(x0 - h)) / (2 * h)
    d_h2 = (f(x0 + h / 2) - f(x0 - h / 2)) / h
    rich = (4 * d_h2 - d_h) / 3
    return rich, abs(rich - d_h2) + EPS

def _richardson_second(f, x0: float, h: float):
    f0 = f(x0)
    d_h = (f(x0 + h) - 2 * f0 + f(x0 - h)) / h**2
    d_h2 = (f(x0 + h / 2) - 2 * f0 + f(x0 - h / 2)) / (h / 2) ** 2
    rich = (4 * d_h2 - d_h) / 3
    return rich, abs(rich - d_h2) + EPS

def _one_sided_first(f, x0: float, h: float):
    def d(hh):
        return (-3 * f(x0) + 4 * f(x0 + hh) - f(x0 + 2 * hh)) / (2 * hh)
    rich = (4 * d(h / 2) - d(h)) / 3
    return rich, abs(rich - d(h / 2)) + EPS


def fd_log_derivatives(m: Manifold, x, t: float, y) -> LogDerivatives:
    """Finite-difference oracle for kernel log-derivatives.

    Central differences with one Richardson level; first-derivative step
    cbrt(eps) * max(1, |coord|), second-derivative step eps^(1/4) * max(1, |coord|)
    (the optimal-step heuristics for each order).  The time derivative goes
    one-sided when t is too close to the kernel validity threshold.
    """
    xa = reduce_point(m, x).astype(float)
    ya = reduce_point(m, y).astype(float)
    arity = chart_arity(m)
    h1 = EPS ** (1 / 3) * np.maximum(1.0, np.abs(xa))
    h2 = EPS ** 0.25 * np.maximum(1.0, np.abs(xa))

    grad = np.zeros(arity)
    second = np.zeros(arity)
    err = 0.0
    for i in range(arity):
        def fi(c, i=i):
            z = xa.copy()
            z[i] = c
            return _raw_logv(m, z, t, ya)
        grad[i], e1 = _richardson_first(fi, xa[i], float(h1[i]))
        second[i], e2 = _richardson_second(fi, xa[i], float(h2[i]))
        err += e1 + e2

    def ft(tt):
        return _raw_logv(m, xa, tt, ya)

    t_floor = kernel_validity_threshold(m)
    ht = EPS ** (1 / 3) * max(t, 1.0) * 0.5
    if t - ht > t_floor:
        dtln, et = _richardson_first(ft, t, ht)
    else:
        dtln, et = _one_sided_first(ft, t, ht)
    err += et

    ginv, div_c = chart_geometry(m, xa)
    gnsq = float(np.sum(ginv * grad**2))
    lapln = float(np.sum(ginv * second + div_c * grad))
    return LogDerivatives(
        grad_ln=tuple(float(g) for g in grad),
        grad_norm_sq=gnsq,
        lap_ln=lapln,
        dt_ln=float(dtln),
        method="finite_difference",
        error_estimate=float(err))
