"""Li-Yau quantities, the Bochner-inequality residual, and mixture solutions.

The central object is Y = |grad ln u|^2 - dt ln u, which equals -Delta ln u
whenever u solves the heat equation.  Mixtures u = sum_i w_i G(x, t+eps, y_i)
are the discrete-measure positive solutions used to exercise the transfer
argument: a pointwise bound on t Y for kernels carries to every positive
superposition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, UnresolvedEvaluationError, UnsupportedManifoldError
from .kernels import (
    GridEval,
    LogDerivatives,
    grid_log_derivatives,
    kernel_validity_threshold,
)
from .manifolds import (
    Euclidean,
    Hyperbolic3,
    Manifold,
    chart_geometry,
    chart_metric_diag,
    curvature_summary,
    format_manifold,
    reduce_point,
)


@dataclass(frozen=True)
class LiYauEvaluation:
    """Y_alpha = |grad ln u|^2 - alpha dt ln u and the t-scaled alpha=1 form."""
    alpha: float
    y_alpha: float
    t_y: float
    point: tuple          # (x coords, t, source label)


def li_yau_quantity(ld: LogDerivatives, alpha: float, t: float,
                    point=((), 0.0, "")) -> LiYauEvaluation:
    """Evaluate the Li-Yau combination from stored log-derivatives.

    Y_alpha is affine in alpha with slope -dt_ln, so any alpha >= 1 is a
    lookup, not a re-evaluation.
    """
    if alpha < 1:
        raise DomainError(f"alpha must be >= 1, got {alpha}")
    y_alpha = ld.grad_norm_sq - alpha * ld.dt_ln
    t_y = t * (ld.grad_norm_sq - ld.dt_ln)
    return LiYauEvaluation(alpha=alpha, y_alpha=y_alpha, t_y=t_y, point=point)


# ---------------------------------------------------------------------------
# Bochner residual
# ---------------------------------------------------------------------------

def _y_field(m: Manifold, coords: np.ndarray, t: float, y: np.ndarray) -> float:
    ev = grid_log_derivatives(m, coords[None, :], t, y)
    return float(ev.gnsq[0] - ev.dtln[0])


def bochner_residual(m: Manifold, x, t: float, y, h: float = 1e-3):
    """lhs - rhs of the evolution inequality satisfied by Y, for kernel sources.

    lhs = (Delta - d_t) Y + 2 grad(ln u) . grad(Y),  rhs = (2/n) Y^2 - 2K |grad ln u|^2.
    Y-derivatives come from Richardson-extrapolated central differences of the
    analytic Y field, which keeps the residual floor near 1e-6 on the smooth
    range.  Supported where Y is analytic: Euclidean and Hyperbolic3.

    Returns (lhs, rhs, residual); theory says residual >= 0 up to FD error.
    """
    if not isinstance(m, (Euclidean, Hyperbolic3)):
        raise UnsupportedManifoldError(
            f"bochner_residual supports euclidean and h3 only, got {format_manifold(m)}")
    xa = reduce_point(m, x).astype(float)
    ya = reduce_point(m, y).astype(float)
    n = m.dim
    K = curvature_summary(m).ricci_lower

    base = grid_log_derivatives(m, xa[None, :], t, ya)
    Y0 = float(base.gnsq[0] - base.dtln[0])
    grad_ln = base.grad[0]

    arity = xa.size
    dY = np.zeros(arity)
    d2Y = np.zeros(arity)
    for i in range(arity):
        def fi(c, i=i):
            z = xa.copy()
            z[i] = c
            return _y_field(m, z, t, ya)
        dY[i] = _rich1(fi, xa[i], h)
        d2Y[i] = _rich2(fi, xa[i], h)

    def ftime(tt):
        return _y_field(m, xa, tt, ya)

    ht = h * max(t, 1.0)
    dtY = _rich1(ftime, t, ht) if t - ht > 0 else _rich1(ftime, t, t / 4)

    ginv, div_c = chart_geometry(m, xa)
    lapY = float(np.sum(ginv * d2Y + div_c * dY))
    advect = 2.0 * float(np.sum(ginv * grad_ln * dY))
    lhs = lapY - dtY + advect
    rhs = (2.0 / n) * Y0**2 - 2.0 * K * float(base.gnsq[0])
    return lhs, rhs, lhs - rhs


def _rich1(f, x0, h):
    d_h = (f(x0 + h) - f(x0 - h)) / (2 * h)
    d_h2 = (f(x0 + h / 2) - f(x0 - h / 2)) / h
    return (4 * d_h2 - d_h) / 3


def _rich2(f, x0, h):
    f0 = f(x0)
    d_h = (f(x0 + h) - 2 * f0 + f(x0 - h)) / h**2
    d_h2 = (f(x0 + h / 2) - 2 * f0 + f(x0 - h / 2)) / (h / 2) ** 2
    return (4 * d_h2 - d_h) / 3


# ---------------------------------------------------------------------------
# mixtures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MixtureSolution:
    """Positive solution u(x, t) = sum_i w_i G(x, t + start_offset, y_i)."""
    manifold: Manifold
    sources: tuple[tuple[tuple[float, ...], float], ...]   # ((coords), weight)
    start_offset: float = 0.0

    def __post_init__(self):
        if not self.sources:
            raise DomainError("mixture needs at least one source")
        if any(w <= 0 for _, w in self.sources):
            raise DomainError("mixture weights must be strictly positive")
        if self.start_offset < 0:
            raise DomainError("start_offset must be >= 0")


def mixture_grid_log_derivatives(s: MixtureSolution, X, t: float) -> GridEval:
    """Vectorized log-derivatives of the mixture at points X.

    Source mixing happens in log space (softmax over ln w_i + ln G_i), so the
    result is invariant to rescaling all weights and immune to underflow as
    long as at least one source kernel is resolved.
    """
    te = t + s.start_offset
    if te < kernel_validity_threshold(s.manifold):
        raise DomainError(
            f"mixture time {te} below kernel validity threshold "
            f"{kernel_validity_threshold(s.manifold)}")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    evs = []
    logw = []
    for coords, w in s.sources:
        y = reduce_point(s.manifold, coords)
        evs.append(grid_log_derivatives(s.manifold, X, te, y))
        logw.append(math.log(w))

    P = X.shape[0]
    S = len(evs)
    a = np.stack([lw + ev.logv for lw, ev in zip(logw, evs)])     # (S, P)
    resolved = np.all(np.stack([ev.resolved for ev in evs]), axis=0)
    amax = a.max(axis=0)
    resolved = resolved & np.isfinite(amax)
    safe_amax = np.where(np.isfinite(amax), amax, 0.0)
    p = np.exp(np.where(np.isfinite(a), a - safe_amax[None, :], -np.inf))
    Z = p.sum(axis=0)
    Z = np.where(Z > 0, Z, 1.0)
    p /= Z[None, :]                                               # (S, P)

    grad = np.einsum("sp,spk->pk", p, np.stack([ev.grad for ev in evs]))
    dtln = np.einsum("sp,sp->p", p, np.stack([ev.dtln for ev in evs]))
    # Delta u / u = sum p_i (lap_i + |grad_i|^2); subtract |grad u / u|^2
    lap_term = np.einsum("sp,sp->p", p,
                         np.stack([ev.lapln + ev.gnsq for ev in evs]))
    gnsq = np.sum(chart_metric_diag(s.manifold, X) * grad**2, axis=1)
    lapln = lap_term - gnsq
    err = np.einsum("sp,sp->p", p, np.stack([ev.err for ev in evs])) * 2 + 1e-14
    logv = amax + np.log(Z)
    method = "series_termwise" if any(ev.method != "analytic" for ev in evs) else "analytic"
    return GridEval(logv=logv, grad=grad, gnsq=gnsq, dtln=dtln, lapln=lapln,
                    err=err, value_tail=np.zeros(P), resolved=resolved,
                    method=method)


def mixture_log_derivatives(s: MixtureSolution, x, t: float) -> LogDerivatives:
    """Log-derivatives of the mixture at a single point."""
    xa = reduce_point(s.manifold, x)
    ev = mixture_grid_log_derivatives(s, xa[None, :], t)
    if not ev.resolved[0]:
        raise UnresolvedEvaluationError(
            f"all mixture kernel terms unresolved at x={x}, t={t}")
    return LogDerivatives(
        grad_ln=tuple(float(g) for g in ev.grad[0]),
        grad_norm_sq=float(ev.gnsq[0]),
        lap_ln=float(ev.lapln[0]),
        dt_ln=float(ev.dtln[0]),
        method=ev.method,
        error_estimate=float(ev.err[0]))
