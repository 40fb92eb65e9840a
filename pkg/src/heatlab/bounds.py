"""Right-hand sides of the gradient bounds, Harnack factors, Gaussian envelopes.

All comparisons are t-scaled: every function here returns a quantity directly
comparable to t * Y (or t |grad ln G|^2, or a kernel value for the Harnack and
envelope forms), which keeps margins finite near t = 0.

The dimensional constants C0..C5 are existence-only in the theory; defaults
below are deliberately generous so theorem-shaped checks pass, and
minimal_constant_fit reports empirically tight values alongside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SpecParseError
from .manifolds import Manifold, ball_volume, curvature_summary, distance, reduce_point

_CONSTANT_FIELDS = ("c0", "c1", "c2", "c3", "c4", "c5", "gaussian_c1", "gaussian_c2")


@dataclass(frozen=True)
class BoundConstants:
    """User-overridable constants appearing in the bound right-hand sides.

    c0 defaults to n/2 (the alpha=2 Harnack reduction) and is resolved per
    check since it depends on the dimension; everything else is a plain
    positive number.
    """
    c0: float | None = None
    c1: float = 100.0
    c2: float = 100.0
    c3: float = 1.0
    c4: float = 100.0
    c5: float = 100.0
    gaussian_c1: float = 10.0
    gaussian_c2: float = 10.0

    def __post_init__(self):
        for name in _CONSTANT_FIELDS:
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise DomainError(f"constant {name} must be strictly positive, got {v}")

    def resolve_c0(self, n: int) -> float:
        return self.c0 if self.c0 is not None else n / 2.0

    def as_dict(self, n: int | None = None) -> dict:
        d = {name: getattr(self, name) for name in _CONSTANT_FIELDS}
        if n is not None:
            d["c0"] = self.resolve_c0(n)
        return d


def parse_constants_file(path: str) -> BoundConstants:
    """Flat key=value overrides, e.g. ``c1=12.5``; unknown keys are errors."""
    overrides = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SpecParseError(
                    f"{path}:{lineno}: expected key=value, got {line!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in _CONSTANT_FIELDS:
                raise SpecParseError(
                    f"{path}:{lineno}: unknown constant {key!r} "
                    f"(known: {', '.join(_CONSTANT_FIELDS)})")
            try:
                overrides[key] = float(val)
            except ValueError:
                raise SpecParseError(f"{path}:{lineno}: {key}={val!r} is not a number")
    return BoundConstants(**overrides)


@dataclass(frozen=True)
class AlphaFamily:
    """Time-curvature families alpha(t, K) >= 1 and beta(t, K) > 0.

    The linear built-in alpha = 1 + K t / 3 satisfies alpha - 1 = K O(t); the
    beta = alpha^2 choice is illustrative only and flagged as such in reports.
    """
    name: str
    alpha_fn: callable
    beta_fn: callable

    @staticmethod
    def constant(alpha: float) -> "AlphaFamily":
        if alpha < 1:
            raise DomainError(f"constant alpha family needs alpha >= 1, got {alpha}")
        return AlphaFamily(f"constant({alpha:g})", lambda t, K: alpha,
                           lambda t, K: alpha**2)

    @staticmethod
    def linear(slope: float = 1.0 / 3.0) -> "AlphaFamily":
        return AlphaFamily(f"linear(slope={slope:g})",
                           lambda t, K: 1.0 + K * t * slope,
                           lambda t, K: (1.0 + K * t * slope) ** 2)


# ---------------------------------------------------------------------------
# right-hand sides (all t-scaled)
# ---------------------------------------------------------------------------

def rhs_classical(n: int, K: float, t, alpha: float):
    """t-scaled RHS of the classical bound: t n a^2 K / (2(a-1)) + n a^2 / 2."""
    t = np.asarray(t, dtype=float)
    if K < 0:
        raise DomainError(f"K must be >= 0, got {K}")
    if K > 0:
        if alpha <= 1:
            raise DomainError(
                f"alpha must be > 1 when K > 0 (division guard), got {alpha}")
        kterm = t * n * alpha**2 * K / (2 * (alpha - 1))
    else:
        kterm = np.zeros_like(t)
    return kterm + n * alpha**2 / 2


def _sharp_rhs(n: int, K: float, t, diam: float, c1: float, c2: float):
    t = np.asarray(t, dtype=float)
    if K < 0:
        raise DomainError(f"K must be >= 0, got {K}")
    rad1 = np.sqrt(2 * n * K * (1 + K * t) * (1 + t)) * diam
    rad2 = np.sqrt(K * (1 + K * t) * (c1 + c2 * K) * t)
    return n / 2 + rad1 + rad2


def rhs_sharp_compact(n: int, K: float, t, diam: float, c: BoundConstants):
    """n/2 + sqrt(2nK(1+Kt)(1+t)) diam + sqrt(K(1+Kt)(c1 + c2 K) t)."""
    return _sharp_rhs(n, K, t, diam, c.c1, c.c2)


def rhs_hamilton(t: float, K: float, A: float, f_value: float) -> float:
    """(1 + 2Kt) ln(A/f); comparable to t |grad ln f|^2 for 0 < f <= A."""
    if not 0 < f_value <= A:
        raise DomainError(
            f"hamilton bound needs 0 < f <= A, got f={f_value}, A={A} "
            "(an f above A signals a wrong supremum)")
    return (1 + 2 * K * t) * math.log(A / f_value)


def gaussian_envelope(m: Manifold, x, y, t: float, c: BoundConstants
                      ) -> tuple[float, float]:
    """Two-sided Gaussian kernel envelope on the closed-form-volume catalog.

    lower = exp(-c2 K t - d^2/(3t)) / (c1 |B(x, sqrt t)|),
    upper = c1 exp(c2 K t - d^2/(5t)) / |B(x, sqrt t)|.
    """
    if t <= 0:
        raise DomainError(f"t must be positive, got {t}")
    K = curvature_summary(m).ricci_lower
    d = distance(m, x, y)
    vol = ball_volume(m, reduce_point(m, x), math.sqrt(t))
    c1, c2 = c.gaussian_c1, c.gaussian_c2
    lower = math.exp(-c2 * K * t - d**2 / (3 * t)) / (c1 * vol)
    upper = c1 * math.exp(c2 * K * t - d**2 / (5 * t)) / vol
    return lower, upper


def harnack_rhs(u_later: float, t1: float, t2: float, d: float, n: int,
                K: float, alpha: float) -> float:
    """u(x, t1) <= u_later (t2/t1)^{n a/2} exp(a d^2/(4(t2-t1)) + n a K (t2-t1)/(4(a-1)))."""
    if t2 <= t1 or t1 <= 0:
        raise DomainError(f"harnack needs 0 < t1 < t2, got t1={t1}, t2={t2}")
    if K > 0:
        if alpha <= 1:
            raise DomainError(f"alpha must be > 1 when K > 0, got {alpha}")
        kterm = n * alpha * K * (t2 - t1) / (4 * (alpha - 1))
    else:
        if alpha < 1:
            raise DomainError(f"alpha must be >= 1, got {alpha}")
        kterm = 0.0
    return (u_later * (t2 / t1) ** (n * alpha / 2)
            * math.exp(alpha * d**2 / (4 * (t2 - t1)) + kterm))


# regime split for the kernel-gradient bound; small-time form below, the
# equilibrium-flavored form at and above
KERNEL_GRADIENT_SPLIT = 8.0


def rhs_kernel_gradient(t, K: float, diam: float, c: BoundConstants,
                        regime: str, n: int | None = None):
    """Bound on t |grad_x ln G|^2: small_t and large_t regimes."""
    t = np.asarray(t, dtype=float)
    if regime == "small_t":
        return 2 * (1 + K * t) * (2 * c.c2 * K * t + 4 * c.c3**2 * K
                                  + diam**2 / t + 2 * math.log(c.c1))
    if regime == "large_t":
        if n is None:
            raise DomainError("large_t regime needs the dimension n")
        return 2 * (1 + K * t) * (n * math.log(2) + 2 * c.resolve_c0(n) * K + diam**2)
    raise DomainError(f"regime must be 'small_t' or 'large_t', got {regime!r}")


def rhs_noncompact(n: int, K: float, t, fam: AlphaFamily, d_to_origin,
                   R: float, c: BoundConstants):
    """Kernel-style bound with the distance term, for compactly supported data:
    n a/2 + t n b K / (2 a (a-1)) + c1 K t + c2 K^2 t^2 + 2 c3 K (d^2 + R^2)."""
    t = np.asarray(t, dtype=float)
    d_to_origin = np.asarray(d_to_origin, dtype=float)
    alpha = np.asarray(fam.alpha_fn(t, K), dtype=float)
    if K > 0:
        if np.any(alpha <= 1):
            raise DomainError(
                f"alpha family {fam.name} must stay > 1 when K={K} > 0")
        beta = np.asarray(fam.beta_fn(t, K), dtype=float)
        kterm = t * n * beta * K / (2 * alpha * (alpha - 1))
        tail = c.c1 * K * t + c.c2 * K**2 * t**2 + 2 * c.c3 * K * (d_to_origin**2 + R**2)
    else:
        kterm = np.zeros_like(t)
        tail = np.zeros_like(t) * d_to_origin
    return n * alpha / 2 + kterm + tail


# ---------------------------------------------------------------------------
# empirical constant fitting
# ---------------------------------------------------------------------------

def constant_lattice() -> tuple[float, ...]:
    """{0} plus a half-power-of-two ladder; documented search lattice."""
    return (0.0,) + tuple(2.0 ** (k / 2) for k in range(-8, 21))


@dataclass(frozen=True)
class FitResult:
    feasible: bool
    c1: float | None
    c2: float | None
    worst_sample: tuple[float, float] | None   # (t, measured tY) if infeasible
    lattice_size: int


def minimal_constant_fit(samples, n: int, K: float, diam: float,
                         slack: float = 1e-9) -> FitResult:
    """Smallest (c1, c2) on the lattice making the sharp-compact RHS dominate
    every (t, measured tY) sample.

    Candidates are scanned by increasing c1 + c2, then increasing c1 (the two
    constants enter only through c1 + c2 K, so the pair is underdetermined and
    this scan order is the documented tie-break).  Infeasible fits report the
    worst violating sample instead of raising.  At K = 0 the radical terms
    vanish, so the fit is (0, 0) whenever every sample sits below n/2.

    Dominance allows `slack` of headroom so float-level measurement noise on
    samples that exactly saturate the bound does not push the fit around.
    """
    if K < 0:
        raise DomainError(f"K must be >= 0, got {K}")
    samples = [(float(t), float(ty)) for t, ty in samples]
    if not samples:
        raise DomainError("minimal_constant_fit needs at least one sample")
    ts = np.array([t for t, _ in samples])
    tys = np.array([ty for _, ty in samples])
    lat = constant_lattice()
    need = tys - slack
    if K == 0:
        if np.all(need <= n / 2):
            return FitResult(True, 0.0, 0.0, None, len(lat))
        worst = int(np.argmax(need))
        return FitResult(False, None, None,
                         (float(ts[worst]), float(tys[worst])), len(lat))
    pairs = sorted(((a, b) for a in lat for b in lat),
                   key=lambda p: (p[0] + p[1], p[0]))
    for c1, c2 in pairs:
        if np.all(_sharp_rhs(n, K, ts, diam, c1, c2) >= need):
            return FitResult(True, c1, c2, None, len(lat))
    worst = int(np.argmax(need - _sharp_rhs(n, K, ts, diam, lat[-1], lat[-1])))
    return FitResult(False, None, None, (float(ts[worst]), float(tys[worst])),
                     len(lat))
