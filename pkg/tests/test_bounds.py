import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heatlab.bounds import (
    AlphaFamily,
    BoundConstants,
    gaussian_envelope,
    harnack_rhs,
    minimal_constant_fit,
    parse_constants_file,
    rhs_classical,
    rhs_hamilton,
    rhs_kernel_gradient,
    rhs_noncompact,
    rhs_sharp_compact,
)
from heatlab.errors import DomainError, SpecParseError
from heatlab.kernels import grid_log_derivatives, h3_neg_t_lap_ln, kernel_value
from heatlab.manifolds import Circle, Euclidean

TWO_PI = 2 * np.pi


# ---------------------------------------------------------------------------
# classical RHS
# ---------------------------------------------------------------------------

def test_classical_examples():
    assert rhs_classical(2, 1.0, 1.0, 2.0) == pytest.approx(8.0)
    # K = 0 kills the K-term for any alpha, so alpha -> 1 gives n/2
    assert rhs_classical(3, 0.0, 5.0, 1.0 + 1e-12) == pytest.approx(1.5, abs=1e-9)
    # 0.5 * (3 * 2.25 * 2 / 1) + 3 * 2.25 / 2 = 6.75 + 3.375
    assert rhs_classical(3, 2.0, 0.5, 1.5) == pytest.approx(10.125)


def test_classical_guard():
    with pytest.raises(DomainError):
        rhs_classical(2, 1.0, 1.0, 1.0)
    rhs_classical(2, 0.0, 1.0, 1.0)   # fine at K = 0


def test_classical_inf_over_alpha_at_least_half_n():
    # grid minimization over alpha: infimum stays >= n/2, equality iff K = 0
    alphas = np.linspace(1.0 + 1e-6, 8.0, 4000)
    for n in (1, 2, 3):
        for K in (0.0, 0.5, 2.0):
            for t in (0.05, 0.5, 3.0):
                vals = [float(rhs_classical(n, K, t, a)) for a in alphas]
                low = min(vals)
                assert low >= n / 2 - 1e-9
                if K == 0:
                    assert low == pytest.approx(n / 2, abs=1e-5)
                else:
                    assert low > n / 2 + 1e-3


# ---------------------------------------------------------------------------
# sharp compact RHS
# ---------------------------------------------------------------------------

def test_sharp_compact_examples():
    c = BoundConstants()
    assert rhs_sharp_compact(3, 0.0, 7.7, 123.0, c) == pytest.approx(1.5)
    c11 = BoundConstants(c1=1.0, c2=1.0)
    assert rhs_sharp_compact(2, 1.0, 1.0, np.pi, c11) == pytest.approx(1 + 4 * np.pi + 2)


@settings(max_examples=200, deadline=None)
@given(n=st.integers(1, 4),
       K=st.floats(0.01, 5), t=st.floats(0.01, 20),
       diam=st.floats(0.1, 20), bump=st.floats(0.01, 2))
def test_sharp_compact_monotone(n, K, t, diam, bump):
    c = BoundConstants()
    base = float(rhs_sharp_compact(n, K, t, diam, c))
    assert float(rhs_sharp_compact(n, K + bump, t, diam, c)) >= base
    assert float(rhs_sharp_compact(n, K, t + bump, diam, c)) >= base
    assert float(rhs_sharp_compact(n, K, t, diam + bump, c)) > base
    c_up = BoundConstants(c1=100 + bump, c2=100 + bump)
    assert float(rhs_sharp_compact(n, K, t, diam, c_up)) >= base


# ---------------------------------------------------------------------------
# Hamilton RHS
# ---------------------------------------------------------------------------

def test_hamilton_examples():
    assert rhs_hamilton(0.7, 1.0, 2.0, 2.0) == 0.0
    assert rhs_hamilton(123.0, 0.0, math.e, 1.0) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        rhs_hamilton(1.0, 0.0, 1.0, 2.0)


def test_hamilton_on_circle_shifted_kernel():
    # proof construction: f(x, t) = G(x, t + t0, y), A = sup over the window
    m = Circle(TWO_PI)
    t0 = 0.5
    A = kernel_value(m, [0.0], t0, [0.0]).value
    x = np.linspace(0, TWO_PI, 256, endpoint=False)[:, None]
    for t in (0.1, 0.3, 0.5):
        ev = grid_log_derivatives(m, x, t + t0, np.array([0.0]))
        lhs = t * ev.gnsq
        rhs = (1 + 0.0) * (np.log(A) - ev.logv)
        assert np.all(lhs <= rhs + 1e-10)


# ---------------------------------------------------------------------------
# gaussian envelope
# ---------------------------------------------------------------------------

def test_envelope_ordering():
    rng = np.random.default_rng(1)
    m = Euclidean(3)
    c = BoundConstants()
    for _ in range(100):
        x = rng.normal(size=3)
        y = rng.normal(size=3)
        t = 0.05 + rng.random() * 3
        lo, up = gaussian_envelope(m, x, y, t, c)
        assert 0 < lo <= up


def test_envelope_euclidean_minimal_c1_is_t_stable():
    # minimal c1 over a grid: analytic value 3 sqrt(4 pi) for n = 3, any t
    m = Euclidean(3)
    c = BoundConstants()
    target = 3 * math.sqrt(4 * math.pi)
    for t in (0.1, 0.5, 2.0):
        need = 0.0
        vol = (4 / 3) * np.pi * t ** 1.5
        for d in np.linspace(0, 4, 41):
            G = (4 * np.pi * t) ** -1.5 * math.exp(-d * d / (4 * t))
            need = max(need,
                       G * vol * math.exp(d * d / (5 * t)),
                       math.exp(-d * d / (3 * t)) / (G * vol))
        assert need == pytest.approx(target, rel=1e-6)
        assert math.isfinite(need)


def test_envelope_brackets_circle_kernel_with_fitted_constants():
    m = Circle(TWO_PI)
    t, d = 0.1, np.pi
    val = kernel_value(m, [d], t, [0.0]).value
    c = BoundConstants(gaussian_c1=60.0, gaussian_c2=10.0)
    lo, up = gaussian_envelope(m, [d], [0.0], t, c)
    assert lo <= val <= up


# ---------------------------------------------------------------------------
# Harnack RHS
# ---------------------------------------------------------------------------

def test_harnack_alpha2_reduces_to_paper_shape():
    # alpha = 2, t2 = t1 + 1: factor (t2/t1)^n exp(d^2/2 + n K / 2)
    n, K, d, t1 = 2, 1.5, 0.7, 1.0
    got = harnack_rhs(1.0, t1, t1 + 1, d, n, K, 2.0)
    want = (2.0) ** n * math.exp(d * d / 2 + n * K / 2)
    assert got == pytest.approx(want, rel=1e-13)


def test_harnack_euclidean_equality_at_alpha_one():
    # z on the scaling ray makes the Gaussian saturate the bound exactly
    n, t1, t2 = 1, 1.0, 2.0
    G1 = kernel_value(Euclidean(1), [0.0], t1, [0.0]).value
    G2 = kernel_value(Euclidean(1), [0.0], t2, [0.0]).value
    bound = harnack_rhs(G2, t1, t2, 0.0, n, 0.0, 1.0)
    assert G1 == pytest.approx(bound, abs=1e-14)
    x = 0.8
    Gx = kernel_value(Euclidean(1), [x], t1, [0.0]).value
    z = x * t2 / t1
    Gz = kernel_value(Euclidean(1), [z], t2, [0.0]).value
    bound = harnack_rhs(Gz, t1, t2, abs(z - x), n, 0.0, 1.0)
    assert Gx == pytest.approx(bound, abs=1e-10)


def test_harnack_ordering_guard():
    with pytest.raises(DomainError):
        harnack_rhs(1.0, 2.0, 1.0, 0.0, 1, 0.0, 2.0)
    with pytest.raises(DomainError):
        harnack_rhs(1.0, 1.0, 2.0, 0.0, 1, 1.0, 1.0)   # alpha = 1 with K > 0


def test_harnack_circle_random_margins():
    m = Circle(TWO_PI)
    rng = np.random.default_rng(8)
    for _ in range(100):
        x, z, y = (rng.random() * TWO_PI for _ in range(3))
        t1 = 0.1 + rng.random()
        t2 = t1 + 0.05 + rng.random()
        u1 = kernel_value(m, [x], t1, [y]).value
        u2 = kernel_value(m, [z], t2, [y]).value
        d = min(abs(x - z), TWO_PI - abs(x - z))
        assert u1 <= harnack_rhs(u2, t1, t2, d, 1, 0.0, 2.0) + 1e-10


def test_harnack_chain_dominates_direct():
    # composing x->z->w along a line beats the direct bound (Cauchy-Schwarz
    # on the path exponents)
    n, K, alpha = 1, 0.0, 2.0
    t1, t2, t3 = 0.5, 1.0, 2.0
    d1, d2 = 0.6, 0.9
    u3 = 0.37
    via = harnack_rhs(harnack_rhs(u3, t2, t3, d2, n, K, alpha),
                      t1, t2, d1, n, K, alpha)
    direct = harnack_rhs(u3, t1, t3, d1 + d2, n, K, alpha)
    assert via >= direct - 1e-12


# ---------------------------------------------------------------------------
# kernel-gradient RHS
# ---------------------------------------------------------------------------

def test_kernel_gradient_k0_forms():
    c = BoundConstants(c1=2.0)
    got = rhs_kernel_gradient(0.5, 0.0, 3.0, c, "small_t")
    assert got == pytest.approx(2 * (9.0 / 0.5 + 2 * math.log(2.0)))
    got = rhs_kernel_gradient(10.0, 0.0, np.pi, c, "large_t", n=1)
    assert got == pytest.approx(2 * (math.log(2) + np.pi**2))
    with pytest.raises(DomainError):
        rhs_kernel_gradient(1.0, 0.0, 1.0, c, "mid")


def test_kernel_gradient_circle_measured_fit():
    # fit the smallest lattice c1 that dominates measured t |grad ln G|^2
    m = Circle(TWO_PI)
    t = 0.5
    x = np.linspace(0, TWO_PI, 512, endpoint=False)[:, None]
    ev = grid_log_derivatives(m, x, t, np.array([0.0]))
    measured = t * ev.gnsq
    diam = np.pi
    for c1 in (1.0 + 1e-9, 1.5, 2.0, 4.0):
        rhs = rhs_kernel_gradient(t, 0.0, diam, BoundConstants(c1=c1), "small_t")
        if np.all(measured <= rhs):
            break
    assert np.all(measured <= rhs)
    assert c1 <= 2.0   # diam^2/t alone already dominates here


# ---------------------------------------------------------------------------
# noncompact RHS
# ---------------------------------------------------------------------------

def test_noncompact_k0():
    fam = AlphaFamily.linear()
    got = rhs_noncompact(3, 0.0, 1.7, fam, 5.0, 2.0, BoundConstants())
    assert got == pytest.approx(1.5)   # alpha(t, 0) = 1


def test_noncompact_margin_grows_on_h3():
    # LHS ~ r + 2t + 1/2 linear, RHS quadratic in r: margin increases
    fam = AlphaFamily.linear()
    c = BoundConstants()
    t = 1.0
    margins = []
    for r in (10.0, 20.0, 40.0):
        lhs = float(h3_neg_t_lap_ln(np.array([r]), t)[0])
        rhs = float(rhs_noncompact(3, 2.0, t, fam, r, 0.0, c))
        margins.append(rhs - lhs)
    assert margins[0] < margins[1] < margins[2]
    assert margins[0] > 0


def test_noncompact_alpha_guard():
    fam = AlphaFamily.constant(1.0)
    with pytest.raises(DomainError):
        rhs_noncompact(3, 1.0, 1.0, fam, 0.0, 0.0, BoundConstants())


def test_alpha_family_limit():
    fam = AlphaFamily.linear()
    for K in (0.5, 2.0):
        assert fam.alpha_fn(1e-12, K) == pytest.approx(1.0, abs=1e-9)
        assert fam.alpha_fn(1.0, K) == pytest.approx(1 + K / 3)
        assert fam.beta_fn(1.0, K) == pytest.approx((1 + K / 3) ** 2)


# ---------------------------------------------------------------------------
# constants and fitting
# ---------------------------------------------------------------------------

def test_constants_defaults_and_c0():
    c = BoundConstants()
    assert c.resolve_c0(3) == 1.5
    assert BoundConstants(c0=7.0).resolve_c0(3) == 7.0
    with pytest.raises(DomainError):
        BoundConstants(c1=-1.0)


def test_constants_file(tmp_path):
    path = tmp_path / "c.txt"
    path.write_text("c1=12.5\n# comment\ngaussian_c2 = 3\n")
    c = parse_constants_file(str(path))
    assert c.c1 == 12.5 and c.gaussian_c2 == 3.0 and c.c2 == 100.0

    bad = tmp_path / "bad.txt"
    bad.write_text("c9=1\n")
    with pytest.raises(SpecParseError, match="c9"):
        parse_constants_file(str(bad))
    bad.write_text("c1=abc\n")
    with pytest.raises(SpecParseError, match="abc"):
        parse_constants_file(str(bad))
    bad.write_text("just-noise\n")
    with pytest.raises(SpecParseError, match="just-noise"):
        parse_constants_file(str(bad))


def test_fit_k0_trivial():
    fit = minimal_constant_fit([(0.5, 0.4), (1.0, 0.49)], 1, 0.0, np.pi)
    assert fit.feasible and fit.c1 == 0.0 and fit.c2 == 0.0
    fit = minimal_constant_fit([(0.5, 0.9)], 1, 0.0, np.pi)
    assert not fit.feasible
    assert fit.worst_sample == (0.5, 0.9)


def test_fit_dominated_by_diameter_term():
    # samples below n/2 + first radical need no c1, c2 at all
    n, K, diam = 2, 1.0, 3.0
    ts = [0.1, 0.5, 1.0]
    samples = [(t, float(rhs_sharp_compact(n, K, t, diam,
                                           BoundConstants(c1=1e-300, c2=1e-300))) - 0.1)
               for t in ts]
    fit = minimal_constant_fit(samples, n, K, diam)
    assert fit.feasible and (fit.c1, fit.c2) == (0.0, 0.0)


def test_fit_needs_positive_constants():
    # inflate one sample beyond the diameter term so the lattice must move
    n, K, diam = 2, 1.0, 1.0
    t = 1.0
    base = float(rhs_sharp_compact(n, K, t, diam, BoundConstants(c1=1e-300, c2=1e-300)))
    samples = [(t, base + 3.0)]
    fit = minimal_constant_fit(samples, n, K, diam)
    assert fit.feasible and (fit.c1 > 0 or fit.c2 > 0)
    got = float(rhs_sharp_compact(n, K, t, diam, BoundConstants(
        c1=max(fit.c1, 1e-300), c2=max(fit.c2, 1e-300))))
    assert got >= base + 3.0
