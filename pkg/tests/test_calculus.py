import math

import numpy as np
import pytest

from heatlab.calculus import (
    MixtureSolution,
    bochner_residual,
    li_yau_quantity,
    mixture_grid_log_derivatives,
    mixture_log_derivatives,
)
from heatlab.errors import DomainError, UnresolvedEvaluationError, UnsupportedManifoldError
from heatlab.kernels import grid_log_derivatives, kernel_log_derivatives
from heatlab.manifolds import Circle, Euclidean, FlatTorus, Hyperbolic3, Sphere2

TWO_PI = 2 * np.pi


# ---------------------------------------------------------------------------
# Li-Yau quantity
# ---------------------------------------------------------------------------

def test_euclidean_ty_is_half_dimension():
    for n in (1, 2, 3):
        ld = kernel_log_derivatives(Euclidean(n), [0.4] * n, 0.8, [0.0] * n)
        ev = li_yau_quantity(ld, 1.0, 0.8)
        assert ev.t_y == pytest.approx(n / 2, abs=1e-14)


def test_h3_ty_at_r20():
    ld = kernel_log_derivatives(Hyperbolic3(), [20.0], 1.0, [0.0])
    ev = li_yau_quantity(ld, 1.0, 1.0)
    assert ev.t_y == pytest.approx(22.4025, abs=1e-4)
    # equals -t lap_ln through the heat-equation identity
    assert ev.t_y == pytest.approx(-1.0 * ld.lap_ln, abs=1e-10)


def test_alpha_two_at_origin():
    t = 0.8
    ld = kernel_log_derivatives(Euclidean(3), [0, 0, 0], t, [0, 0, 0])
    ev = li_yau_quantity(ld, 2.0, t)
    assert ev.y_alpha == pytest.approx(3 / t, rel=1e-13)


def test_alpha_affinity_exact():
    ld = kernel_log_derivatives(Circle(TWO_PI), [1.3], 0.4, [0.0])
    alphas = np.linspace(1.0, 5.0, 9)
    vals = [li_yau_quantity(ld, a, 0.4).y_alpha for a in alphas]
    slopes = np.diff(vals) / np.diff(alphas)
    assert np.allclose(slopes, -ld.dt_ln, rtol=0, atol=1e-12)


def test_alpha_monotonicity_sign_linked():
    # dt_ln <= 0 at the pole (kernel decays there), so Y_alpha increases in alpha
    ld = kernel_log_derivatives(Circle(TWO_PI), [0.0], 0.5, [0.0])
    assert ld.dt_ln < 0
    y1 = li_yau_quantity(ld, 1.0, 0.5).y_alpha
    y2 = li_yau_quantity(ld, 2.0, 0.5).y_alpha
    assert y2 > y1


def test_alpha_below_one_rejected():
    ld = kernel_log_derivatives(Euclidean(1), [0.0], 1.0, [0.0])
    with pytest.raises(DomainError):
        li_yau_quantity(ld, 0.5, 1.0)


# ---------------------------------------------------------------------------
# Bochner residual
# ---------------------------------------------------------------------------

def test_bochner_euclidean_equality():
    # the Gaussian attains equality: Hessian of ln u is pure trace and K = 0
    for (x, t) in [([0.3, -0.5], 0.5), ([1.0, 2.0], 1.5), ([0.0, 0.0], 0.2)]:
        lhs, rhs, res = bochner_residual(Euclidean(2), x, t, [0.0, 0.0])
        assert abs(res) < 1e-6
        # rhs = (2/n) Y^2 with Y = n/(2t) = 1/t here, no curvature term
        assert rhs == pytest.approx(1 / t**2, rel=1e-4)


def test_bochner_euclidean_rhs_at_origin():
    n, t = 3, 0.7
    _, rhs, _ = bochner_residual(Euclidean(n), [0.0] * n, t, [0.0] * n)
    assert rhs == pytest.approx(n / (2 * t**2), rel=1e-10)


def test_bochner_h3_nonnegative():
    rng = np.random.default_rng(21)
    worst = math.inf
    for _ in range(25):
        r = 0.1 + rng.random() * 4.9
        t = 0.1 + rng.random() * 1.9
        _, _, res = bochner_residual(Hyperbolic3(), [r], t, [0.0])
        worst = min(worst, res)
    assert worst >= -1e-4


def test_bochner_h3_spot_value():
    lhs, rhs, res = bochner_residual(Hyperbolic3(), [2.0], 0.5, [0.0])
    assert res >= -1e-4
    # exact residual is 2(f'' - coth(r) f')^2 / 3 with f = ln G; strictly
    # positive away from the equality case
    assert res > 1e-3
    # tightened steps agree, so the sign is not a step artifact
    _, _, res_fine = bochner_residual(Hyperbolic3(), [2.0], 0.5, [0.0], h=2.5e-4)
    assert res_fine == pytest.approx(res, abs=1e-5)


def test_bochner_unsupported():
    with pytest.raises(UnsupportedManifoldError):
        bochner_residual(Circle(TWO_PI), [0.0], 0.5, [0.0])


# ---------------------------------------------------------------------------
# mixtures
# ---------------------------------------------------------------------------

def test_single_source_mixture_matches_kernel():
    m = Circle(TWO_PI)
    mix = MixtureSolution(m, ((( 1.0,), 2.5),))
    ld_mix = mixture_log_derivatives(mix, [0.4], 0.3)
    ld_ker = kernel_log_derivatives(m, [0.4], 0.3, [1.0])
    assert ld_mix.grad_ln == ld_ker.grad_ln
    assert ld_mix.dt_ln == ld_ker.dt_ln
    assert ld_mix.grad_norm_sq == ld_ker.grad_norm_sq


def test_antipodal_mixture_symmetry():
    m = Circle(TWO_PI)
    mix = MixtureSolution(m, (((0.0,), 1.0), ((np.pi,), 1.0)))
    at_source = mixture_log_derivatives(mix, [0.0], 0.4)
    assert at_source.grad_ln[0] == pytest.approx(0.0, abs=1e-13)
    midway = mixture_log_derivatives(mix, [np.pi / 2], 0.4)
    assert midway.grad_ln[0] == pytest.approx(0.0, abs=1e-13)


def test_antipodal_mixture_strictly_below_kernel_sup():
    # at the midpoint the Cauchy-Schwarz bound is strict
    m = Circle(TWO_PI)
    t = 0.3
    mix = MixtureSolution(m, (((0.0,), 1.0), ((np.pi,), 1.0)))
    ld = mixture_log_derivatives(mix, [np.pi / 2], t)
    ty_mix = t * (ld.grad_norm_sq - ld.dt_ln)
    tys = []
    for y in (0.0, np.pi):
        lk = kernel_log_derivatives(m, [np.pi / 2], t, [y])
        tys.append(t * (lk.grad_norm_sq - lk.dt_ln))
    assert ty_mix < max(tys) - 1e-3


def test_mixture_scale_invariance():
    # log-space mixing shifts every ln w_i by ln c, so the softmax weights
    # move by at most an ulp of the shift
    m = Circle(TWO_PI)
    sources = (((0.3,), 1.0), ((2.0,), 5.0), ((4.4,), 0.02))
    scaled = tuple((c, w * 7.3e4) for c, w in sources)
    X = np.linspace(0, TWO_PI, 64, endpoint=False)[:, None]
    a = mixture_grid_log_derivatives(MixtureSolution(m, sources), X, 0.5)
    b = mixture_grid_log_derivatives(MixtureSolution(m, scaled), X, 0.5)
    assert np.allclose(a.gnsq, b.gnsq, rtol=1e-13, atol=1e-15)
    assert np.allclose(a.dtln, b.dtln, rtol=1e-13, atol=1e-15)
    assert np.allclose(a.grad, b.grad, rtol=1e-13, atol=1e-15)


def test_mixture_heat_identity():
    rng = np.random.default_rng(17)
    m = FlatTorus((TWO_PI, TWO_PI))
    for _ in range(100):
        k = int(rng.integers(1, 5))
        sources = tuple((tuple(rng.random(2) * TWO_PI), float(10 ** rng.uniform(-2, 2)))
                        for _ in range(k))
        mix = MixtureSolution(m, sources)
        x = rng.random(2) * TWO_PI
        t = 0.05 + rng.random()
        ld = mixture_log_derivatives(mix, x, t)
        scale = 1 + ld.grad_norm_sq + abs(ld.dt_ln)
        assert abs(ld.heat_identity_residual()) <= max(1e-9, 10 * ld.error_estimate) * scale


def test_mixture_transfer_pointwise():
    # t Y[u] <= max over sources of t Y[G] pointwise (Cauchy-Schwarz)
    rng = np.random.default_rng(3)
    m = Circle(TWO_PI)
    X = np.linspace(0, TWO_PI, 128, endpoint=False)[:, None]
    for _ in range(20):
        k = int(rng.integers(1, 6))
        sources = tuple((tuple(rng.random(1) * TWO_PI), float(10 ** rng.uniform(-3, 3)))
                        for _ in range(k))
        mix = MixtureSolution(m, sources)
        t = 0.05 + rng.random()
        evu = mixture_grid_log_derivatives(mix, X, t)
        ty_u = evu.ty(t)
        ty_src = np.max(np.stack(
            [grid_log_derivatives(m, X, t, np.asarray(c)).ty(t) for c, _ in sources]),
            axis=0)
        assert np.all(ty_u <= ty_src + 1e-8)


def test_mixture_with_offset():
    m = Circle(TWO_PI)
    mix = MixtureSolution(m, (((0.0,), 1.0),), start_offset=0.2)
    ld = mixture_log_derivatives(mix, [1.0], 0.3)
    direct = kernel_log_derivatives(m, [1.0], 0.5, [0.0])
    assert ld.dt_ln == pytest.approx(direct.dt_ln, rel=1e-12)


def test_mixture_validation():
    m = Circle(TWO_PI)
    with pytest.raises(DomainError):
        MixtureSolution(m, ())
    with pytest.raises(DomainError):
        MixtureSolution(m, (((0.0,), -1.0),))
    with pytest.raises(DomainError):
        MixtureSolution(m, (((0.0,), 1.0),), start_offset=-0.1)


def test_mixture_unresolved_far_field():
    s = Sphere2(1.0)
    mix = MixtureSolution(s, (((0.0, 0.0), 1.0),))
    with pytest.raises(UnresolvedEvaluationError):
        mixture_log_derivatives(mix, [np.pi, 0.0], 0.05)
