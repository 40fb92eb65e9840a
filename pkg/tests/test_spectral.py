import numpy as np
import pytest

from heatlab.errors import TruncationError
from heatlab.manifolds import ProfileCurve
from heatlab.spectral import (
    SturmLiouvilleProblem,
    basis_at,
    build_spectral_model,
    eigen_solve_mode,
    eval_grid,
    eval_points,
    flat_torus_exact_eigenvalues,
    kernel_tail_bounds,
    model_cache_key,
    validate_against_flat_torus,
)

TWO_PI = 2 * np.pi


def constant_profile(R=1.0, a=1.0, n=64):
    return ProfileCurve(samples=np.full(n, R), a=a)


# ---------------------------------------------------------------------------
# mode solves
# ---------------------------------------------------------------------------

def test_constant_profile_mode0_spectrum():
    # exact periodic spectrum k^2 with double eigenvalues for k >= 1
    lam, _ = eigen_solve_mode(SturmLiouvilleProblem(0, constant_profile(), 2048), k=16)
    exact = np.sort(np.concatenate([[0.0], np.repeat(np.arange(1, 9) ** 2.0, 2)]))[:16]
    nz = exact > 0
    assert np.max(np.abs(lam[nz] - exact[nz]) / exact[nz]) < 1e-3
    assert abs(lam[0]) < 1e-9


def test_constant_profile_mode2_spectrum():
    lam, _ = eigen_solve_mode(SturmLiouvilleProblem(2, constant_profile(), 2048), k=10)
    exact = np.sort([4.0] + [5.0] * 2 + [8.0] * 2 + [13.0] * 2 + [20.0] * 2 + [29.0])[:10]
    assert np.max(np.abs(lam - exact) / exact) < 1e-3


def test_first_eigenpair_is_constant():
    prof = ProfileCurve(torus=(2.0, 1.0), a=1.0)
    lam, phi = eigen_solve_mode(SturmLiouvilleProblem(0, prof, 256))
    assert lam[0] < 1e-10
    v0 = phi[:, 0]
    assert np.ptp(v0) < 1e-8 * np.abs(v0).max()


def test_dense_sparse_agree():
    prof = ProfileCurve(torus=(2.0, 1.0), a=1.0)
    p = SturmLiouvilleProblem(3, prof, 256)
    lam_dense, _ = eigen_solve_mode(p)
    lam_sparse, _ = eigen_solve_mode(p, k=8)
    assert np.allclose(lam_dense[:8], lam_sparse, rtol=1e-9, atol=1e-9)


def test_refinement_is_second_order():
    # spec property: error ratio between grid_n and 2 grid_n ~ 4 (+-25%)
    prof_n = lambda n: ProfileCurve(samples=2.0 + np.cos(np.arange(n) * TWO_PI / n), a=1.0)
    ref, _ = eigen_solve_mode(SturmLiouvilleProblem(0, prof_n(4096), 4096), k=12)
    errs = []
    for n in (256, 512):
        lam, _ = eigen_solve_mode(SturmLiouvilleProblem(0, prof_n(n), n), k=12)
        errs.append(np.abs(lam[1:11] - ref[1:11]))
    ratios = errs[0] / np.maximum(errs[1], 1e-300)
    med = np.median(ratios)
    assert 3.0 <= med <= 5.0


# ---------------------------------------------------------------------------
# model build
# ---------------------------------------------------------------------------

def test_model_tail_certified(rev_torus_model):
    m = rev_torus_model
    assert kernel_tail_bounds(m, m.t_min)["value"] <= m.tol
    assert m.mode_cutoff >= 10
    assert m.total_volume == pytest.approx(8 * np.pi**2, rel=1e-12)


def test_model_orthonormality(rev_torus_model):
    # Gram matrix under the weight rho * a * h must be the identity
    m = rev_torus_model
    n = m.grid_n
    h = TWO_PI / n
    v = np.arange(n) * h
    w = np.asarray(m.profile.rho(v)) * m.profile.a * h
    for block in m.modes[:5]:
        phi = np.fft.irfft(block.phi_hat, n=n, axis=0)
        gram = (phi * w[:, None]).T @ phi
        assert np.max(np.abs(gram - np.eye(phi.shape[1]))) < 1e-8


def test_ground_state_is_equilibrium_density(rev_torus_model):
    # surface eigenfunction phi_0 / sqrt(2 pi) must be the constant 1/sqrt(V)
    m = rev_torus_model
    phi0 = np.fft.irfft(m.modes[0].phi_hat[:, 0], n=m.grid_n)
    surf = phi0 / np.sqrt(2 * np.pi)
    assert np.max(np.abs(np.abs(surf) - 1 / np.sqrt(m.total_volume))) < 1e-8


def test_semigroup_on_revolution_surface(rev_torus_model, rev_torus):
    # independent consistency check of the u-factor normalization: composing
    # the kernel with itself over the surface must reproduce it at t1 + t2
    model = rev_torus_model
    n = model.grid_n
    h = TWO_PI / n
    grid = np.arange(n) * h
    t1, t2 = 0.3, 0.5
    x, y = (1.1, 0.7), (0.0, 2.0)
    g1 = eval_grid(model, grid, grid, t1, x)["value"]     # G(x, t1, z) over z
    g2 = eval_grid(model, grid, grid, t2, y)["value"]     # G(y, t2, z) over z
    rho = np.asarray(model.profile.rho(grid))
    conv = float(np.sum(g1 * g2 * rho[None, :]) * model.a * h * h)
    direct = eval_points(model, np.array([x]), t1 + t2, y)["value"][0]
    assert conv == pytest.approx(direct, rel=1e-8)


def test_large_tmin_kernel_is_equilibrium():
    # spectral gap of the R=2, a=1 torus is ~0.249, so t=30 gives e^-7.5
    prof = ProfileCurve(torus=(2.0, 1.0), a=1.0)
    model = build_spectral_model(prof, grid_n=128, tol=1e-8, t_min=10.0)
    out = eval_points(model, np.array([[0.3, 1.0], [2.0, 4.0]]), 30.0, (0.0, 0.0))
    v = out["value"]
    assert np.all(np.abs(v * model.total_volume - 1) < 0.01)


def test_heat_trace_decreasing(rev_torus_model):
    m = rev_torus_model
    lams = np.concatenate([np.repeat(b.lam, 1 if b.m == 0 else 2) for b in m.modes])
    traces = [np.sum(np.exp(-lams * t)) for t in (0.1, 0.3, 1.0, 3.0)]
    assert all(b < a for a, b in zip(traces, traces[1:]))


def test_weyl_growth(rev_torus_model):
    # count below Lambda grows linearly, slope within factor 2 of area/(4 pi)
    m = rev_torus_model
    lams = np.sort(np.concatenate(
        [np.repeat(b.lam, 1 if b.m == 0 else 2) for b in m.modes]))
    lam_max = m.eigen_cutoff
    n_full = np.sum(lams <= lam_max)
    n_half = np.sum(lams <= lam_max / 2)
    slope = (n_full - n_half) / (lam_max / 2)
    weyl = m.total_volume / (4 * np.pi)
    assert weyl / 2 <= slope <= weyl * 2


def test_truncation_errors():
    prof = ProfileCurve(torus=(2.0, 1.0), a=1.0)
    with pytest.raises(TruncationError):
        build_spectral_model(prof, grid_n=128, tol=1e-8, t_min=0.05, mode_cap=4)
    model = build_spectral_model(prof, grid_n=128, tol=1e-6, t_min=0.5)
    with pytest.raises(TruncationError):
        eval_points(model, np.array([[0.0, 0.0]]), 0.1, (0.0, 0.0))


def test_truncation_tail_is_honest():
    # tighter-tolerance model is the oracle for the dropped terms
    prof = ProfileCurve(torus=(2.0, 1.0), a=1.0)
    loose = build_spectral_model(prof, grid_n=128, tol=1e-4, t_min=0.3)
    tight = build_spectral_model(prof, grid_n=128, tol=1e-12, t_min=0.3)
    X = np.array([[0.0, 0.0], [1.0, 2.0], [3.0, 0.5]])
    for t in (0.3, 0.6, 1.5):
        va = eval_points(loose, X, t, (0.0, 0.0))["value"]
        vb = eval_points(tight, X, t, (0.0, 0.0))["value"]
        bound = kernel_tail_bounds(loose, t)["value"] + kernel_tail_bounds(tight, t)["value"]
        assert np.max(np.abs(va - vb)) <= bound + 1e-15


def test_basis_interpolation_exact_on_grid(rev_torus_model):
    m = rev_torus_model
    n = m.grid_n
    v = np.arange(n) * TWO_PI / n
    got = basis_at(m, v[:10])
    phi0 = np.fft.irfft(m.modes[0].phi_hat, n=n, axis=0)
    assert np.allclose(got[0][0], phi0[:10], atol=1e-10)


def test_grid_and_points_agree(rev_torus_model):
    m = rev_torus_model
    u = np.array([0.0, 1.0, 2.5])
    v = np.array([0.3, 4.0])
    grid = eval_grid(m, u, v, 0.2, (0.0, 1.0))
    X = np.array([[uu, vv] for uu in u for vv in v])
    pts = eval_points(m, X, 0.2, (0.0, 1.0))
    assert np.allclose(grid["value"].ravel(), pts["value"], atol=1e-14)
    assert np.allclose(grid["dt"].ravel(), pts["dt"], atol=1e-12)


# ---------------------------------------------------------------------------
# flat-torus validation oracle
# ---------------------------------------------------------------------------

def test_validate_eigenvalues_small_grid():
    report = validate_against_flat_torus(R=1.0, a=1.0, grid_n=512, n_eigs=15)
    assert report["max_rel_eig_error"] < 2e-2
    assert 3.0 <= report["refinement_ratio_median"] <= 5.0


def test_validate_kernel_against_wrapped_product():
    # eigenvalue discretization error ~ lam^2 h^2/12 drives the kernel error,
    # so the 1e-6 target needs grid_n >= 1024
    model = build_spectral_model(constant_profile(1.0, 1.0, 128), grid_n=1024,
                                 tol=1e-8, t_min=0.3)
    report = validate_against_flat_torus(model, kernel_times=(0.5, 1.0),
                                         refinement=False)
    assert report["max_kernel_error"] < 1e-6
    assert report["lam0_eigenfunction_error"] < 1e-8


def test_exact_lattice_helper():
    lat = flat_torus_exact_eigenvalues(1.0, 1.0, 7)
    assert np.allclose(lat, [0, 1, 1, 1, 1, 2, 2])


def test_cache_roundtrip(tmp_path):
    prof = ProfileCurve(torus=(2.0, 1.0), a=1.0)
    m1 = build_spectral_model(prof, grid_n=128, tol=1e-6, t_min=0.3,
                              cache_dir=str(tmp_path))
    assert len(list(tmp_path.iterdir())) == 1
    m2 = build_spectral_model(prof, grid_n=128, tol=1e-6, t_min=0.3,
                              cache_dir=str(tmp_path))
    X = np.array([[0.1, 0.2], [2.0, 3.0]])
    a = eval_points(m1, X, 0.4, (0.0, 0.0))["value"]
    b = eval_points(m2, X, 0.4, (0.0, 0.0))["value"]
    # cache hit must reproduce bit-identical kernel values
    assert a.tobytes() == b.tobytes()
    assert model_cache_key(prof, 128, 1e-6, 0.3) in str(list(tmp_path.iterdir())[0])
