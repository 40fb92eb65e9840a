"""Spectral models for surfaces of revolution.

Separation of variables on the metric rho(v)^2 du^2 + a^2 dv^2 reduces the
Laplace-Beltrami eigenproblem to one periodic Sturm-Liouville problem per
Fourier mode m in u:

    -(1/(a rho)) d/dv( (rho/a) dphi/dv ) + (m^2/rho^2) phi = lambda phi,

self-adjoint under the weight rho * a * dv.  We discretize with second-order
central differences in self-adjoint form, symmetrize with the square root of
the weight, and solve the dense symmetric eigenproblem, which guarantees a
real nonnegative spectrum and discrete orthonormality by construction.

A SpectralModel retains every eigenpair below an eigenvalue cutoff chosen so
the truncation tail bound at t_min falls below the requested tolerance; the
dropped-but-computed eigenvalues and an analytic bound on the never-computed
modes make the tail bound certifiable for any t >= t_min.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .errors import NumericalFailure, TruncationError
from .manifolds import ProfileCurve

MODEL_VERSION = "1"
DEFAULT_GRID_N = 256
DEFAULT_TOL = 1e-8
DEFAULT_T_MIN = 0.05
MODE_CAP = 512

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class SturmLiouvilleProblem:
    """m-mode reduction of -Laplace on the revolution metric."""
    mode: int
    rho: ProfileCurve
    grid_n: int

    @property
    def a(self) -> float:
        return self.rho.a

    def __post_init__(self):
        if self.mode < 0:
            raise ValueError(f"mode must be >= 0, got {self.mode}")
        if self.grid_n < 64:
            raise ValueError(f"grid_n must be >= 64, got {self.grid_n}")


def _fix_signs(phi: np.ndarray) -> np.ndarray:
    """Deterministic eigenvector signs: largest-magnitude entry positive."""
    idx = np.argmax(np.abs(phi), axis=0)
    signs = np.sign(phi[idx, np.arange(phi.shape[1])])
    signs[signs == 0] = 1.0
    return phi * signs


def eigen_solve_mode(p: SturmLiouvilleProblem, k: int | None = None):
    """Eigenpairs of the m-mode operator, ascending.

    Dense symmetric solve for the full spectrum (k=None), or sparse
    shift-invert for the k smallest pairs when k << grid_n.  Eigenvectors are
    grid samples orthonormal under the discrete weight rho * a * h.
    """
    n = p.grid_n
    a = p.a
    h = 2 * np.pi / n
    v = np.arange(n) * h
    rho = np.asarray(p.rho.rho(v), dtype=float)
    rho_mid = np.asarray(p.rho.rho(v + h / 2), dtype=float)
    weight = rho * a * h
    s = 1.0 / np.sqrt(weight)

    diag = (rho_mid + np.roll(rho_mid, 1)) / (a * h) + p.mode**2 * a * h / rho
    off = -rho_mid / (a * h)

    idx = np.arange(n)
    if k is None:
        S = np.zeros((n, n))
        S[idx, idx] = diag * s * s
        S[idx, (idx + 1) % n] += off * s * np.roll(s, -1)
        S[(idx + 1) % n, idx] += off * s * np.roll(s, -1)
        try:
            lam, psi = sla.eigh(S)
        except sla.LinAlgError as exc:
            raise NumericalFailure(
                f"dense eigensolve failed for mode {p.mode}, grid_n {n}: {exc}") from exc
    else:
        rows = np.concatenate([idx, idx, (idx + 1) % n])
        cols = np.concatenate([idx, (idx + 1) % n, idx])
        vals = np.concatenate([diag * s * s, off * s * np.roll(s, -1), off * s * np.roll(s, -1)])
        S = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        v0 = np.full(n, 1.0 / math.sqrt(n))
        try:
            lam, psi = eigsh(S, k=k, sigma=-1e-3, which="LM", v0=v0)
        except Exception as exc:
            raise NumericalFailure(
                f"sparse eigensolve failed for mode {p.mode}, grid_n {n}: {exc}") from exc
        order = np.argsort(lam)
        lam, psi = lam[order], psi[:, order]
    lam = np.maximum(lam, 0.0)
    phi = _fix_signs(psi * s[:, None])
    return lam, phi


@dataclass(frozen=True)
class ModeBlock:
    """Retained eigenpairs of one u-mode; degeneracy 2 for m >= 1 is implicit
    (kernel assembly uses cos(m du) to sum the cos/sin pair)."""
    m: int
    lam: np.ndarray          # (J,) ascending
    phi_hat: np.ndarray      # rfft of grid samples, (grid_n//2 + 1, J)
    sup_phi: np.ndarray      # per-pair max |phi| on the grid
    sup_dphi: np.ndarray     # per-pair max |phi'| on the grid


@dataclass(frozen=True)
class SpectralModel:
    profile: ProfileCurve
    grid_n: int
    tol: float
    t_min: float
    modes: tuple[ModeBlock, ...]
    dropped_lam: np.ndarray      # computed eigenvalues above the cutoff
    dropped_m: np.ndarray
    lam0_full: np.ndarray        # full mode-0 spectrum, for remainder bounds
    eigen_cutoff: float
    mode_cutoff: int
    total_volume: float
    rho_min: float
    rho_max: float
    version: str = MODEL_VERSION

    @property
    def a(self) -> float:
        return self.profile.a

    @property
    def pair_sup(self) -> float:
        # discrete sup-norm bound 1/sqrt(a h rho_min) holds for every
        # eigenvector of the weighted problem; 1.1 covers trig interp overshoot
        h = 2 * np.pi / self.grid_n
        return 1.1 / math.sqrt(self.a * h * self.rho_min)

    def n_pairs(self) -> int:
        return sum(len(b.lam) for b in self.modes)


def _u_weight(m):
    """u-factor normalization: 1/(2 pi) for m = 0, cos(m du)/pi for m >= 1."""
    return np.where(np.asarray(m) == 0, 1.0 / (2 * np.pi), 1.0 / np.pi)


def _z0(model: SpectralModel, t: float) -> float:
    return float(np.sum(np.exp(-model.lam0_full * t)))


def kernel_tail_bounds(model: SpectralModel, t: float) -> dict[str, float]:
    """Absolute truncation bounds at time t for the kernel value and its
    term-wise u-, v- and t-derivative series."""
    C2 = model.pair_sup**2
    bern = model.grid_n / 2  # |phi'|_inf <= (N/2) |phi|_inf for the trig interpolant
    lam_d, m_d = model.dropped_lam, model.dropped_m
    w = _u_weight(m_d) * C2
    e = np.exp(-lam_d * t)
    val = float(np.sum(w * e))
    gu = float(np.sum(w * m_d * e))
    gv = val * bern
    dt = float(np.sum(w * lam_d * e))

    # modes never computed: lambda_{m,j} >= ell_m + mu_j with ell_m = m^2/rho_max^2
    # and mu_j the mode-0 spectrum (min-max, the m^2/rho^2 shift is >= ell_m)
    M = model.mode_cutoff
    s = t / model.rho_max**2
    ms = np.arange(M + 1, M + 2 + int(math.ceil(6.0 / math.sqrt(max(s, 1e-12)))),
                   dtype=float)
    z0 = _z0(model, t)
    rem = np.exp(-(ms**2) * s)
    base = (C2 / np.pi) * z0
    val += base * float(rem.sum())
    gu += base * float((ms * rem).sum())
    gv += base * float(rem.sum()) * bern
    # ell_m >= eigen_cutoff >= 1/t, so lam e^{-lam t} is decreasing there and
    # lam e^{-lam t} <= (ell_m + mu_j) e^{-(ell_m + mu_j) t} term by term
    w0 = float(np.sum(model.lam0_full * np.exp(-model.lam0_full * t)))
    ell = ms**2 / model.rho_max**2
    dt += (C2 / np.pi) * float(np.sum(np.exp(-ell * t) * (ell * z0 + w0)))
    return {"value": val, "grad_u": gu, "grad_v": gv, "dt": dt}


def build_spectral_model(profile: ProfileCurve, grid_n: int = DEFAULT_GRID_N,
                         tol: float = DEFAULT_TOL, t_min: float = DEFAULT_T_MIN,
                         mode_cap: int = MODE_CAP,
                         cache_dir: str | None = None) -> SpectralModel:
    """Solve modes until the truncation tail at t_min is below tol.

    The model is valid for all t >= t_min; smaller times raise rather than
    silently degrade.
    """
    if tol <= 0 or t_min <= 0:
        raise ValueError("tol and t_min must be positive")
    if cache_dir is not None:
        cached = _load_cached(profile, grid_n, tol, t_min, cache_dir)
        if cached is not None:
            return cached

    n = grid_n
    h = 2 * np.pi / n
    v = np.arange(n) * h
    rho = np.asarray(profile.rho(v), dtype=float)
    rho_min, rho_max = float(rho.min()), float(rho.max())
    total_volume = float(2 * np.pi * profile.a * np.sum(rho) * h)

    solved: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def solve(m):
        if m not in solved:
            solved[m] = eigen_solve_mode(SturmLiouvilleProblem(m, profile, n))
        return solved[m]

    lam_cut = math.log(1e4 / tol) / t_min
    for _ in range(6):
        m = 0
        while True:
            lam, _ = solve(m)
            if lam[0] > lam_cut:
                break
            m += 1
            if m > mode_cap:
                raise TruncationError(
                    f"mode cutoff exceeded {mode_cap} before truncation tolerance "
                    f"{tol} was met at t_min={t_min}; increase t_min")
        mode_cutoff = m - 1
        model = _assemble(profile, n, tol, t_min, solved, lam_cut, mode_cutoff,
                          total_volume, rho_min, rho_max)
        if kernel_tail_bounds(model, t_min)["value"] <= tol:
            if cache_dir is not None:
                _save_cached(model, cache_dir)
            return model
        lam_cut += math.log(100.0) / t_min
    raise TruncationError(
        f"could not certify truncation tolerance {tol} at t_min={t_min} "
        f"with grid_n={grid_n}; increase t_min or grid_n")


def _assemble(profile, n, tol, t_min, solved, lam_cut, mode_cutoff,
              total_volume, rho_min, rho_max) -> SpectralModel:
    blocks = []
    dropped_lam, dropped_m = [], []
    ks = np.arange(n // 2 + 1)
    for m in range(mode_cutoff + 1):
        lam, phi = solved[m]
        keep = lam <= lam_cut
        phi_k = phi[:, keep]
        phi_hat = np.fft.rfft(phi_k, axis=0)
        dphi = np.fft.irfft(phi_hat * (1j * ks)[:, None], n=n, axis=0)
        blocks.append(ModeBlock(
            m=m, lam=lam[keep], phi_hat=phi_hat,
            sup_phi=np.abs(phi_k).max(axis=0),
            sup_dphi=np.abs(dphi).max(axis=0)))
        dropped_lam.append(lam[~keep])
        dropped_m.append(np.full((~keep).sum(), m))
    return SpectralModel(
        profile=profile, grid_n=n, tol=tol, t_min=t_min, modes=tuple(blocks),
        dropped_lam=np.concatenate(dropped_lam) if dropped_lam else np.empty(0),
        dropped_m=np.concatenate(dropped_m) if dropped_m else np.empty(0),
        lam0_full=solved[0][0].copy(), eigen_cutoff=lam_cut,
        mode_cutoff=mode_cutoff, total_volume=total_volume,
        rho_min=rho_min, rho_max=rho_max)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def basis_at(model: SpectralModel, v_points: np.ndarray):
    """Trig-interpolated eigenfunction values and v-derivatives at arbitrary v.

    Returns per-mode lists of (phi, dphi) arrays of shape (P, J); exact on the
    model grid because the interpolant passes through the samples.
    """
    v_points = np.atleast_1d(np.asarray(v_points, dtype=float))
    n = model.grid_n
    ks = np.arange(n // 2 + 1)
    E = np.exp(1j * np.outer(v_points, ks))
    w = np.full(n // 2 + 1, 2.0)
    w[0] = 1.0
    if n % 2 == 0:
        w[-1] = 1.0
    Ew = E * w / n
    out = []
    for block in model.modes:
        phi = np.real(Ew @ block.phi_hat)
        dphi = np.real(Ew @ (block.phi_hat * (1j * ks)[:, None]))
        out.append((phi, dphi))
    return out


def eval_grid(model: SpectralModel, u: np.ndarray, v: np.ndarray, t: float,
              y_uv) -> dict:
    """Kernel value and term-wise derivative sums on the tensor grid u x v.

    Returns (len(u), len(v)) arrays: value, du, dv, dt (derivatives of the
    kernel itself, not of its log), plus abs_* rounding-floor companions and
    the truncation tail bounds at t.
    """
    if t < model.t_min:
        raise TruncationError(
            f"t={t} below spectral validity threshold t_min={model.t_min}; "
            "rebuild the model with a smaller t_min")
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    y_u, y_v = float(y_uv[0]), float(y_uv[1])
    bases = basis_at(model, v)
    base_y = basis_at(model, np.array([y_v]))
    du_arr = u - y_u

    P, Q = len(u), len(v)
    out = {k: np.zeros((P, Q)) for k in ("value", "du", "dv", "dt",
                                         "abs_value", "abs_du", "abs_dv", "abs_dt")}
    for block, (phi, dphi), (phi_y, _) in zip(model.modes, bases, base_y):
        c = np.exp(-block.lam * t)
        py = phi_y[0]
        s = (phi * c) @ py          # (Q,)
        sv = (dphi * c) @ py
        st = (phi * (c * block.lam)) @ py
        s_abs = (np.abs(phi) * c) @ np.abs(py)
        sv_abs = (np.abs(dphi) * c) @ np.abs(py)
        st_abs = (np.abs(phi) * (c * block.lam)) @ np.abs(py)
        if block.m == 0:
            w = np.full(P, 1.0 / (2 * np.pi))
            wu = np.zeros(P)
        else:
            w = np.cos(block.m * du_arr) / np.pi
            wu = -block.m * np.sin(block.m * du_arr) / np.pi
        out["value"] += np.outer(w, s)
        out["du"] += np.outer(wu, s)
        out["dv"] += np.outer(w, sv)
        out["dt"] -= np.outer(w, st)
        out["abs_value"] += np.outer(np.abs(w), s_abs)
        out["abs_du"] += np.outer(np.abs(wu), s_abs)
        out["abs_dv"] += np.outer(np.abs(w), sv_abs)
        out["abs_dt"] += np.outer(np.abs(w), st_abs)
    out["tails"] = kernel_tail_bounds(model, t)
    return out


def eval_points(model: SpectralModel, X: np.ndarray, t: float, y_uv) -> dict:
    """Same as eval_grid for scattered (u, v) points of shape (P, 2).

    Repeated v-coordinates (grids flattened into point lists) are deduplicated
    before basis interpolation, which is the dominant cost.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if t < model.t_min:
        raise TruncationError(
            f"t={t} below spectral validity threshold t_min={model.t_min}")
    y_u, y_v = float(y_uv[0]), float(y_uv[1])
    v_unique, inv = np.unique(X[:, 1], return_inverse=True)
    bases = basis_at(model, v_unique)
    base_y = basis_at(model, np.array([y_v]))
    du_arr = X[:, 0] - y_u
    P = X.shape[0]
    out = {k: np.zeros(P) for k in ("value", "du", "dv", "dt",
                                    "abs_value", "abs_du", "abs_dv", "abs_dt")}
    for block, (phi, dphi), (phi_y, _) in zip(model.modes, bases, base_y):
        c = np.exp(-block.lam * t)
        py = phi_y[0]
        cross = ((phi * c) @ py)[inv]
        cross_v = ((dphi * c) @ py)[inv]
        cross_t = ((phi * (c * block.lam)) @ py)[inv]
        cross_abs = ((np.abs(phi) * c) @ np.abs(py))[inv]
        crossv_abs = ((np.abs(dphi) * c) @ np.abs(py))[inv]
        crosst_abs = ((np.abs(phi) * (c * block.lam)) @ np.abs(py))[inv]
        if block.m == 0:
            w = np.full(P, 1.0 / (2 * np.pi))
            wu = np.zeros(P)
        else:
            w = np.cos(block.m * du_arr) / np.pi
            wu = -block.m * np.sin(block.m * du_arr) / np.pi
        out["value"] += w * cross
        out["du"] += wu * cross
        out["dv"] += w * cross_v
        out["dt"] -= w * cross_t
        out["abs_value"] += np.abs(w) * cross_abs
        out["abs_du"] += np.abs(wu) * cross_abs
        out["abs_dv"] += np.abs(w) * crossv_abs
        out["abs_dt"] += np.abs(w) * crosst_abs
    out["tails"] = kernel_tail_bounds(model, t)
    return out


# ---------------------------------------------------------------------------
# flat-torus oracle
# ---------------------------------------------------------------------------

def _wrapped_gaussian(delta: float, t: float, L: float) -> float:
    """Independent circle-kernel oracle for the validation report."""
    kmax = int(math.ceil((abs(delta) + math.sqrt(4 * t * 60.0)) / L)) + 2
    k = np.arange(-kmax, kmax + 1)
    return float(np.sum(np.exp(-((delta + k * L) ** 2) / (4 * t))) / math.sqrt(4 * np.pi * t))


def flat_torus_exact_eigenvalues(R: float, a: float, count: int) -> np.ndarray:
    """Smallest eigenvalues m^2/R^2 + k^2/a^2 with degeneracies, ascending."""
    out = []
    mmax = int(math.ceil(R * math.sqrt(count) + 2)) + 4
    kmax = int(math.ceil(a * math.sqrt(count) + 2)) + 4
    for m in range(mmax + 1):
        for k in range(kmax + 1):
            lam = m**2 / R**2 + k**2 / a**2
            deg = (1 if m == 0 else 2) * (1 if k == 0 else 2)
            out.extend([lam] * deg)
    return np.sort(np.asarray(out))[:count]


def validate_against_flat_torus(model: SpectralModel | None = None, *,
                                R: float = 1.0, a: float = 1.0,
                                grid_n: int = 2048, n_eigs: int = 25,
                                kernel_times: tuple[float, ...] = (0.5,),
                                refinement: bool = True) -> dict:
    """Solver oracle: constant profile rho == R is the flat torus.

    Compares discrete eigenvalues against the exact lattice m^2/R^2 + k^2/a^2
    and the assembled kernel against a product of wrapped-Gaussian circle
    kernels.  When ``model`` is given it must come from a constant profile;
    otherwise dedicated mode solves at ``grid_n`` are used.
    """
    if model is not None:
        prof = model.profile
        if prof.torus is not None or float(np.ptp(prof.rho(np.linspace(0, 2 * np.pi, 64)))) > 1e-12:
            raise ValueError("validation model must be built from a constant profile")
        R = float(prof.rho(0.0))
        a = prof.a
        grid_n = model.grid_n

    def eig_errors(n: int) -> np.ndarray:
        mmax = int(math.ceil(R * math.sqrt(n_eigs))) + 2
        per_mode = []
        for m in range(mmax + 1):
            prob = SturmLiouvilleProblem(m, _constant_profile(R, a, n), n)
            k = min(2 * int(math.ceil(a * math.sqrt(n_eigs))) + 6, n - 2)
            lam, _ = eigen_solve_mode(prob, k=k)
            deg = 1 if m == 0 else 2
            per_mode.append(np.repeat(lam, deg))
        approx = np.sort(np.concatenate(per_mode))[:n_eigs]
        exact = flat_torus_exact_eigenvalues(R, a, n_eigs)
        nz = exact > 0
        errs = np.zeros(n_eigs)
        errs[nz] = np.abs(approx[nz] - exact[nz]) / exact[nz]
        errs[~nz] = np.abs(approx[~nz])
        return errs

    errs = eig_errors(grid_n)
    report = {
        "R": R, "a": a, "grid_n": grid_n, "n_eigs": n_eigs,
        "max_rel_eig_error": float(errs.max()),
    }
    if refinement:
        errs_half = eig_errors(grid_n // 2)
        nz = errs > 1e-14
        report["refinement_ratio_median"] = float(np.median(errs_half[nz] / errs[nz]))

    if model is not None:
        kerr = 0.0
        B = basis_at(model, np.array([0.0]))
        # surface eigenfunction carries the u-factor 1/sqrt(2 pi) on top of the
        # v-problem normalization
        lam0_err = abs(float(B[0][0][0, 0]) / math.sqrt(2 * math.pi)
                       - 1.0 / math.sqrt(model.total_volume))
        for t in kernel_times:
            for (du, dv) in ((0.0, 0.0), (1.1, 0.4), (np.pi, np.pi)):
                got = eval_points(model, np.array([[du, dv]]), t, (0.0, 0.0))["value"][0]
                want = (_wrapped_gaussian(du * R, t, 2 * np.pi * R)
                        * _wrapped_gaussian(dv * a, t, 2 * np.pi * a))
                kerr = max(kerr, abs(got - want))
        report["max_kernel_error"] = kerr
        report["lam0_eigenfunction_error"] = lam0_err
    return report


def _constant_profile(R: float, a: float, n: int = 64) -> ProfileCurve:
    return ProfileCurve(samples=np.full(max(n, 16), float(R)), a=a)


# ---------------------------------------------------------------------------
# cache file
# ---------------------------------------------------------------------------

def model_cache_key(profile: ProfileCurve, grid_n: int, tol: float, t_min: float) -> str:
    raw = repr((MODEL_VERSION, profile.cache_key(), grid_n, tol, t_min)).encode()
    return hashlib.sha256(raw).hexdigest()[:24]


def _cache_path(cache_dir, key):
    return os.path.join(cache_dir, f"spectral-{key}.npz")


def _save_cached(model: SpectralModel, cache_dir: str) -> str:
    os.makedirs(cache_dir, exist_ok=True)
    key = model_cache_key(model.profile, model.grid_n, model.tol, model.t_min)
    arrays = {
        "dropped_lam": model.dropped_lam, "dropped_m": model.dropped_m,
        "lam0_full": model.lam0_full,
    }
    meta = {
        "version": model.version, "grid_n": model.grid_n, "tol": model.tol,
        "t_min": model.t_min, "eigen_cutoff": model.eigen_cutoff,
        "mode_cutoff": model.mode_cutoff, "total_volume": model.total_volume,
        "rho_min": model.rho_min, "rho_max": model.rho_max,
        "n_modes": len(model.modes),
    }
    for i, b in enumerate(model.modes):
        arrays[f"lam_{i}"] = b.lam
        arrays[f"phihat_{i}"] = b.phi_hat
        arrays[f"supphi_{i}"] = b.sup_phi
        arrays[f"supdphi_{i}"] = b.sup_dphi
    path = _cache_path(cache_dir, key)
    np.savez(path, meta=json.dumps(meta, sort_keys=True), **arrays)
    return path


def _load_cached(profile, grid_n, tol, t_min, cache_dir) -> SpectralModel | None:
    key = model_cache_key(profile, grid_n, tol, t_min)
    path = _cache_path(cache_dir, key)
    if not os.path.exists(path):
        return None
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta["version"] != MODEL_VERSION:
            return None
        blocks = tuple(
            ModeBlock(m=i, lam=data[f"lam_{i}"], phi_hat=data[f"phihat_{i}"],
                      sup_phi=data[f"supphi_{i}"], sup_dphi=data[f"supdphi_{i}"])
            for i in range(meta["n_modes"]))
        return SpectralModel(
            profile=profile, grid_n=grid_n, tol=tol, t_min=t_min, modes=blocks,
            dropped_lam=data["dropped_lam"], dropped_m=data["dropped_m"],
            lam0_full=data["lam0_full"], eigen_cutoff=meta["eigen_cutoff"],
            mode_cutoff=meta["mode_cutoff"], total_volume=meta["total_volume"],
            rho_min=meta["rho_min"], rho_max=meta["rho_max"])
