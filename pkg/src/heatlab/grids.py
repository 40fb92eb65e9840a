"""Grid specifications: time grids, space grids, pole sets.

The t-grid grammar is ``lo:hi:lin|log:count`` so every run is reproducible
from its command line alone.  Space grids are per-manifold canonical grids;
pole sets follow the coarse-subgrid policy (default 8 per period) where the
pole actually matters, and collapse to a single pole on homogeneous
directions where it provably does not (translation/rotation invariance).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SpecParseError
from .manifolds import (
    Circle,
    Euclidean,
    FlatTorus,
    Hyperbolic3,
    Manifold,
    Product,
    RevolutionSurface,
    Sphere2,
    format_manifold,
)

DEFAULT_POLES_PER_PERIOD = 8
DEFAULT_WINDOW = 6.0       # half-width of the space window on noncompact charts
MAX_GRID_POINTS = 1 << 20


def parse_tgrid(desc: str) -> tuple[float, ...]:
    """Parse ``lo:hi:lin|log:count`` into an explicit time tuple."""
    parts = desc.split(":")
    if len(parts) != 4:
        raise SpecParseError(f"t-grid {desc!r} must be lo:hi:lin|log:count")
    lo_s, hi_s, kind, count_s = parts
    try:
        lo, hi = float(lo_s), float(hi_s)
    except ValueError:
        raise SpecParseError(f"t-grid bounds {lo_s!r}:{hi_s!r} are not numbers")
    try:
        count = int(count_s)
    except ValueError:
        raise SpecParseError(f"t-grid count {count_s!r} is not an integer")
    if count < 2:
        raise SpecParseError(f"t-grid count must be >= 2, got {count}")
    if not 0 < lo <= hi:
        raise SpecParseError(f"t-grid needs 0 < lo <= hi, got {lo}:{hi}")
    if kind == "lin":
        ts = np.linspace(lo, hi, count)
    elif kind == "log":
        ts = np.geomspace(lo, hi, count)
    else:
        raise SpecParseError(f"t-grid spacing {kind!r} must be 'lin' or 'log'")
    return tuple(float(t) for t in ts)


@dataclass(frozen=True)
class GridSpec:
    """Evaluation grid: times, per-period space resolution, kernel poles."""
    t_points: tuple[float, ...]
    space_resolution: int = 128
    pole_set: tuple[tuple[float, ...], ...] = ()
    window: float = DEFAULT_WINDOW   # only used on noncompact charts

    def __post_init__(self):
        if len(self.t_points) < 2:
            raise DomainError("grid needs at least 2 time points")
        if self.space_resolution < 16:
            raise DomainError(
                f"space resolution {self.space_resolution} too coarse; need >= 16")

    @staticmethod
    def build(m: Manifold, tgrid: str = "0.1:10:log:20", res: int = 128,
              poles: int = DEFAULT_POLES_PER_PERIOD,
              window: float = DEFAULT_WINDOW) -> "GridSpec":
        return GridSpec(t_points=parse_tgrid(tgrid), space_resolution=res,
                        pole_set=default_poles(m, poles), window=window)

    def with_resolution(self, res: int) -> "GridSpec":
        return GridSpec(self.t_points, res, self.pole_set, self.window)


def space_points(m: Manifold, res: int, window: float = DEFAULT_WINDOW) -> np.ndarray:
    """Canonical space grid as an (P, arity) array of chart coordinates."""
    match m:
        case Circle(L):
            return (np.arange(res) * (L / res))[:, None]
        case FlatTorus(lengths):
            axes = [np.arange(res) * (L / res) for L in lengths]
            return _mesh(axes)
        case Sphere2():
            # two-point homogeneity: the kernel depends on the geodesic angle
            # only, so a colatitude sweep at phi=0 exhausts the distance set
            theta = np.linspace(0.0, math.pi, res)
            return np.stack([theta, np.zeros(res)], axis=1)
        case Hyperbolic3():
            return np.linspace(0.0, window, res)[:, None]
        case Euclidean(n):
            per = max(2, int(round(res ** (1.0 / n))))
            axes = [np.linspace(-window, window, per)] * n
            return _mesh(axes)
        case RevolutionSurface():
            u = np.arange(res) * (2 * np.pi / res)
            v = np.arange(res) * (2 * np.pi / res)
            return _mesh([u, v])
        case Product(left, right):
            xl = space_points(left, res, window)
            xr = space_points(right, res, window)
            if len(xl) * len(xr) > MAX_GRID_POINTS:
                raise DomainError(
                    f"product grid {len(xl)}x{len(xr)} exceeds {MAX_GRID_POINTS} points; "
                    "lower --res")
            out = np.empty((len(xl) * len(xr), xl.shape[1] + xr.shape[1]))
            out[:, :xl.shape[1]] = np.repeat(xl, len(xr), axis=0)
            out[:, xl.shape[1]:] = np.tile(xr, (len(xl), 1))
            return out
    raise DomainError(f"no canonical grid for {format_manifold(m)}")


def _mesh(axes) -> np.ndarray:
    if math.prod(len(a) for a in axes) > MAX_GRID_POINTS:
        raise DomainError(
            f"grid of {math.prod(len(a) for a in axes)} points exceeds "
            f"{MAX_GRID_POINTS}; lower --res")
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def default_poles(m: Manifold, count: int = DEFAULT_POLES_PER_PERIOD
                  ) -> tuple[tuple[float, ...], ...]:
    """Coarse pole sub-grid; a single pole where homogeneity makes more redundant."""
    match m:
        case Circle(L):
            return tuple((i * L / count,) for i in range(count))
        case FlatTorus(lengths):
            # diagonal placement; translation invariance makes every pole
            # equivalent, so the set doubles as a consistency probe
            return tuple(tuple(i * L / count for L in lengths) for i in range(count))
        case Sphere2():
            return ((0.0, 0.0),)
        case Euclidean(n):
            return ((0.0,) * n,)
        case Hyperbolic3():
            return ((0.0,),)
        case RevolutionSurface():
            # u-translation invariance: poles vary along the meridian only
            return tuple((0.0, i * 2 * np.pi / count) for i in range(count))
        case Product(left, right):
            pl = default_poles(left, count)
            pr = default_poles(right, count)
            # zip-style pairing keeps the pole count linear in `count`
            k = max(len(pl), len(pr))
            return tuple(pl[i % len(pl)] + pr[i % len(pr)] for i in range(k))
    raise DomainError(f"no pole policy for {format_manifold(m)}")
