"""Discrete composition grids: uniform binary grids, feed augmentation, simplex lattices.

All mole fractions live in the open interval (0, 1); exact 0/1 are excluded
because x ln x is only finite there by limit and its derivatives diverge.
Grids are immutable after construction and safe to share between solver calls.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np

DEFAULT_EPS = 1e-8
DEDUP_TOL = 1e-12


def _readonly(a, dtype=float):
    a = np.ascontiguousarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CompositionGrid:
    """Strictly increasing mole fractions of component 1 in (0, 1)."""

    points: np.ndarray

    def __post_init__(self):
        pts = _readonly(self.points)
        if pts.ndim != 1 or pts.size < 1:
            raise ValueError("grid needs at least one point")
        if pts[0] <= 0.0 or pts[-1] >= 1.0:
            raise ValueError("grid points must lie strictly inside (0, 1)")
        if pts.size > 1 and np.min(np.diff(pts)) < DEDUP_TOL:
            raise ValueError("grid points must be strictly increasing "
                             f"(separation >= {DEDUP_TOL:g})")
        object.__setattr__(self, "points", pts)

    @property
    def n(self):
        return self.points.size


@dataclass(frozen=True)
class AugmentedGrid:
    """Base grid merged with a feed composition z.

    ``feed_index`` addresses the grid point equal to z; if z coincided with a
    base point (within 1e-12) no point was added and the grid size is unchanged.
    """

    points: np.ndarray
    feed_index: int
    feed: float

    def __post_init__(self):
        object.__setattr__(self, "points", _readonly(self.points))

    @property
    def n(self):
        return self.points.size


@dataclass(frozen=True)
class SimplexGrid:
    """Interior lattice of the composition simplex at a given resolution.

    Points are all integer compositions of ``resolution`` into ``n_components``
    positive parts, divided by the resolution, so every coordinate is at least
    1/resolution and each row sums to one exactly. The lattice is closed under
    coordinate permutation and its size is C(resolution-1, n_components-1).

    Note on counting conventions: a raw n x n meshgrid over [0, 1] masked by
    x1 + x2 <= 1 is sometimes quoted instead (for a 100 x 100 grid it keeps
    5044 points, six borderline diagonal pairs being lost to float rounding).
    That set contains boundary compositions and is not permutation-symmetric,
    so it is not used here.
    """

    n_components: int
    resolution: int
    points: np.ndarray   # (M, n) float, rows sum to 1
    lattice: np.ndarray  # (M, n) int, rows sum to resolution

    def __post_init__(self):
        object.__setattr__(self, "points", _readonly(self.points))
        object.__setattr__(self, "lattice", _readonly(self.lattice, dtype=np.int64))

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def spacing(self):
        return 1.0 / self.resolution


def make_uniform_grid(n_points, eps=DEFAULT_EPS):
    """Equally spaced grid of ``n_points`` values on [eps, 1-eps].

    The points are mirror-averaged against their reflection so the grid is
    symmetric about one half to within one ulp and odd-sized grids contain
    0.5 exactly (several exact-value checks rely on evaluating there).
    """
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    if not 0.0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 0.5)")
    pts = np.linspace(eps, 1.0 - eps, n_points)
    pts = 0.5 * (pts + (1.0 - pts[::-1]))
    return CompositionGrid(pts)


def augment_with_feed(grid, z):
    """Insert the feed composition z into a grid, deduplicating within 1e-12."""
    if not 0.0 < z < 1.0:
        raise ValueError("feed z must lie strictly inside (0, 1)")
    pts = grid.points
    near = np.argmin(np.abs(pts - z))
    if abs(pts[near] - z) < DEDUP_TOL:
        return AugmentedGrid(pts, int(near), float(z))
    merged = np.sort(np.append(pts, z))
    idx = int(np.searchsorted(merged, z))
    return AugmentedGrid(merged, idx, float(z))


def make_simplex_grid(n_components, resolution):
    """Interior simplex lattice; see SimplexGrid for the convention."""
    if n_components < 2:
        raise ValueError("n_components must be >= 2")
    if resolution < n_components:
        raise ValueError("resolution must be >= n_components")
    # stars and bars: dividers at 1..resolution-1 give positive parts
    n, r = n_components, resolution
    rows = []
    for cuts in combinations(range(1, r), n - 1):
        bounds = (0,) + cuts + (r,)
        rows.append([bounds[k + 1] - bounds[k] for k in range(n)])
    lattice = np.array(rows, dtype=np.int64)
    return SimplexGrid(n, r, lattice / float(r), lattice)
