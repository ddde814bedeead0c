"""Mass-balance-feasible candidate equilibrium states.

Binary systems enumerate all grid-index pairs (i <= j) with lever-rule phase
fractions; general n-component systems build group classes of k states whose
positive-fraction combination reproduces the feed, with a rank test excluding
tuples that reduce to a lower order.
"""

from dataclasses import dataclass
from math import comb

import numpy as np

from .grids import AugmentedGrid, SimplexGrid

PHI_TOL = 1e-10          # tolerance on sum(phi)=1 and the mass balance
PHI_OPEN = 1e-12         # phi must lie in (PHI_OPEN, 1-PHI_OPEN)
RANK_RTOL = 1e-8         # sigma_min >= RANK_RTOL * sigma_max
DEFAULT_GROUP_BUDGET = 10 ** 8


class GroupBudgetError(RuntimeError):
    """Raised when a group class would exceed the enumeration budget."""


@dataclass(frozen=True)
class CandidatePair:
    i: int
    j: int
    phi_i: float
    phi_j: float
    feasible: bool


@dataclass(frozen=True)
class PairSet:
    """All pairs (i <= j) over an augmented grid, upper triangle in row-major
    (lexicographic) order. Infeasible pairs are flagged, not dropped; their
    energy is masked later. Exactly one self-pair is feasible: the feed's."""

    grid: AugmentedGrid
    i: np.ndarray
    j: np.ndarray
    phi_i: np.ndarray
    phi_j: np.ndarray
    feasible: np.ndarray

    @property
    def n_pairs(self):
        return self.i.size

    def pair(self, k):
        return CandidatePair(int(self.i[k]), int(self.j[k]),
                             float(self.phi_i[k]), float(self.phi_j[k]),
                             bool(self.feasible[k]))

    def __iter__(self):
        for k in range(self.n_pairs):
            yield self.pair(k)


def feasible_pairs(aug_grid, z=None):
    """Enumerate all N'(N'+1)/2 pairs over an augmented grid.

    A pair (i, j) is feasible iff x_i <= z <= x_j, equivalently
    i <= feed_index <= j on the sorted grid. Lever fractions are computed
    from the actual feed z, so phi_i x_i + phi_j x_j = z holds exactly for
    feasible pairs with i != j.
    """
    if z is None:
        z = aug_grid.feed
    elif abs(z - aug_grid.feed) >= 1e-12:
        raise ValueError("z must equal the feed stored in the augmented grid")
    x = aug_grid.points
    f = aug_grid.feed_index
    ii, jj = np.triu_indices(aug_grid.n)
    feas = (ii <= f) & (jj >= f)
    xi, xj = x[ii], x[jj]
    self_pair = ii == jj
    with np.errstate(divide="ignore", invalid="ignore"):
        phi_i = np.where(self_pair, 1.0, (xj - z) / (xj - xi))
    phi_j = np.where(self_pair, 0.0, 1.0 - phi_i)
    for a in (ii, jj, phi_i, phi_j, feas):
        a.setflags(write=False)
    return PairSet(aug_grid, ii, jj, phi_i, phi_j, feas)


@dataclass(frozen=True)
class StateGroup:
    """A feasible k-tuple of states with positive fractions summing to one."""

    order: int
    indices: tuple
    phi: np.ndarray


@dataclass(frozen=True)
class GroupSet:
    """Group classes indexed by order k; each entry is (indices, phi) with
    shape (M_k, k). Orders with no members are absent."""

    n_states: int
    classes: dict

    @property
    def n_groups(self):
        return sum(idx.shape[0] for idx, _ in self.classes.values())

    def energies(self, values):
        """Molar energy of every group, Σ phi_m g_m, concatenated over orders."""
        values = np.asarray(values, dtype=float)
        parts = [np.sum(phi * values[idx], axis=1)
                 for _, (idx, phi) in sorted(self.classes.items())]
        return np.concatenate(parts) if parts else np.empty(0)

    def state_marginal(self, probs):
        """Per-state probability induced by group weights, Σ_m p_m phi_m."""
        probs = np.asarray(probs, dtype=float)
        out = np.zeros(self.n_states)
        off = 0
        for _, (idx, phi) in sorted(self.classes.items()):
            m = idx.shape[0]
            w = probs[off:off + m, None] * phi
            np.add.at(out, idx.reshape(-1), w.reshape(-1))
            off += m
        return out

    def group(self, flat_index):
        """The StateGroup at a flat position (orders concatenated ascending,
        matching the layout of ``energies``)."""
        off = 0
        for k, (idx, phi) in sorted(self.classes.items()):
            m = idx.shape[0]
            if flat_index < off + m:
                row = flat_index - off
                return StateGroup(k, tuple(int(t) for t in idx[row]), phi[row])
            off += m
        raise IndexError(flat_index)

    def __iter__(self):
        for k, (idx, phi) in sorted(self.classes.items()):
            for row in range(idx.shape[0]):
                yield StateGroup(k, tuple(int(t) for t in idx[row]), phi[row])


def _as_state_matrix(grid):
    if isinstance(grid, np.ndarray):
        return np.atleast_2d(grid)
    if isinstance(grid, SimplexGrid):
        return grid.points
    x = grid.points
    return np.column_stack([x, 1.0 - x])


def _phi_valid(phi, states, z):
    resid = states.T @ phi - z
    if abs(phi.sum() - 1.0) > PHI_TOL or np.max(np.abs(resid)) > PHI_TOL:
        return False
    if not np.all(phi > PHI_OPEN):
        return False
    # singleton groups legitimately carry phi = 1; larger groups must keep
    # every phase amount strictly away from 0 and 1
    return phi.size == 1 or np.all(phi < 1.0 - PHI_OPEN)


def group_membership(states, z):
    """Phase fractions of a candidate group, or None if it is not a group.

    ``states`` holds k interior composition vectors as rows (full n-vectors).
    Membership per the rank + least-squares test: the states must be linearly
    independent (smallest singular value >= 1e-8 x largest, which also rules
    out any sub-tuple qualifying at lower order), and the normal-equations
    solution phi = (X^T X)^-1 X^T z must satisfy sum(phi)=1 and X phi = z to
    1e-10 with every entry strictly inside (0, 1).
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    z = np.asarray(z, dtype=float)
    k = states.shape[0]
    sv = np.linalg.svd(states.T, compute_uv=False)
    if sv.size < k or sv[k - 1] < RANK_RTOL * sv[0]:
        return None
    gram = states @ states.T
    try:
        phi = np.linalg.solve(gram, states @ z)
    except np.linalg.LinAlgError:
        return None
    return phi if _phi_valid(phi, states, z) else None


def _batch_rank_ok(X):
    # X: (M, n, k) stacks of candidate matrices; full rank k by singular
    # values (a Gram-eigenvalue shortcut squares the condition number and
    # lets exactly-collinear triples slip past the threshold)
    sv = np.linalg.svd(X, compute_uv=False)
    return sv[:, -1] >= RANK_RTOL * sv[:, 0]


def _batch_membership(states, combos, z):
    """Vectorized group test for a (M, k) array of index combinations."""
    M, k = combos.shape
    if M == 0:
        return combos.reshape(0, k), np.empty((0, k))
    X = states[combos]                     # (M, k, n)
    Xc = np.swapaxes(X, 1, 2)              # (M, n, k)
    ok = _batch_rank_ok(Xc)
    combos, X, Xc = combos[ok], X[ok], Xc[ok]
    if combos.shape[0] == 0:
        return combos, np.empty((0, k))
    gram = np.einsum("mkn,mln->mkl", X, X)
    rhs = np.einsum("mkn,n->mk", X, z)
    phi = np.linalg.solve(gram, rhs[..., None])[..., 0]
    resid = np.einsum("mnk,mk->mn", Xc, phi) - z
    good = ((np.abs(phi.sum(axis=1) - 1.0) <= PHI_TOL)
            & (np.max(np.abs(resid), axis=1) <= PHI_TOL)
            & np.all(phi > PHI_OPEN, axis=1))
    if k > 1:
        good &= np.all(phi < 1.0 - PHI_OPEN, axis=1)
    return combos[good], phi[good]


def _combo_chunks(n, k, chunk=200_000):
    """Yield (M, k) int arrays covering all C(n, k) combinations in
    lexicographic order without materializing them at once."""
    if k == 1:
        yield np.arange(n, dtype=np.int64)[:, None]
        return
    if k == 2:
        ii, jj = np.triu_indices(n, k=1)
        for s in range(0, ii.size, chunk):
            yield np.column_stack([ii[s:s + chunk], jj[s:s + chunk]])
        return
    if k == 3:
        for a in range(n - 2):
            jj, kk = np.triu_indices(n - a - 1, k=1)
            block = np.column_stack([np.full(jj.size, a, dtype=np.int64),
                                     jj + a + 1, kk + a + 1])
            for s in range(0, block.shape[0], chunk):
                yield block[s:s + chunk]
        return
    # higher orders: recurse on the leading index
    for a in range(n - k + 1):
        for rest in _combo_chunks(n - a - 1, k - 1, chunk):
            yield np.column_stack([np.full(rest.shape[0], a, dtype=np.int64),
                                   rest + a + 1])


def enumerate_groups(grid, z, max_order, budget=DEFAULT_GROUP_BUDGET):
    """Build group classes of order 1..max_order over a grid.

    ``grid`` may be a binary grid, a SimplexGrid, or a raw (N, n) array of
    composition vectors. Refuses (GroupBudgetError) when any C(N, k) exceeds
    ``budget``. For an n-component system a group of more than n states can
    never pass the rank test, so max_order must not exceed n_components.
    """
    states = _as_state_matrix(grid)
    z = np.asarray(z, dtype=float)
    n_states, n_comp = states.shape
    if z.shape != (n_comp,):
        raise ValueError(f"feed must be a full {n_comp}-component vector")
    if max_order < 1 or max_order > n_comp:
        raise ValueError("max_order must lie in 1..n_components")
    for k in range(1, max_order + 1):
        count = comb(n_states, k)
        if count > budget:
            raise GroupBudgetError(
                f"C({n_states},{k}) = {count} exceeds the group budget {budget}")
    classes = {}
    for k in range(1, max_order + 1):
        idx_parts, phi_parts = [], []
        for combos in _combo_chunks(n_states, k):
            idx, phi = _batch_membership(states, combos, z)
            if idx.shape[0]:
                idx_parts.append(idx)
                phi_parts.append(phi)
        if idx_parts:
            classes[k] = (np.concatenate(idx_parts), np.concatenate(phi_parts))
    return GroupSet(n_states, classes)
