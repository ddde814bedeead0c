"""Discrete equilibrium solver: hard enumeration forward, soft estimates backward.

The binary flash enumerates every mass-balance-feasible pair of grid states,
takes the exact argmin of the lever-averaged Gibbs energy for the reported
state, and forms a Boltzmann softmax over the same energies for the smooth
surrogate whose parameter gradients drive training. The general
state-probability computations (maximum-entropy distribution with a feed
constraint, and the Boltzmann distribution over feed-conserving groups) live
here as well, together with clustering and curve-reconstruction utilities.
"""

import json
from dataclasses import dataclass

import numpy as np

from .candidates import PairSet, feasible_pairs
from .grids import augment_with_feed, make_uniform_grid
from .models import GibbsCurve, eval_curve

DEFAULT_EPS_TIE = 1e-9      # RT; favors the homogeneous state at exact ties
PROB_FLUSH = 1e-300         # probabilities below this are flushed to zero
PROB_FLOOR = 1e-12          # cluster support floor
ALPHA_LIMIT = 1e6           # bracket cap for the feed-constraint multiplier


class RootBracketError(RuntimeError):
    """Raised when the feed-constraint multiplier cannot be bracketed."""


@dataclass(frozen=True)
class EquilibriumResult:
    """Hard and soft equilibrium estimates for one binary flash."""

    z: float
    x_hard_lo: float
    x_hard_hi: float
    x_soft_lo: float
    x_soft_hi: float
    phi_lo: float
    phi_hi: float
    is_split: bool
    min_energy: float
    tau: float
    grid_n: int
    i_star: int
    j_star: int

    def to_dict(self):
        """JSON-ready mapping with the documented result schema."""
        return {"z": self.z, "x_lo": self.x_hard_lo, "x_hi": self.x_hard_hi,
                "x_soft_lo": self.x_soft_lo, "x_soft_hi": self.x_soft_hi,
                "phi_lo": self.phi_lo, "phi_hi": self.phi_hi,
                "is_split": self.is_split, "tau": self.tau,
                "grid_n": self.grid_n}

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)


@dataclass(frozen=True)
class StateDistribution:
    """Probabilities over grid states or over groups, with the multipliers
    that produced them. ``alpha`` is None for group (Boltzmann) weights."""

    probabilities: np.ndarray
    beta: float
    alpha: object = None   # float (binary), array (multicomponent), or None
    over: str = "states"

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        p.setflags(write=False)
        object.__setattr__(self, "probabilities", p)


def pair_energies(pairs: PairSet, values, eps_tie=DEFAULT_EPS_TIE):
    """Lever-averaged Gibbs energy of every pair; +inf on infeasible pairs.

    Self-pairs get eps_tie subtracted so that a homogeneous state beats a
    split of identical energy with an infinitesimal second phase.
    """
    g = np.asarray(values, dtype=float)
    base = pairs.phi_i * g[pairs.i] + pairs.phi_j * g[pairs.j]
    self_pair = pairs.i == pairs.j
    e = np.where(self_pair, g[pairs.i] - eps_tie, base)
    return np.where(pairs.feasible, e, np.inf)


def pair_energy(pair, curve: GibbsCurve, eps_tie=DEFAULT_EPS_TIE):
    """Energy of a single CandidatePair against a curve (scalar form)."""
    if not pair.feasible:
        return np.inf
    g = curve.values
    if pair.i == pair.j:
        return g[pair.i] - eps_tie
    return pair.phi_i * g[pair.i] + pair.phi_j * g[pair.j]


def hard_argmin(energies, pairs: PairSet):
    """Index pair of the global discrete minimum.

    The pair arrays are in row-major upper-triangle order, so the first
    occurrence of the minimum is the lexicographically smallest (i, j).
    """
    k = int(np.argmin(energies))
    return int(pairs.i[k]), int(pairs.j[k]), k


def softmax_probs(energies, tau):
    """Boltzmann probabilities exp(-E/tau), max-shift stabilized.

    Masked (infinite-energy) pairs get exactly zero; values below 1e-300 are
    flushed to zero. The result sums to one.
    """
    if tau <= 0.0:
        raise ValueError("softmax temperature tau must be positive")
    e = np.asarray(energies, dtype=float)
    finite = np.isfinite(e)
    if not np.any(finite):
        raise ValueError("no finite pair energy to normalize over")
    t = np.where(finite, -(e - e[finite].min()) / tau, -np.inf)
    p = np.exp(t)
    p[p < PROB_FLUSH] = 0.0
    return p / p.sum()


def soft_estimates(probs, pairs: PairSet):
    """Expected lower and upper compositions under a pair distribution."""
    x = pairs.grid.points
    return float(probs @ x[pairs.i]), float(probs @ x[pairs.j])


def pair_param_gradients(pairs: PairSet, state_grads):
    """Assemble per-pair energy gradients phi_i dg_i/dθ + phi_j dg_j/dθ.

    Infeasible rows are zeroed; they carry zero probability downstream.
    """
    G = np.asarray(state_grads, dtype=float)
    out = pairs.phi_i[:, None] * G[pairs.i] + pairs.phi_j[:, None] * G[pairs.j]
    return np.where(pairs.feasible[:, None], out, 0.0)


def st_param_gradient(probs, pair_grads, pairs: PairSet, tau):
    """Parameter gradients of the soft composition estimates.

    d x_soft / dθ = -(1/tau) Cov_p(x_side, dE/dθ), with the covariance taken
    under the softmax pair distribution. The straight-through contract pairs
    these gradients with the hard compositions reported by the forward pass.
    """
    x = pairs.grid.points
    p = np.asarray(probs, dtype=float)
    G = np.asarray(pair_grads, dtype=float)
    if G.shape[0] != p.shape[0]:
        raise ValueError("probs and pair gradients must have equal length")
    mean_g = p @ G
    a_lo, a_hi = x[pairs.i], x[pairs.j]
    cov_lo = (p * a_lo) @ G - (p @ a_lo) * mean_g
    cov_hi = (p * a_hi) @ G - (p @ a_hi) * mean_g
    return -cov_lo / tau, -cov_hi / tau


def solve_binary(model, z, grid=401, tau=0.01, eps_tie=DEFAULT_EPS_TIE):
    """Full binary flash: hard argmin forward, softmax estimates alongside.

    Parameters
    ----------
    model : binary GeModel
    z : feed mole fraction, strictly inside (0, 1)
    grid : CompositionGrid, or an int for a default uniform grid of that size
    tau : softmax temperature (RT units)
    eps_tie : self-pair tie-break depth (RT units)

    Returns
    -------
    EquilibriumResult. ``min_energy`` is the physical lever energy of the
    winning pair (the tie-break epsilon is removed for homogeneous states).
    """
    if isinstance(grid, int):
        grid = make_uniform_grid(grid)
    aug = augment_with_feed(grid, z)
    curve = eval_curve(model, aug)
    pairs = feasible_pairs(aug)
    energies = pair_energies(pairs, curve.values, eps_tie)
    i_s, j_s, k = hard_argmin(energies, pairs)
    probs = softmax_probs(energies, tau)
    x_soft_lo, x_soft_hi = soft_estimates(probs, pairs)
    is_split = i_s != j_s
    if is_split:
        x_lo, x_hi = float(aug.points[i_s]), float(aug.points[j_s])
        phi_lo = float(pairs.phi_i[k])
        phi_hi = float(pairs.phi_j[k])
        e_min = float(energies[k])
    else:
        x_lo = x_hi = float(z)
        phi_lo, phi_hi = 1.0, 0.0
        e_min = float(energies[k]) + eps_tie
    return EquilibriumResult(z=float(z), x_hard_lo=x_lo, x_hard_hi=x_hi,
                             x_soft_lo=x_soft_lo, x_soft_hi=x_soft_hi,
                             phi_lo=phi_lo, phi_hi=phi_hi, is_split=is_split,
                             min_energy=e_min, tau=float(tau), grid_n=aug.n,
                             i_star=i_s, j_star=j_s)


# ---------------------------------------------------------------------------
# state-probability formulations
# ---------------------------------------------------------------------------

def _tilted_probs(x, g, alpha, beta):
    t = alpha * x + beta * g
    t = t - t.max()
    p = np.exp(t)
    return p / p.sum()


def formulation1_distribution(curve: GibbsCurve, z, beta,
                              f_tol=1e-12, max_bisect=500):
    """Maximum-entropy state distribution with an exact feed constraint.

    p_i is proportional to exp(alpha x_i + beta g_i) with beta = -1/tau and
    alpha the unique root of F(alpha) = Σ p_i x_i - z. F is strictly
    increasing (dF/dalpha is the variance of x under p), so the root is found
    by doubling bracket expansion from [-1, 1], bisection to |F| < 1e-12, and
    two Newton polish steps.
    """
    if beta >= 0.0:
        raise ValueError("beta must be negative (beta = -1/tau)")
    x = curve.grid.points
    g = curve.values
    if not x[0] < z < x[-1]:
        raise RootBracketError(f"feed z={z} outside the grid's representable "
                               f"range ({x[0]}, {x[-1]})")

    def F(alpha):
        p = _tilted_probs(x, g, alpha, beta)
        return float(p @ x - z), p

    lo, hi = -1.0, 1.0
    while F(lo)[0] > 0.0:
        lo *= 2.0
        if lo < -ALPHA_LIMIT:
            raise RootBracketError(f"alpha bracket exceeded |{ALPHA_LIMIT:g}| "
                                   "(z outside the representable range)")
    while F(hi)[0] < 0.0:
        hi *= 2.0
        if hi > ALPHA_LIMIT:
            raise RootBracketError(f"alpha bracket exceeded |{ALPHA_LIMIT:g}| "
                                   "(z outside the representable range)")
    alpha = 0.5 * (lo + hi)
    for _ in range(max_bisect):
        f, p = F(alpha)
        if abs(f) < f_tol:
            break
        if f < 0.0:
            lo = alpha
        else:
            hi = alpha
        alpha = 0.5 * (lo + hi)
    for _ in range(2):  # Newton polish; dF/dalpha = Var_p(x) > 0
        f, p = F(alpha)
        var = float(p @ x ** 2 - (p @ x) ** 2)
        if var <= 0.0:
            break
        alpha = alpha - f / var
    _, p = F(alpha)
    return StateDistribution(p, beta=float(beta), alpha=float(alpha))


def formulation2_distribution(groups, group_energies, beta):
    """Boltzmann distribution over feed-conserving groups.

    p_m = exp(beta g_m) / Σ_s exp(beta g_s), max-shift stabilized, with
    g_m the lever-averaged energy of group m (beta = -1/tau).
    """
    if beta >= 0.0:
        raise ValueError("beta must be negative (beta = -1/tau)")
    e = np.asarray(group_energies, dtype=float)
    if e.size == 0:
        raise ValueError("empty group class set")
    t = beta * e
    t = t - t.max()
    p = np.exp(t)
    p[p < PROB_FLUSH] = 0.0
    return StateDistribution(p / p.sum(), beta=float(beta), over="groups")


def formulation2_state_marginal(groups, dist: StateDistribution):
    """State probabilities induced by group weights, Σ_m p_m phi_m."""
    return groups.state_marginal(dist.probabilities)


def local_maxima(probs, floor=PROB_FLOOR):
    """Indices of strict local maxima above the floor (1-D distributions)."""
    p = np.asarray(probs, dtype=float)
    idx = [k for k in range(1, p.size - 1)
           if p[k] > floor and p[k] > p[k - 1] and p[k] > p[k + 1]]
    if p.size >= 2 and p[0] > floor and p[0] > p[1]:
        idx.insert(0, 0)
    if p.size >= 2 and p[-1] > floor and p[-1] > p[-2]:
        idx.append(p.size - 1)
    return idx


def cluster_phases(dist, grid, floor=PROB_FLOOR):
    """Phases from a state distribution: support regions above the floor.

    Binary grids cluster contiguous index runs; simplex grids cluster
    lattice-connected components (neighbors differ by moving one lattice
    unit between two coordinates). Each cluster reports its
    probability-weighted mean composition and its total probability as the
    phase amount; amounts sum to one up to the discarded sub-floor mass.
    """
    p = dist.probabilities if isinstance(dist, StateDistribution) else np.asarray(dist)
    supp = np.where(p > floor)[0]
    if supp.size == 0:
        return []
    if hasattr(grid, "lattice"):
        comps = _simplex_components(grid, supp)
        pts = grid.points
        return [((pts[c] * p[c, None]).sum(axis=0) / p[c].sum(), float(p[c].sum()))
                for c in comps]
    x = grid.points
    out = []
    run = [supp[0]]
    for k in supp[1:]:
        if k == run[-1] + 1:
            run.append(k)
        else:
            seg = np.asarray(run)
            out.append((float(x[seg] @ p[seg] / p[seg].sum()), float(p[seg].sum())))
            run = [k]
    seg = np.asarray(run)
    out.append((float(x[seg] @ p[seg] / p[seg].sum()), float(p[seg].sum())))
    return out


def _simplex_components(grid, support):
    """Connected components of the supported lattice points."""
    lat = grid.lattice
    n = lat.shape[1]
    index_of = {tuple(lat[k]): k for k in support}
    seen = set()
    comps = []
    for start in support:
        if start in seen:
            continue
        comp = []
        stack = [int(start)]
        seen.add(int(start))
        while stack:
            u = stack.pop()
            comp.append(u)
            base = lat[u]
            for a in range(n):
                for b in range(n):
                    if a == b:
                        continue
                    key = tuple(base[c] + (c == a) - (c == b) for c in range(n))
                    v = index_of.get(key)
                    if v is not None and v not in seen:
                        seen.add(v)
                        stack.append(v)
        comps.append(np.asarray(sorted(comp)))
    return comps


def write_distribution_csv(path, grid, dist):
    """Dump a state distribution as CSV with columns
    state_composition, probability. Simplex compositions are written as a
    single comma-joined (quoted) field."""
    import csv

    p = dist.probabilities if isinstance(dist, StateDistribution) else dist
    pts = grid.points
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["state_composition", "probability"])
        for k in range(len(p)):
            if pts.ndim == 1:
                comp = repr(float(pts[k]))
            else:
                comp = ",".join(repr(float(c)) for c in pts[k])
            w.writerow([comp, repr(float(p[k]))])


def reconstruct_gmix_expectation(curve: GibbsCurve, z_values, beta):
    """Expected Δg_mix under the feed-constrained distribution, per feed.

    In the sharp limit the reconstruction approaches the convexified curve:
    linear across a miscibility gap, the curve itself outside (to O(tau)).
    """
    out = np.empty(len(z_values))
    for k, z in enumerate(z_values):
        p = formulation1_distribution(curve, float(z), beta).probabilities
        out[k] = float(p @ curve.values)
    return out
