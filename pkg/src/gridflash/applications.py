"""End-to-end applications: label generation, vapor pressure, ternary LLLE."""

import csv
import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .grids import make_uniform_grid, make_simplex_grid
from .models import VdwHelmholtz, eval_curve, model_from_spec
from .solver import (StateDistribution, cluster_phases, solve_binary,
                     DEFAULT_EPS_TIE)

SPLIT_THRESHOLD = 1e-3   # |x' - x''| below this is recorded as single-phase
DEFAULT_V_RANGE = (0.4, 60.0)
DEFAULT_LLLE_TAU = 1e-3  # RT units of the mixing-energy curve; the 1e-12
                         # support floor separates clusters for tau under
                         # roughly (basin barrier)/25


@dataclass(frozen=True)
class DatasetRow:
    """One labeled system: feed plus equilibrium compositions when split."""

    system_id: str
    model_spec: dict
    z: float
    x_lo: float   # None when not split
    x_hi: float   # None when not split
    is_split: bool


@dataclass(frozen=True)
class VleResult:
    """Pure-component vapor-liquid result from the discrete double tangent.

    ``pressure`` is the reduced pressure (units of p_c), obtained from the
    tangent slope on the reduced Helmholtz curve as -(8/3) (a_L - a_V)/(v_L - v_V);
    the 8/3 factor converts the R*T_c energy scale of a(v) to p_c units.
    """

    tr: float
    v_liquid: float
    v_vapor: float
    pressure: float
    is_split: bool
    tau: float
    grid_n: int

    def to_dict(self):
        return {"tr": self.tr, "v_liquid": self.v_liquid,
                "v_vapor": self.v_vapor, "pressure": self.pressure,
                "is_split": self.is_split, "tau": self.tau,
                "grid_n": self.grid_n}


def _concave_runs(values):
    """Index runs where the second difference of a curve is negative."""
    d2 = values[2:] - 2.0 * values[1:-1] + values[:-2]
    neg = np.where(d2 < 0.0)[0] + 1
    runs = []
    if neg.size == 0:
        return runs
    start = prev = neg[0]
    for k in neg[1:]:
        if k != prev + 1:
            runs.append((start, prev))
            start = k
        prev = k
    runs.append((start, prev))
    return runs


def _label_one(system_id, spec, grid, tau, threshold):
    model = model_from_spec(spec) if isinstance(spec, dict) else spec
    spec_dict = model.spec()
    curve = eval_curve(model, grid)
    runs = _concave_runs(curve.values)
    if not runs:
        return DatasetRow(system_id, spec_dict, 0.5, None, None, False), None
    warning = None
    if len(runs) > 1:
        warning = (f"multi-region: {system_id} has {len(runs)} "
                   "concave regions; using the widest")
        runs = sorted(runs, key=lambda r: r[1] - r[0])
    first, last = runs[-1]
    z = 0.5 * (grid.points[first] + grid.points[last])
    res = solve_binary(model, z, grid, tau=tau)
    if res.x_hard_hi - res.x_hard_lo < threshold:
        return DatasetRow(system_id, spec_dict, float(z), None, None,
                          False), warning
    return DatasetRow(system_id, spec_dict, float(z), res.x_hard_lo,
                      res.x_hard_hi, True), warning


def generate_labels(model_specs, grid_n=401, eps=1e-8, tau=0.01,
                    threshold=SPLIT_THRESHOLD, threads=1):
    """Equilibrium labels for a list of binary model specs.

    For each system the mixing-energy curve is scanned for negative
    curvature; without any concave region a non-split row is emitted
    (z recorded as 0.5). Otherwise the feed is placed at the center of the
    (widest) concave region, the exact discrete forward pass produces the
    phase compositions, and gaps narrower than ``threshold`` are classified
    single-phase.

    Returns (rows, warnings); a warning is recorded per system whose curve
    has several disjoint concave regions (the widest one is used). Systems
    are independent, so ``threads`` > 1 fans them out; results keep the
    input order either way.
    """
    grid = make_uniform_grid(grid_n, eps)
    ids = [f"sys{k:04d}" for k in range(len(model_specs))]
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(
                lambda args: _label_one(*args, grid, tau, threshold),
                zip(ids, model_specs)))
    else:
        results = [_label_one(sid, spec, grid, tau, threshold)
                   for sid, spec in zip(ids, model_specs)]
    rows = [r for r, _ in results]
    warnings = [w for _, w in results if w is not None]
    return rows, warnings


def write_labels_csv(path, rows):
    """labels.csv with columns system_id, model, z, x_lo, x_hi, is_split."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["system_id", "model", "z", "x_lo", "x_hi", "is_split"])
        for r in rows:
            w.writerow([r.system_id, json.dumps(r.model_spec, sort_keys=True),
                        repr(r.z),
                        "" if r.x_lo is None else repr(r.x_lo),
                        "" if r.x_hi is None else repr(r.x_hi),
                        int(r.is_split)])


def read_labels_csv(path):
    """Parse a labels CSV; returns rows keyed by the documented columns."""
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            is_split = rec["is_split"].strip() in ("1", "true", "True")
            out.append({
                "system_id": rec["system_id"],
                "z": float(rec["z"]),
                "x_lo": float(rec["x_lo"]) if rec.get("x_lo") else None,
                "x_hi": float(rec["x_hi"]) if rec.get("x_hi") else None,
                "is_split": is_split,
            })
    return out


def _spinodal_volumes(model: VdwHelmholtz, v_lo=1.0 / 3.0 + 1e-9, v_hi=1e3):
    """Roots of a''(v) = 0 bracketing the unstable branch, or None."""
    c = model.curvature
    if model.tr >= 1.0:
        return None
    try:
        s1 = brentq(c, v_lo, 1.0, xtol=1e-14)
        s2 = brentq(c, 1.0, v_hi, xtol=1e-12)
    except ValueError:
        return None
    return s1, s2


def vapor_pressure(model: VdwHelmholtz, v_grid=None, tau=0.05,
                   n_points=100, v_range=DEFAULT_V_RANGE):
    """Vapor pressure by the discrete double tangent on the Helmholtz curve.

    The candidate volumes default to ``n_points`` log-spaced values on
    ``v_range`` (reduced units). The flash feed is the geometric mean of the
    two spinodal volumes (any point of the unstable branch selects the same
    tangent); the same pair-enumeration argmin as the composition flash runs
    on the (v, a(v)) curve, and the reported pressure is the tangent slope
    converted to p_c units. tau (R*T_c units; the curve spans a few R*T_c)
    only shapes the soft estimates, never the hard result.

    Returns a single-phase VleResult when no double tangent exists (Tr >= 1).
    """
    if v_grid is None:
        v_grid = np.geomspace(v_range[0], v_range[1], n_points)
    v_grid = np.sort(np.asarray(v_grid, dtype=float))
    spinodals = _spinodal_volumes(model)
    if spinodals is None:
        return VleResult(model.tr, None, None, None, False, tau, len(v_grid))
    v_feed = float(np.sqrt(spinodals[0] * spinodals[1]))
    # the same pair enumeration as the composition flash, on volume axes
    if np.min(np.abs(v_grid - v_feed)) < 1e-12:
        v = v_grid
    else:
        v = np.sort(np.append(v_grid, v_feed))
    f = int(np.argmin(np.abs(v - v_feed)))
    a = model.helmholtz(v)
    ii, jj = np.triu_indices(v.size)
    feas = (ii <= f) & (jj >= f)
    self_pair = ii == jj
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = np.where(self_pair, 1.0, (v[jj] - v_feed) / (v[jj] - v[ii]))
    energies = np.where(self_pair, a[ii] - DEFAULT_EPS_TIE,
                        phi * a[ii] + (1.0 - phi) * a[jj])
    energies = np.where(feas, energies, np.inf)
    k = int(np.argmin(energies))
    i_s, j_s = int(ii[k]), int(jj[k])
    if i_s == j_s:
        return VleResult(model.tr, None, None, None, False, tau, v.size)
    v_l, v_v = float(v[i_s]), float(v[j_s])
    a_l, a_v = float(a[i_s]), float(a[j_s])
    pressure = -model.PRESSURE_SCALE * (a_l - a_v) / (v_l - v_v)
    return VleResult(model.tr, v_l, v_v, pressure, True, tau, v.size)


@dataclass(frozen=True)
class LlleResult:
    """Clustered phases of a ternary feed-constrained state distribution."""

    phases: list          # [(composition (3,), amount), ...]
    alpha: np.ndarray
    residual: float
    n_iter: int
    converged: bool
    tau: float
    resolution: int
    distribution: object = None   # StateDistribution; not serialized

    def to_dict(self):
        return {"phases": [{"composition": list(map(float, c)),
                            "amount": float(a)} for c, a in self.phases],
                "alpha": [float(a) for a in self.alpha],
                "residual": self.residual, "n_iter": self.n_iter,
                "converged": self.converged, "tau": self.tau,
                "resolution": self.resolution}


def solve_llle(model, z, grid=None, resolution=50, tau=DEFAULT_LLLE_TAU,
               max_iter=200, tol=1e-10, method="f1",
               group_budget=None):
    """Multi-phase split of a ternary system from the state distribution.

    The default route ("f1") solves the two feed-constraint multipliers of
    the maximum-entropy distribution p_i ~ exp(alpha . x_i[:2] + beta g_i),
    beta = -1/tau, by damped Newton on the mass-balance residuals (the
    Jacobian is the covariance matrix of the first two coordinates), then
    clusters the support into phases. Newton failure after ``max_iter``
    iterations is reported through ``converged``/``residual`` rather than
    raised.

    method="f2" instead enumerates the feed-conserving group classes up to
    order 3 (the combinatorial budget guard refuses oversized grids: at
    resolution 50 the triple class alone exceeds the default budget) and
    reads the phases off the most probable group under the Boltzmann group
    weights.
    """
    if model.n_components != 3:
        raise ValueError("three-component models only")
    if grid is None:
        grid = make_simplex_grid(model.n_components, resolution)
    z = np.asarray(z, dtype=float)
    if z.size == model.n_components - 1:
        z = np.append(z, 1.0 - z.sum())
    if abs(z.sum() - 1.0) > 1e-9 or np.any(z <= 0.0):
        raise ValueError("feed must be a strictly interior composition")
    beta = -1.0 / tau
    if method == "f2":
        return _solve_llle_groups(model, z, grid, tau, beta, group_budget)
    if method != "f1":
        raise ValueError("method must be 'f1' or 'f2'")
    X = grid.points
    g = np.atleast_1d(model.gmix(X))
    alpha = np.zeros(2)
    n_iter = 0
    resid = np.inf
    p = None
    for n_iter in range(max_iter + 1):
        logits = X[:, 0] * alpha[0] + X[:, 1] * alpha[1] + beta * g
        logits -= logits.max()
        p = np.exp(logits)
        p /= p.sum()
        m = np.array([p @ X[:, 0], p @ X[:, 1]])
        F = m - z[:2]
        resid = float(np.max(np.abs(F)))
        if resid < tol:
            break
        c11 = p @ X[:, 0] ** 2 - m[0] ** 2
        c22 = p @ X[:, 1] ** 2 - m[1] ** 2
        c12 = p @ (X[:, 0] * X[:, 1]) - m[0] * m[1]
        J = np.array([[c11, c12], [c12, c22]])
        J[0, 0] += 1e-300
        J[1, 1] += 1e-300
        try:
            step = np.linalg.solve(J, F)
        except np.linalg.LinAlgError:
            break
        norm = np.linalg.norm(step)
        if norm > 50.0:
            step *= 50.0 / norm
        alpha = alpha - step
    dist = StateDistribution(p, beta=beta, alpha=alpha)
    phases = cluster_phases(dist, grid)
    return LlleResult(phases=phases, alpha=alpha, residual=resid,
                      n_iter=n_iter, converged=resid < tol, tau=tau,
                      resolution=grid.resolution, distribution=dist)


def _solve_llle_groups(model, z, grid, tau, beta, budget):
    """Group-class route: Boltzmann weights over all feed-conserving groups
    of up to three states (feed appended so the homogeneous group exists);
    the most probable group's states and fractions are the phases."""
    from .candidates import enumerate_groups, DEFAULT_GROUP_BUDGET
    from .solver import formulation2_distribution

    states = np.vstack([grid.points, z])
    groups = enumerate_groups(states, z, max_order=model.n_components,
                              budget=budget or DEFAULT_GROUP_BUDGET)
    g = np.atleast_1d(model.gmix(states))
    energies = groups.energies(g)
    dist = formulation2_distribution(groups, energies, beta)
    best = groups.group(int(np.argmax(dist.probabilities)))
    phases = [(states[idx], float(phi))
              for idx, phi in zip(best.indices, best.phi)]
    return LlleResult(phases=phases, alpha=np.zeros(2), residual=0.0,
                      n_iter=0, converged=True, tau=tau,
                      resolution=getattr(grid, "resolution", 0),
                      distribution=dist)
