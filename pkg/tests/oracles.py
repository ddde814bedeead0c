"""Independent oracles used by the test suite.

Everything here is deliberately decoupled from the library's solver paths:
plain loops, bisection root solves, quadrature-free equal-area constructions,
and finite differences. The tests freeze values computed by these oracles or
invoke them live for property checks.
"""

import math

import numpy as np
from scipy.optimize import brentq


def margules_binodal_root(A):
    """Lower binodal composition of the symmetric one-parameter model:
    root of ln(x/(1-x)) + A(1-2x) = 0 on (0, 0.5). Requires A > 2."""
    f = lambda x: math.log(x / (1.0 - x)) + A * (1.0 - 2.0 * x)
    return brentq(f, 1e-12, 0.5 - 1e-12, xtol=4e-16)


def margules_spinodal_root(A):
    """Lower spinodal composition: x(1-x) = 1/(2A)."""
    return 0.5 * (1.0 - math.sqrt(1.0 - 2.0 / A))


def brute_force_best_pair(points, values, z, eps_tie=1e-9):
    """Exhaustive O(N^2) scan for the minimum lever-averaged energy.

    Iterates pairs (i <= j) in lexicographic order with a strict-less update,
    using the same arithmetic expression as the solver so exact index
    equality is meaningful.
    """
    n = len(points)
    best = math.inf
    best_ij = None
    for i in range(n):
        xi = points[i]
        if xi > z:
            break
        gi = values[i]
        for j in range(i, n):
            xj = points[j]
            if xj < z:
                continue
            if i == j:
                e = gi - eps_tie
            else:
                phi_i = (xj - z) / (xj - xi)
                e = phi_i * gi + (1.0 - phi_i) * values[j]
            if e < best:
                best = e
                best_ij = (i, j)
    return best_ij, best


def maxwell_reduced_pressure(tr):
    """Equal-area (common-tangent) saturation pressure of the reduced
    van der Waals fluid, in p_c units, with the coexisting volumes.

    Solves p(vL) = p(vV) = p_sat and equal chemical potential
    a(vL) - a(vV) + (3/8) p_sat (vL - vV) = 0, where a is in R*T_c units
    and p in p_c units (the 3/8 factor converts between the two scales).
    """
    if tr >= 1.0:
        raise ValueError("subcritical temperatures only")
    a = lambda v: -tr * math.log(3.0 * v - 1.0) - 9.0 / (8.0 * v)
    p = lambda v: 8.0 * tr / (3.0 * v - 1.0) - 3.0 / v ** 2
    dp = lambda v: -24.0 * tr / (3.0 * v - 1.0) ** 2 + 6.0 / v ** 3
    v_lo = brentq(dp, 1.0 / 3.0 + 1e-9, 1.0, xtol=1e-14)
    v_hi = brentq(dp, 1.0, 100.0, xtol=1e-13)
    p_floor = max(p(v_lo), 1e-12)
    p_ceil = p(v_hi)

    def excess_mu(ps):
        vl = brentq(lambda v: p(v) - ps, 1.0 / 3.0 + 1e-10, v_lo, xtol=1e-15)
        vv = brentq(lambda v: p(v) - ps, v_hi, 1e7, xtol=1e-13)
        return a(vl) - a(vv) + 0.375 * ps * (vl - vv), vl, vv

    p_sat = brentq(lambda ps: excess_mu(ps)[0],
                   p_floor + 1e-12, p_ceil - 1e-12, xtol=1e-15)
    _, vl, vv = excess_mu(p_sat)
    return p_sat, vl, vv


def best_triple_scan(points, values, z, chunk=400_000):
    """Exhaustive scan over all state triples for the lowest feed-conserving
    barycentric combination; returns (indices, phi, energy) of the winner.

    ``points`` are (N, 3) simplex compositions. Barycentric weights solve
    phi_1 x1 + phi_2 x2 + phi_3 x3 = z with sum(phi) = 1 via signed areas;
    triples with any weight outside (1e-9, 1-1e-9) or a degenerate area are
    skipped (they reduce to pairs or singletons).
    """
    pts = np.asarray(points, dtype=float)
    g = np.asarray(values, dtype=float)
    z = np.asarray(z, dtype=float)
    n = pts.shape[0]
    # 2-D coordinates: drop the last component (affine embedding)
    P = pts[:, :2]
    Z = z[:2]
    best_e = np.inf
    best = None
    for i in range(n - 2):
        jj, kk = np.triu_indices(n - i - 1, k=1)
        jj = jj + i + 1
        kk = kk + i + 1
        for s in range(0, jj.size, chunk):
            J, K = jj[s:s + chunk], kk[s:s + chunk]
            A = P[i]
            B = P[J]
            C = P[K]
            det = ((B[:, 0] - A[0]) * (C[:, 1] - A[1])
                   - (C[:, 0] - A[0]) * (B[:, 1] - A[1]))
            ok = np.abs(det) > 1e-14
            if not np.any(ok):
                continue
            J, K, B, C, det = J[ok], K[ok], B[ok], C[ok], det[ok]
            w1 = ((B[:, 0] - Z[0]) * (C[:, 1] - Z[1])
                  - (C[:, 0] - Z[0]) * (B[:, 1] - Z[1])) / det
            w2 = ((C[:, 0] - Z[0]) * (A[1] - Z[1])
                  - (A[0] - Z[0]) * (C[:, 1] - Z[1])) / det
            w3 = 1.0 - w1 - w2
            ok = ((w1 > 1e-9) & (w1 < 1.0 - 1e-9)
                  & (w2 > 1e-9) & (w2 < 1.0 - 1e-9)
                  & (w3 > 1e-9) & (w3 < 1.0 - 1e-9))
            if not np.any(ok):
                continue
            J, K, w1, w2, w3 = J[ok], K[ok], w1[ok], w2[ok], w3[ok]
            e = w1 * g[i] + w2 * g[J] + w3 * g[K]
            m = int(np.argmin(e))
            if e[m] < best_e:
                best_e = float(e[m])
                best = ((i, int(J[m]), int(K[m])),
                        np.array([w1[m], w2[m], w3[m]]))
    if best is None:
        return None, None, np.inf
    return best[0], best[1], best_e


def central_difference_gradient(fun, theta, step=1e-6):
    """Central-difference gradient of a scalar or vector function of theta."""
    theta = np.asarray(theta, dtype=float)
    f0 = np.asarray(fun(theta), dtype=float)
    grad = np.empty(theta.shape + f0.shape)
    for k in range(theta.size):
        tp = theta.copy()
        tm = theta.copy()
        tp[k] += step
        tm[k] -= step
        grad[k] = (np.asarray(fun(tp)) - np.asarray(fun(tm))) / (2.0 * step)
    return grad
