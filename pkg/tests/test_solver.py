import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gridflash import (CompositionGrid, FlexibleModel, IdealModel,
                       MargulesModel, augment_with_feed, eval_curve,
                       feasible_pairs, hard_argmin, make_uniform_grid,
                       pair_energies, pair_energy, pair_param_gradients,
                       soft_estimates, softmax_probs, solve_binary,
                       st_param_gradient)
from oracles import (brute_force_best_pair, central_difference_gradient,
                     margules_binodal_root)


def _setup(points, z, model=IdealModel()):
    aug = augment_with_feed(CompositionGrid(np.asarray(points, float)), z)
    pairs = feasible_pairs(aug)
    curve = eval_curve(model, aug)
    return aug, pairs, curve


def test_pair_energy_masking_and_values():
    aug, pairs, curve = _setup([0.25, 0.5, 0.75], 0.5)
    e = pair_energies(pairs, curve.values)
    for k, p in enumerate(pairs):
        if not p.feasible:
            assert e[k] == math.inf
        elif (p.i, p.j) == (0, 2):
            assert e[k] == pytest.approx(0.25 * math.log(0.25)
                                         + 0.75 * math.log(0.75))
        elif p.i == p.j:
            assert e[k] == pytest.approx(math.log(0.5) - 1e-9, abs=1e-15)
        assert e[k] == pair_energy(p, curve)


def test_hard_argmin_ideal_is_self_pair():
    for z in (0.1, 0.3, 0.5, 0.77):
        r = solve_binary(IdealModel(), z, make_uniform_grid(101), tau=0.01)
        assert not r.is_split
        assert r.x_hard_lo == r.x_hard_hi == z
        assert (r.phi_lo, r.phi_hi) == (1.0, 0.0)


def test_hard_argmin_margules_binodal():
    root = margules_binodal_root(2.5)
    r = solve_binary(MargulesModel(2.5), 0.5, make_uniform_grid(201), tau=0.01)
    spacing = (1 - 2e-8) / 200
    assert r.is_split
    assert abs(r.x_hard_lo - root) <= spacing
    assert abs(r.x_hard_hi - (1 - root)) <= spacing
    assert r.phi_lo == pytest.approx(0.5, abs=1e-9)
    assert r.phi_hi == pytest.approx(0.5, abs=1e-9)


def test_hard_argmin_tie_break_lexicographic():
    aug, pairs, _ = _setup([0.25, 0.5, 0.75], 0.5)
    # craft energies with two exactly equal finite minima
    e = np.full(pairs.n_pairs, np.inf)
    feas = np.where(pairs.feasible)[0]
    e[feas] = 1.0
    e[feas[1]] = e[feas[-1]] = -3.0
    i, j, k = hard_argmin(e, pairs)
    cand = sorted((int(pairs.i[t]), int(pairs.j[t]))
                  for t in (feas[1], feas[-1]))
    assert (i, j) == cand[0]


def test_solve_outside_binodal_no_split():
    r = solve_binary(MargulesModel(2.5), 0.97, make_uniform_grid(401), tau=0.01)
    assert not r.is_split
    # brute-force confirmation
    aug, pairs, curve = _setup(make_uniform_grid(401).points, 0.97,
                               MargulesModel(2.5))
    (bi, bj), _ = brute_force_best_pair(aug.points, curve.values, aug.feed)
    assert bi == bj == aug.feed_index


def test_forward_matches_brute_force_random_models():
    rng = np.random.default_rng(42)
    grid = make_uniform_grid(51)
    for _ in range(25):
        order = int(rng.integers(0, 7))
        model = FlexibleModel(rng.normal(0.0, 1.5, size=order + 1))
        z = float(rng.uniform(0.02, 0.98))
        aug = augment_with_feed(grid, z)
        curve = eval_curve(model, aug)
        pairs = feasible_pairs(aug)
        e = pair_energies(pairs, curve.values)
        i, j, _ = hard_argmin(e, pairs)
        (bi, bj), _ = brute_force_best_pair(aug.points, curve.values, z)
        assert (i, j) == (bi, bj)


def test_softmax_equal_energies():
    aug, pairs, _ = _setup([0.25, 0.5, 0.75], 0.5)
    e = np.full(pairs.n_pairs, np.inf)
    feas = np.where(pairs.feasible)[0]
    e[feas[0]] = e[feas[1]] = 2.0
    p = softmax_probs(e, tau=0.1)
    assert p[feas[0]] == pytest.approx(0.5)
    assert p[feas[1]] == pytest.approx(0.5)
    assert np.all(p[~pairs.feasible] == 0.0)


def test_softmax_exponential_dominance():
    e = np.array([0.0, 40.0 * 0.01, np.inf])
    p = softmax_probs(e, tau=0.01)
    assert p[0] > 1.0 - 1e-16
    assert p[1] < 1e-17
    assert p[2] == 0.0


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 30), st.floats(0.01, 0.2), st.integers(0, 10 ** 6))
def test_softmax_normalization(n, tau, seed):
    rng = np.random.default_rng(seed)
    e = rng.normal(0.0, 1.0, size=n)
    e[rng.integers(0, n, size=n // 3)] = np.inf
    if not np.any(np.isfinite(e)):
        e[0] = 0.0
    p = softmax_probs(e, tau)
    assert abs(p.sum() - 1.0) < 1e-12
    assert np.all(p >= 0.0)
    assert np.all(p[~np.isfinite(e)] == 0.0)


def test_softmax_rejects_bad_tau():
    with pytest.raises(ValueError):
        softmax_probs(np.array([1.0, 2.0]), 0.0)
    with pytest.raises(ValueError):
        softmax_probs(np.array([1.0, 2.0]), -0.5)


def test_soft_estimates_point_mass():
    aug, pairs, _ = _setup([0.25, 0.5, 0.75], 0.5)
    p = np.zeros(pairs.n_pairs)
    k = next(t for t, pr in enumerate(pairs) if (pr.i, pr.j) == (0, 2))
    p[k] = 1.0
    lo, hi = soft_estimates(p, pairs)
    assert (lo, hi) == (0.25, 0.75)


def test_soft_estimates_uniform_over_feasible():
    aug, pairs, _ = _setup([0.25, 0.5, 0.75], 0.5)
    p = pairs.feasible / pairs.feasible.sum()
    lo, hi = soft_estimates(p, pairs)
    assert lo == pytest.approx(np.mean([0.25, 0.25, 0.5, 0.5]))
    assert hi == pytest.approx(np.mean([0.5, 0.75, 0.5, 0.75]))


def test_soft_converges_to_hard_at_small_tau():
    model = MargulesModel(2.5)
    grid = make_uniform_grid(201)
    r_hard = solve_binary(model, 0.5, grid, tau=1e-4)
    aug = augment_with_feed(grid, 0.5)
    curve = eval_curve(model, aug)
    pairs = feasible_pairs(aug)
    e = pair_energies(pairs, curve.values)
    finite = np.sort(e[np.isfinite(e)])
    gap = finite[1] - finite[0]
    tau = gap / 40.0
    p = softmax_probs(e, tau)
    lo, hi = soft_estimates(p, pairs)
    assert abs(lo - r_hard.x_hard_lo) < 1e-6
    assert abs(hi - r_hard.x_hard_hi) < 1e-6
    # distributional statement: total variation to the argmin point mass
    point = np.zeros_like(p)
    point[np.argmin(e)] = 1.0
    assert 0.5 * np.abs(p - point).sum() < 1e-6


def test_st_gradient_constant_pair_grads_is_zero():
    aug, pairs, curve = _setup(np.linspace(0.1, 0.9, 9), 0.5,
                               MargulesModel(2.5))
    e = pair_energies(pairs, curve.values)
    p = softmax_probs(e, 0.05)
    g = np.where(pairs.feasible[:, None], 1.7, 0.0)  # identical everywhere
    d_lo, d_hi = st_param_gradient(p, g, pairs, 0.05)
    assert abs(d_lo[0]) < 1e-12
    assert abs(d_hi[0]) < 1e-12


def test_st_gradient_covariance_identity():
    # gradients proportional to x_i make the lower gradient -Var(x_i)/tau
    aug, pairs, curve = _setup(np.linspace(0.1, 0.9, 9), 0.5,
                               MargulesModel(2.5))
    e = pair_energies(pairs, curve.values)
    tau = 0.07
    p = softmax_probs(e, tau)
    xi = aug.points[pairs.i]
    g = np.where(pairs.feasible, xi, 0.0)[:, None]
    d_lo, _ = st_param_gradient(p, g, pairs, tau)
    var = p @ xi ** 2 - (p @ xi) ** 2
    assert d_lo[0] == pytest.approx(-var / tau, rel=1e-12)


@pytest.mark.parametrize("seed", range(6))
def test_st_gradient_matches_fd(seed):
    rng = np.random.default_rng(100 + seed)
    theta = rng.normal(0.0, 1.0, size=5)
    z = float(rng.uniform(0.2, 0.8))
    tau = float(rng.uniform(0.02, 0.1))
    grid = make_uniform_grid(41)

    def soft(th):
        model = FlexibleModel(th)
        aug = augment_with_feed(grid, z)
        curve = eval_curve(model, aug)
        pairs = feasible_pairs(aug)
        p = softmax_probs(pair_energies(pairs, curve.values), tau)
        return np.array(soft_estimates(p, pairs))

    model = FlexibleModel(theta)
    aug = augment_with_feed(grid, z)
    curve = eval_curve(model, aug)
    pairs = feasible_pairs(aug)
    p = softmax_probs(pair_energies(pairs, curve.values), tau)
    pg = pair_param_gradients(pairs, model.param_gradient(aug.points))
    d_lo, d_hi = st_param_gradient(p, pg, pairs, tau)
    fd = central_difference_gradient(soft, theta)  # (n_par, 2)
    assert np.linalg.norm(d_lo - fd[:, 0]) <= 1e-5 * max(1.0, np.linalg.norm(fd[:, 0]))
    assert np.linalg.norm(d_hi - fd[:, 1]) <= 1e-5 * max(1.0, np.linalg.norm(fd[:, 1]))


def test_st_gradient_rejects_mismatched_lengths():
    aug, pairs, curve = _setup([0.25, 0.5, 0.75], 0.5)
    p = softmax_probs(pair_energies(pairs, curve.values), 0.05)
    with pytest.raises(ValueError):
        st_param_gradient(p, np.zeros((3, 1)), pairs, 0.05)


def test_binodal_convergence_in_resolution():
    for A in (2.2, 2.5, 3.0):
        root = margules_binodal_root(A)
        for n in (51, 101, 201, 401):
            spacing = (1 - 2e-8) / (n - 1)
            r = solve_binary(MargulesModel(A), 0.5, make_uniform_grid(n),
                             tau=0.01)
            assert abs(r.x_hard_lo - root) <= spacing
            assert abs(r.x_hard_hi - (1 - root)) <= spacing


def test_result_json_schema():
    r = solve_binary(MargulesModel(2.5), 0.5, make_uniform_grid(101), tau=0.01)
    d = json.loads(r.to_json())
    assert set(d) == {"z", "x_lo", "x_hi", "x_soft_lo", "x_soft_hi",
                      "phi_lo", "phi_hi", "is_split", "tau", "grid_n"}
    assert d["is_split"] is True
    assert d["grid_n"] == 101  # z = 0.5 deduplicates onto the odd grid


def test_result_mass_balance_invariant():
    rng = np.random.default_rng(5)
    grid = make_uniform_grid(101)
    for _ in range(20):
        model = FlexibleModel(rng.normal(0.0, 1.5, size=4))
        z = float(rng.uniform(0.05, 0.95))
        r = solve_binary(model, z, grid, tau=0.02)
        assert r.x_hard_lo <= z <= r.x_hard_hi
        if r.is_split:
            assert r.phi_lo + r.phi_hi == pytest.approx(1.0, abs=1e-12)
            assert (r.phi_lo * r.x_hard_lo + r.phi_hi * r.x_hard_hi
                    == pytest.approx(z, abs=1e-12))
        else:
            assert r.x_hard_lo == r.x_hard_hi == z
