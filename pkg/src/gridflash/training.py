"""Losses, optimizer loop, and metrics for fitting models to equilibrium labels.

The direct losses act on the solver's straight-through outputs: the reported
value is the hard composition while the propagated gradient follows the soft
softmax surrogate. Auxiliary curvature losses (hinge penalties at the target
phase compositions / feed, and the minimum-curvature misfit over a fixed
grid) are analytic in the parameters for polynomial models.
"""

import time
from dataclasses import dataclass

import numpy as np

from .grids import make_uniform_grid, augment_with_feed
from .candidates import feasible_pairs
from .models import eval_curve, second_derivative
from . import solver as _solver

DIVERGENCE_GUARD = 1e6


class FitDivergedError(RuntimeError):
    """Raised when the training loss blows past the divergence guard."""


@dataclass
class FitConfig:
    """Hyperparameters of the fitting protocol.

    tau anneals per epoch: tau = tau0 * tau_decay**epoch. lambda_G and
    lambda_H weight the curvature-misfit and hinge losses; eps_H is the
    curvature margin (RT) keeping the hinges away from the sign boundary.
    """

    learning_rate: float = 0.1
    epochs: int = 200
    batch_size: int = 1
    tau0: float = 0.1
    tau_decay: float = 0.98
    lambda_G: float = 0.01
    lambda_H: float = 0.05
    eps_H: float = 0.1
    grid_n: int = 101
    gibbs_grid_n: int = 101
    optimizer: str = "adamw"       # "adamw" or "sgd"
    schedule: str = "onecycle"     # "onecycle" or "constant"
    weight_decay: float = 1e-4
    seed: int = 0
    eps_tie: float = 1e-9
    patience: int = 0              # 0 disables early stopping
    divergence_guard: float = DIVERGENCE_GUARD

    def __post_init__(self):
        if self.tau0 <= 0.0:
            raise ValueError("tau0 must be positive")
        if not 0.0 < self.tau_decay <= 1.0:
            raise ValueError("tau_decay must lie in (0, 1]")
        if self.lambda_G < 0.0 or self.lambda_H < 0.0:
            raise ValueError("loss weights must be nonnegative")


@dataclass
class FitReport:
    theta: np.ndarray
    loss_trace: list
    mae: float
    rmse: float
    r2: float
    wall_time_s: float
    epochs_run: int
    batch_size: int
    seed: int

    def to_dict(self, include_wall_time=False):
        d = {"theta": np.asarray(self.theta).tolist(),
             "loss_trace": [float(v) for v in self.loss_trace],
             "mae": self.mae, "rmse": self.rmse, "r2": self.r2,
             "epochs_run": self.epochs_run, "batch_size": self.batch_size,
             "seed": self.seed}
        if include_wall_time:
            d["wall_time_s"] = self.wall_time_s
        return d


def direct_loss(pred, target):
    """Mean squared error over both phase compositions.

    Accepts single (lo, hi) tuples or arrays of shape (M, 2); batch inputs
    are averaged over items.
    """
    p = np.atleast_2d(np.asarray(pred, dtype=float))
    t = np.atleast_2d(np.asarray(target, dtype=float))
    return float(np.mean(np.sum((p - t) ** 2, axis=1)))


def hessian_loss(model, x_lo, x_hi, z, margin=0.1):
    """Hinge penalties on curvature signs at the targets and the feed.

    Convexity is demanded at both target phase compositions
    (max(0, margin - g''(x))) and concavity at the feed
    (max(0, g''(z) + margin)); the loss is the sum of the three hinges and
    is exactly zero when every curvature clears its margin.
    """
    c_lo = second_derivative(model, x_lo)
    c_hi = second_derivative(model, x_hi)
    c_z = second_derivative(model, z)
    return (max(0.0, margin - c_lo) + max(0.0, margin - c_hi)
            + max(0.0, c_z + margin))


def gibbs_loss(model, grid_n=101):
    """Minimum-curvature misfit max(0, min_d g''(x_d)) over a fixed grid.

    Zero exactly when some grid point has negative curvature, i.e. the model
    admits a concave region (a necessary condition for a miscibility gap).
    """
    grid = make_uniform_grid(grid_n)
    c = second_derivative(model, grid.points)
    return max(0.0, float(np.min(c)))


def _curvature_grad(model, x):
    # d g''(x) / dθ for trainable models; analytic for polynomial kinds
    if hasattr(model, "curvature_param_gradient"):
        return np.atleast_2d(model.curvature_param_gradient(x))
    h = 1e-4
    gp = model.param_gradient
    return np.atleast_2d((gp(x + h) - 2.0 * gp(x) + gp(x - h)) / h ** 2)


def _hessian_loss_grad(model, x_lo, x_hi, z, margin):
    grad = np.zeros(model.theta.size)
    for x, convex in ((x_lo, True), (x_hi, True), (z, False)):
        c = second_derivative(model, x)
        if convex and c < margin:
            grad -= _curvature_grad(model, x)[0]
        elif not convex and c > -margin:
            grad += _curvature_grad(model, x)[0]
    return grad


def _gibbs_loss_grad(model, grid_n):
    grid = make_uniform_grid(grid_n)
    c = np.asarray(second_derivative(model, grid.points))
    k = int(np.argmin(c))
    if c[k] <= 0.0:
        return np.zeros(model.theta.size)
    return _curvature_grad(model, grid.points[k])[0]


def _solve_with_grad(model, z, grid, tau, eps_tie):
    """One flash plus the soft-composition parameter Jacobians."""
    aug = augment_with_feed(grid, z)
    curve = eval_curve(model, aug)
    pairs = feasible_pairs(aug)
    energies = _solver.pair_energies(pairs, curve.values, eps_tie)
    i_s, j_s, k = _solver.hard_argmin(energies, pairs)
    probs = _solver.softmax_probs(energies, tau)
    xs_lo, xs_hi = _solver.soft_estimates(probs, pairs)
    state_grads = model.param_gradient(aug.points)
    pair_grads = _solver.pair_param_gradients(pairs, state_grads)
    d_lo, d_hi = _solver.st_param_gradient(probs, pair_grads, pairs, tau)
    if i_s == j_s:
        xh_lo = xh_hi = float(z)
    else:
        xh_lo, xh_hi = float(aug.points[i_s]), float(aug.points[j_s])
    return xh_lo, xh_hi, xs_lo, xs_hi, d_lo, d_hi


def total_loss(batch, model, config: FitConfig, tau=None, soft_residual=False):
    """Loss and parameter gradient over a batch of (z, x_lo, x_hi) items.

    The gradient of the direct terms follows the straight-through contract:
    hard residuals multiplied by the soft-composition Jacobians. With
    ``soft_residual=True`` the residuals use the soft compositions too,
    making the whole objective the smooth surrogate (finite-difference
    checkable); training uses the default.
    """
    if tau is None:
        tau = config.tau0
    grid = make_uniform_grid(config.grid_n)
    n_par = model.theta.size
    loss = 0.0
    grad = np.zeros(n_par)
    for item_idx, (z, xt_lo, xt_hi) in enumerate(batch):
        try:
            xh_lo, xh_hi, xs_lo, xs_hi, d_lo, d_hi = _solve_with_grad(
                model, z, grid, tau, config.eps_tie)
        except (ValueError, FloatingPointError) as exc:
            raise FitDivergedError(
                f"solver failure on batch item {item_idx}: {exc}") from exc
        v_lo, v_hi = (xs_lo, xs_hi) if soft_residual else (xh_lo, xh_hi)
        loss += (v_lo - xt_lo) ** 2 + (v_hi - xt_hi) ** 2
        grad += 2.0 * (v_lo - xt_lo) * d_lo + 2.0 * (v_hi - xt_hi) * d_hi
        if config.lambda_H > 0.0:
            loss += config.lambda_H * hessian_loss(model, xt_lo, xt_hi, z,
                                                   config.eps_H)
            grad += config.lambda_H * _hessian_loss_grad(model, xt_lo, xt_hi,
                                                         z, config.eps_H)
    m = len(batch)
    loss /= m
    grad /= m
    if config.lambda_G > 0.0:
        loss += config.lambda_G * gibbs_loss(model, config.gibbs_grid_n)
        grad += config.lambda_G * _gibbs_loss_grad(model, config.gibbs_grid_n)
    return loss, grad


def _lr_at(config: FitConfig, epoch):
    if config.schedule == "constant":
        return config.learning_rate
    # one-cycle: cosine warmup over the first 30% of epochs from lr/25,
    # then cosine annealing to zero
    pct = epoch / max(1, config.epochs)
    lr = config.learning_rate
    if pct < 0.3:
        return lr * (0.04 + 0.96 * 0.5 * (1.0 - np.cos(np.pi * pct / 0.3)))
    return lr * 0.5 * (1.0 + np.cos(np.pi * (pct - 0.3) / 0.7))


class _AdamW:
    def __init__(self, n, weight_decay):
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.t = 0
        self.wd = weight_decay
        self.b1, self.b2, self.eps = 0.9, 0.999, 1e-8

    def step(self, theta, grad, lr):
        self.t += 1
        self.m = self.b1 * self.m + (1.0 - self.b1) * grad
        self.v = self.b2 * self.v + (1.0 - self.b2) * grad ** 2
        mh = self.m / (1.0 - self.b1 ** self.t)
        vh = self.v / (1.0 - self.b2 ** self.t)
        return theta - lr * (mh / (np.sqrt(vh) + self.eps) + self.wd * theta)


class _Sgd:
    def __init__(self, n, weight_decay):
        self.wd = weight_decay

    def step(self, theta, grad, lr):
        return theta - lr * (grad + self.wd * theta)


def fit_system(labels, model0, config: FitConfig):
    """Fit a trainable model to equilibrium labels [(z, x_lo, x_hi), ...].

    Deterministic given the seed (batch shuffling is the only source of
    randomness). tau anneals per epoch; the run aborts when the loss
    exceeds the divergence guard. Final metrics use hard outputs.
    """
    if len(labels) == 0:
        raise ValueError("at least one label is required")
    t0 = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    theta = model0.theta.copy()
    opt = (_AdamW if config.optimizer == "adamw" else _Sgd)(
        theta.size, config.weight_decay)
    model = model0.with_theta(theta)
    tau = config.tau0
    trace = []
    items = list(labels)
    bs = config.batch_size if config.batch_size > 0 else len(items)
    best, stall = np.inf, 0
    epochs_run = 0
    for epoch in range(config.epochs):
        order = rng.permutation(len(items)) if len(items) > bs \
            else np.arange(len(items))
        lr = _lr_at(config, epoch)
        epoch_loss = 0.0
        n_batches = 0
        for s in range(0, len(items), bs):
            batch = [items[k] for k in order[s:s + bs]]
            loss, grad = total_loss(batch, model, config, tau=tau)
            if not np.isfinite(loss) or loss > config.divergence_guard:
                raise FitDivergedError(
                    f"loss {loss:g} exceeded the divergence guard at epoch {epoch}")
            theta = opt.step(theta, grad, lr)
            model = model.with_theta(theta)
            epoch_loss += loss
            n_batches += 1
        trace.append(epoch_loss / n_batches)
        tau *= config.tau_decay
        epochs_run = epoch + 1
        if config.patience > 0:
            if trace[-1] < best - 1e-12:
                best, stall = trace[-1], 0
            else:
                stall += 1
                if stall >= config.patience:
                    break
    preds = []
    grid = make_uniform_grid(config.grid_n)
    for z, *_ in items:
        r = _solver.solve_binary(model, z, grid, tau=tau, eps_tie=config.eps_tie)
        preds.append((r.x_hard_lo, r.x_hard_hi))
    targets = [(lo, hi) for _, lo, hi in items]
    mae, rmse, r2 = metrics(preds, targets)
    return FitReport(theta=theta, loss_trace=trace, mae=mae, rmse=rmse, r2=r2,
                     wall_time_s=time.perf_counter() - t0,
                     epochs_run=epochs_run, batch_size=bs, seed=config.seed)


def metrics(preds, targets):
    """(MAE, RMSE, R2) over paired phase compositions.

    MAE sums both phase errors per item before averaging (so a perfect lower
    phase with a 0.1 upper-phase error scores 0.1, not 0.05); RMSE is the
    root of the mean per-item squared-error sum; R2 is computed on the
    concatenated compositions of both phases.
    """
    p = np.asarray(preds, dtype=float)
    t = np.asarray(targets, dtype=float)
    if p.size == 0:
        raise ValueError("metrics need at least one prediction")
    if p.shape != t.shape:
        raise ValueError("predictions and targets must have equal shape")
    p = np.atleast_2d(p)
    t = np.atleast_2d(t)
    err = p - t
    mae = float(np.mean(np.sum(np.abs(err), axis=1)))
    rmse = float(np.sqrt(np.mean(np.sum(err ** 2, axis=1))))
    flat_p, flat_t = p.reshape(-1), t.reshape(-1)
    ss_res = float(np.sum((flat_p - flat_t) ** 2))
    ss_tot = float(np.sum((flat_t - flat_t.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else (1.0 if ss_res == 0.0 else 0.0)
    return mae, rmse, r2
