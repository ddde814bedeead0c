"""Command-line interface.

Subcommands: solve, fit, dataset, vp, llle, dist. Every command writes its
result to a new file (JSON or CSV); --plot additionally renders a matplotlib
figure next to the delimited output. Exit codes: 0 success, 1 runtime
failure, 2 usage error. Reruns with identical arguments and seed reproduce
identical output bytes.
"""

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import applications as apps
from . import models as _models
from . import solver as _solver
from .candidates import enumerate_groups, GroupBudgetError
from .grids import make_uniform_grid
from .models import FlexibleModel, VdwHelmholtz, eval_curve, model_from_spec
from .training import FitConfig, FitDivergedError, fit_system, metrics


def _model_from_args(parser, args):
    if getattr(args, "model_json", None):
        with open(args.model_json) as fh:
            return model_from_spec(json.load(fh))
    kind = args.model
    if kind is None:
        parser.error("--model (or --model-json) is required")
    try:
        if kind == "ideal":
            return _models.IdealModel()
        if kind == "margules":
            if args.A is None:
                parser.error("--A is required for the margules model")
            return _models.MargulesModel(args.A)
        if kind == "nrtl":
            if args.tau12 is None or args.tau21 is None:
                parser.error("--tau12 and --tau21 are required for nrtl")
            return _models.NRTLModel(args.tau12, args.tau21, args.alpha)
        if kind == "flexible":
            if not args.theta:
                parser.error("--theta is required for the flexible model")
            theta = [float(t) for t in args.theta.split(",")]
            return _models.FlexibleModel(theta)
    except ValueError as exc:
        parser.error(str(exc))
    parser.error(f"unknown model kind {kind!r}")


def _add_model_flags(p):
    p.add_argument("--model", choices=["ideal", "margules", "nrtl", "flexible"],
                   help="model kind (inline parameters via the flags below)")
    p.add_argument("--model-json", help="JSON file with a model spec "
                   '(e.g. {"kind": "margules", "A": 2.5})')
    p.add_argument("--A", type=float, help="margules interaction (RT units)")
    p.add_argument("--tau12", type=float, help="nrtl tau12")
    p.add_argument("--tau21", type=float, help="nrtl tau21")
    p.add_argument("--alpha", type=float, default=0.2,
                   help="nrtl nonrandomness factor (default 0.2)")
    p.add_argument("--theta", help="flexible coefficients, comma separated")


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _figure_path(out):
    return str(Path(out).with_suffix(".png"))


def _vprint(args, *msg):
    if args.verbose:
        print(*msg, file=sys.stderr)


def cmd_solve(parser, args):
    model = _model_from_args(parser, args)
    if not 0.0 < args.z < 1.0:
        parser.error("--z must lie strictly inside (0, 1)")
    if args.tau <= 0.0:
        parser.error("--tau must be positive")
    grid = make_uniform_grid(args.grid, args.eps)
    result = _solver.solve_binary(model, args.z, grid, tau=args.tau)
    _write_json(args.out, result.to_dict())
    _vprint(args, f"wrote {args.out}")
    if args.plot:
        from . import plotting
        plotting.save_gmix_figure(_figure_path(args.out), model, result)
        _vprint(args, f"wrote {_figure_path(args.out)}")
    return 0


def cmd_fit(parser, args):
    try:
        labels = apps.read_labels_csv(args.labels)
    except (OSError, KeyError, ValueError) as exc:
        parser.error(f"cannot read labels file: {exc}")
    split_rows = [r for r in labels if r["is_split"]]
    if not split_rows:
        parser.error("labels file contains no split systems to fit")

    overrides = {}
    if args.config:
        with open(args.config) as fh:
            overrides.update(json.load(fh))
    for key, flag in (("learning_rate", "lr"), ("epochs", "epochs"),
                      ("batch_size", "batch_size"), ("tau0", "tau0"),
                      ("tau_decay", "tau_decay"), ("lambda_G", "lambda_g"),
                      ("lambda_H", "lambda_h"), ("eps_H", "eps_h"),
                      ("grid_n", "grid"), ("gibbs_grid_n", "gibbs_grid"),
                      ("optimizer", "optimizer"), ("schedule", "schedule"),
                      ("seed", "seed")):
        val = getattr(args, flag)
        if val is not None:
            overrides[key] = val
    try:
        config = FitConfig(**overrides)
    except (TypeError, ValueError) as exc:
        parser.error(f"bad fit configuration: {exc}")

    by_system = {}
    for r in split_rows:
        by_system.setdefault(r["system_id"], []).append(
            (r["z"], r["x_lo"], r["x_hi"]))

    t0 = time.perf_counter()
    reports = {}
    all_preds, all_targets = [], []
    for sid in sorted(by_system):
        items = by_system[sid]
        model0 = FlexibleModel.zeros(args.order)
        try:
            rep = fit_system(items, model0, config)
        except FitDivergedError as exc:
            print(f"error: fit diverged on {sid}: {exc}", file=sys.stderr)
            return 1
        reports[sid] = rep
        model = model0.with_theta(rep.theta)
        grid = make_uniform_grid(config.grid_n)
        for z, lo, hi in items:
            r = _solver.solve_binary(model, z, grid,
                                     tau=config.tau0 * config.tau_decay ** rep.epochs_run)
            all_preds.append((r.x_hard_lo, r.x_hard_hi))
            all_targets.append((lo, hi))
    mae, rmse, r2 = metrics(all_preds, all_targets)
    payload = {
        "config": {k: v for k, v in vars(config).items()},
        "systems": {sid: rep.to_dict() for sid, rep in reports.items()},
        "aggregate": {"mae": mae, "rmse": rmse, "r2": r2,
                      "n_systems": len(reports)},
    }
    _write_json(args.out, payload)
    _vprint(args, f"fit {len(reports)} systems in "
            f"{time.perf_counter() - t0:.2f}s; aggregate MAE {mae:.4f}; "
            f"wrote {args.out}")
    if args.plot:
        from . import plotting
        first = reports[sorted(reports)[0]]
        plotting.save_fit_figure(_figure_path(args.out), first)
        _vprint(args, f"wrote {_figure_path(args.out)}")
    return 0


def cmd_dataset(parser, args):
    if args.models:
        with open(args.models) as fh:
            specs = json.load(fh)
        if not isinstance(specs, list):
            parser.error("--models file must hold a JSON list of model specs")
    else:
        specs = [_model_from_args(parser, args).spec()]
    threads = args.threads or os.cpu_count() or 1
    rows, warnings = apps.generate_labels(specs, grid_n=args.grid,
                                          threads=threads)
    for w in warnings:
        print(f"WARN {w}", file=sys.stderr)
    apps.write_labels_csv(args.out, rows)
    _vprint(args, f"wrote {len(rows)} rows to {args.out}")
    return 0


def cmd_vp(parser, args):
    if args.tr <= 0.0:
        parser.error("--tr must be positive")
    model = VdwHelmholtz(args.tr)
    result = apps.vapor_pressure(model, tau=args.tau, n_points=args.points,
                                 v_range=(args.vmin, args.vmax))
    _write_json(args.out, result.to_dict())
    _vprint(args, f"wrote {args.out}")
    if args.plot:
        from . import plotting
        plotting.save_helmholtz_figure(_figure_path(args.out), model, result,
                                       v_range=(args.vmin, args.vmax))
        _vprint(args, f"wrote {_figure_path(args.out)}")
    return 0


def cmd_llle(parser, args):
    try:
        zparts = [float(t) for t in args.z.split(",")]
    except ValueError:
        parser.error("--z must be comma-separated mole fractions")
    model = _models.SymmetricTernaryModel(args.A)
    try:
        result = apps.solve_llle(model, zparts, resolution=args.resolution,
                                 tau=args.tau, method=args.method)
    except ValueError as exc:
        parser.error(str(exc))
    _write_json(args.out, result.to_dict())
    _vprint(args, f"{len(result.phases)} phases; wrote {args.out}")
    if (args.dist_out or args.plot) and args.method != "f1":
        print("note: per-state dumps/figures need the f1 distribution; "
              "skipping", file=sys.stderr)
        return 0
    if args.dist_out:
        from .grids import make_simplex_grid
        from .solver import write_distribution_csv
        write_distribution_csv(args.dist_out, make_simplex_grid(3, args.resolution),
                               result.distribution)
        _vprint(args, f"wrote {args.dist_out}")
    if args.plot:
        from . import plotting
        from .grids import make_simplex_grid
        grid = make_simplex_grid(3, args.resolution)
        z = np.asarray(zparts + [1.0 - sum(zparts)]) \
            if len(zparts) == 2 else np.asarray(zparts)
        plotting.save_ternary_figure(_figure_path(args.out), grid,
                                     result.distribution.probabilities,
                                     phases=result.phases, z=z)
        _vprint(args, f"wrote {_figure_path(args.out)}")
    return 0


def cmd_dist(parser, args):
    model = _model_from_args(parser, args)
    if not 0.0 < args.z < 1.0:
        parser.error("--z must lie strictly inside (0, 1)")
    if args.tau <= 0.0:
        parser.error("--tau must be positive")
    grid = make_uniform_grid(args.grid, args.eps)
    curve = eval_curve(model, grid)
    beta = -1.0 / args.tau
    f1 = _solver.formulation1_distribution(curve, args.z, beta)
    z_full = np.array([args.z, 1.0 - args.z])
    try:
        groups = enumerate_groups(grid, z_full, max_order=2)
    except GroupBudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    f2 = _solver.formulation2_distribution(groups, groups.energies(curve.values),
                                           beta)
    marginal = _solver.formulation2_state_marginal(groups, f2)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "p_formulation1", "p_formulation2_marginal"])
        for x, p1, p2 in zip(grid.points, f1.probabilities, marginal):
            w.writerow([repr(float(x)), repr(float(p1)), repr(float(p2))])
    _vprint(args, f"wrote {args.out}")
    if args.plot:
        from . import plotting
        plotting.save_distribution_figure(
            _figure_path(args.out), grid.points,
            {"formulation 1": f1.probabilities,
             "formulation 2 marginal": marginal}, z=args.z)
        _vprint(args, f"wrote {_figure_path(args.out)}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gridflash",
        description="Discrete-enumeration phase-equilibrium solver and "
                    "excess-Gibbs-energy model fitter.")
    parser.add_argument("--verbose", action="store_true",
                        help="progress messages on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="binary flash at a feed composition")
    _add_model_flags(p)
    p.add_argument("--z", type=float, required=True, help="feed mole fraction")
    p.add_argument("--grid", type=int, default=401, help="grid size (default 401)")
    p.add_argument("--eps", type=float, default=1e-8,
                   help="boundary clip (default 1e-8)")
    p.add_argument("--tau", type=float, default=0.01,
                   help="softmax temperature, RT units (default 0.01)")
    p.add_argument("--out", default="result.json")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("fit", help="fit flexible models to labeled systems")
    p.add_argument("--labels", required=True, help="labels CSV")
    p.add_argument("--config", help="JSON file overriding fit defaults")
    p.add_argument("--order", type=int, default=6,
                   help="polynomial order of the fitted model (default 6)")
    p.add_argument("--lr", type=float, help="max learning rate (default 0.1)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--tau0", type=float)
    p.add_argument("--tau-decay", type=float, dest="tau_decay")
    p.add_argument("--lambda-g", type=float, dest="lambda_g")
    p.add_argument("--lambda-h", type=float, dest="lambda_h")
    p.add_argument("--eps-h", type=float, dest="eps_h")
    p.add_argument("--grid", type=int, help="solver grid size (default 101)")
    p.add_argument("--gibbs-grid", type=int, dest="gibbs_grid")
    p.add_argument("--optimizer", choices=["adamw", "sgd"])
    p.add_argument("--schedule", choices=["onecycle", "constant"])
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="report.json")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("dataset", help="generate equilibrium labels")
    _add_model_flags(p)
    p.add_argument("--models", help="JSON file with a list of model specs")
    p.add_argument("--grid", type=int, default=401)
    p.add_argument("--threads", type=int, default=0,
                   help="worker threads (default: all cores)")
    p.add_argument("--out", default="labels.csv")
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("vp", help="pure-component vapor pressure (reduced vdW)")
    p.add_argument("--tr", type=float, required=True, help="reduced temperature")
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--vmin", type=float, default=0.4)
    p.add_argument("--vmax", type=float, default=60.0)
    p.add_argument("--tau", type=float, default=0.05,
                   help="softmax temperature, R*Tc units (default 0.05)")
    p.add_argument("--out", default="vle.json")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_vp)

    p = sub.add_parser("llle", help="ternary three-phase split")
    p.add_argument("--A", type=float, required=True,
                   help="pairwise interaction of the symmetric ternary model")
    p.add_argument("--resolution", type=int, default=50)
    p.add_argument("--z", required=True,
                   help="feed, two comma-separated mole fractions")
    p.add_argument("--tau", type=float, default=apps.DEFAULT_LLLE_TAU,
                   help="softmax temperature, RT units (default 1e-3)")
    p.add_argument("--method", choices=["f1", "f2"], default="f1",
                   help="state distribution (f1) or group enumeration (f2, "
                        "budget-guarded)")
    p.add_argument("--out", default="llle.json")
    p.add_argument("--dist-out", dest="dist_out",
                   help="also dump the state distribution CSV "
                        "(state_composition, probability)")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_llle)

    p = sub.add_parser("dist", help="state-distribution dump (both formulations)")
    _add_model_flags(p)
    p.add_argument("--z", type=float, required=True)
    p.add_argument("--grid", type=int, default=500)
    p.add_argument("--eps", type=float, default=1e-8)
    p.add_argument("--tau", type=float, default=0.005,
                   help="softmax temperature, RT units (default 0.005)")
    p.add_argument("--out", default="dist.csv")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_dist)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(parser, args)
    except (OSError, RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
