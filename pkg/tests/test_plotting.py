from gridflash import (FitConfig, FlexibleModel, MargulesModel,
                       SymmetricTernaryModel, VdwHelmholtz, eval_curve,
                       fit_system, formulation1_distribution,
                       make_simplex_grid, make_uniform_grid, solve_binary,
                       solve_llle, vapor_pressure, write_distribution_csv)
from gridflash import plotting

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def _is_png(path):
    return path.read_bytes()[:8] == PNG_MAGIC


def test_gmix_figure(tmp_path):
    model = MargulesModel(2.5)
    result = solve_binary(model, 0.5, make_uniform_grid(101), tau=0.01)
    out = tmp_path / "gmix.png"
    plotting.save_gmix_figure(out, model, result)
    assert _is_png(out)


def test_distribution_figure(tmp_path):
    grid = make_uniform_grid(200)
    curve = eval_curve(MargulesModel(2.5), grid)
    dist = formulation1_distribution(curve, 0.5, beta=-1 / 0.005)
    out = tmp_path / "dist.png"
    plotting.save_distribution_figure(out, grid.points,
                                      {"states": dist.probabilities}, z=0.5)
    assert _is_png(out)


def test_fit_trace_figure(tmp_path):
    config = FitConfig(epochs=5, grid_n=21, lambda_G=0.0, lambda_H=0.0)
    report = fit_system([(0.5, 0.2, 0.8)], FlexibleModel.zeros(2), config)
    out = tmp_path / "trace.png"
    plotting.save_fit_figure(out, report)
    assert _is_png(out)


def test_ternary_figure(tmp_path):
    res = solve_llle(SymmetricTernaryModel(3.0), [1 / 3, 1 / 3],
                     resolution=20, tau=0.001)
    grid = make_simplex_grid(3, 20)
    out = tmp_path / "ternary.png"
    plotting.save_ternary_figure(out, grid, res.distribution.probabilities,
                                 phases=res.phases, z=[1 / 3, 1 / 3, 1 / 3])
    assert _is_png(out)


def test_helmholtz_figure(tmp_path):
    model = VdwHelmholtz(0.9)
    res = vapor_pressure(model, n_points=100)
    out = tmp_path / "vle.png"
    plotting.save_helmholtz_figure(out, model, res)
    assert _is_png(out)


def test_distribution_csv_binary(tmp_path):
    grid = make_uniform_grid(50)
    curve = eval_curve(MargulesModel(2.5), grid)
    dist = formulation1_distribution(curve, 0.5, beta=-1 / 0.01)
    out = tmp_path / "dist.csv"
    write_distribution_csv(out, grid, dist)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "state_composition,probability"
    assert len(lines) == 51
    total = sum(float(line.rsplit(",", 1)[1]) for line in lines[1:])
    assert abs(total - 1.0) < 1e-9


def test_distribution_csv_simplex(tmp_path):
    grid = make_simplex_grid(3, 10)
    res = solve_llle(SymmetricTernaryModel(3.0), [1 / 3, 1 / 3], grid=grid,
                     tau=0.005)
    out = tmp_path / "dist3.csv"
    write_distribution_csv(out, grid, res.distribution)
    lines = out.read_text().strip().splitlines()
    assert len(lines) == grid.n + 1
    # quoted three-component composition in the first field
    assert lines[1].startswith('"')
