import json
import math
import subprocess
import sys

import pytest

from thermal_minmax import __version__
from thermal_minmax import cli
from thermal_minmax import game_ensemble as ge
from thermal_minmax.cli import (
    EXIT_FAILURE,
    EXIT_OK,
    EXIT_PARTIAL,
    EXIT_USAGE,
    ComparisonRow,
    ConfigError,
    emit_figure_data,
    load_config_file,
    main,
    parse_grid,
    parse_seeds,
    resolve_config,
)
from thermal_minmax.finite_temperature import SolverConfig


def _read(path):
    return path.read_bytes()


def test_parse_grid_forms():
    assert parse_grid("0.5,0.75,1") == [0.5, 0.75, 1.0]
    assert parse_grid("1") == [1.0]
    ks = parse_grid("-0.75:-1.25:0.05")
    assert len(ks) == 11
    assert ks[0] == -0.75 and ks[-1] == -1.25 and ks[5] == -1.0
    assert parse_grid("0:1:0.25") == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert parse_grid("1:0:-0.5") == [1.0, 0.5, 0.0]
    for bad in ("", "1:2", "0:1:0", "a,b"):
        with pytest.raises(ConfigError):
            parse_grid(bad)


def test_parse_seeds_forms():
    assert parse_seeds("10") == list(range(10))
    assert parse_seeds("3,1,4") == [3, 1, 4]
    assert parse_seeds("2:4") == [2, 3, 4]
    with pytest.raises(ConfigError):
        parse_seeds("x")


def test_defaults_match_module_defaults():
    cfg = resolve_config("finite-t", {})
    s = cfg.settings
    d = SolverConfig()
    assert (s["tol"], s["max_iter"], s["damping"], s["z_order"], s["eta_panel_nodes"]) == (
        d.tol, d.max_iter, d.damping, d.z_order, d.eta_panel_nodes)
    assert resolve_config("lp-ensemble", {}).settings["seeds"] == list(ge.DEFAULT_SEEDS)
    assert resolve_config("compare", {}).settings["m"] == 200


def test_precedence_flags_over_file_over_defaults(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# sweep\ngammas = 0.5, 2\nsigma = 3\n\nm = 7  # trailing comment\n")
    file_settings = load_config_file(str(path))
    cfg = resolve_config("lp-ensemble", {"m": "11"}, file_settings)
    assert cfg.settings["gammas"] == [0.5, 2.0]
    assert cfg.settings["sigma"] == [3.0]
    assert cfg.settings["m"] == 11
    assert cfg.settings["support_tol"] == 1e-8


def test_config_file_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("gammas 0.5\n")
    with pytest.raises(ConfigError):
        load_config_file(str(bad))
    with pytest.raises(ConfigError):
        load_config_file(str(tmp_path / "missing.cfg"))
    with pytest.raises(ConfigError):
        resolve_config("zero-t", {}, {"chains": "3"})


@pytest.mark.parametrize("argv", [
    ["zero-t", "--bogus", "1"],
    ["lp-ensemble", "--m", "10", "--gammas", "0.01"],
    ["finite-t", "--k", "0.5"],
    ["finite-t", "--beta-max", "-1"],
    ["zero-t", "--gammas", "abc"],
    ["nonsense"],
])
def test_usage_errors(argv, tmp_path, capsys):
    assert main(argv + ["--output", str(tmp_path)] if argv[0] != "nonsense" else argv) == EXIT_USAGE


def test_zero_t_artifacts_and_manifest_replay(tmp_path, capsys):
    out = tmp_path / "a"
    assert main(["zero-t", "--gammas", "0.5,1,2", "--output", str(out)]) == EXIT_OK
    results = out / "zero-t_results.csv"
    summary = (out / "zero-t_summary.txt").read_text()
    manifest = json.loads((out / "zero-t_manifest.json").read_text())
    assert "alpha_x" in summary.splitlines()[0]
    assert manifest["command"] == "zero-t"
    assert manifest["version"].endswith(__version__)
    assert manifest["settings"]["gammas"] == [0.5, 1.0, 2.0]
    assert manifest["settings"]["zero_t_tol"] == 1e-13
    lines = results.read_text().splitlines()
    assert len(lines) == 4 and lines[0].startswith("gamma,sigma,")
    # replay from the manifest into a second directory
    out2 = tmp_path / "b"
    assert main(["zero-t", "--config", str(out / "zero-t_manifest.json"), "--output", str(out2)]) == EXIT_OK
    assert _read(out2 / "zero-t_results.csv") == _read(results)


def test_output_directory_from_environment(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "env"))
    assert main(["expand-gamma", "--eps", "1e-3"]) == EXIT_OK
    assert (tmp_path / "env" / "expand-gamma_results.csv").exists()


def test_json_results(tmp_path, capsys):
    assert main(["expand-gamma", "--eps", "1e-3,-1e-3", "--format", "json", "--output", str(tmp_path)]) == 0
    rows = json.loads((tmp_path / "expand-gamma_results.json").read_text())
    assert [r["eps"] for r in rows] == [1e-3, -1e-3]
    assert abs(rows[0]["err_alpha_x"]) < 1e-7
    assert abs(rows[0]["err_value_order2"]) < 1e-7


def test_negative_range_flag_is_accepted(tmp_path, capsys):
    code = main(["finite-t", "--gammas", "1", "--beta-max", "0.5", "--k", "-0.8:-1:0.2",
                 "--output", str(tmp_path)])
    assert code == EXIT_OK
    lines = (tmp_path / "finite-t_results.csv").read_text().splitlines()
    assert len(lines) == 3


def test_worker_pool_matches_serial(tmp_path, capsys):
    args = ["finite-t", "--gammas", "0.8,1.2", "--beta-max", "0.5", "--k", "-1"]
    assert main(args + ["--output", str(tmp_path / "s")]) == 0
    assert main(args + ["--threads", "2", "--output", str(tmp_path / "p")]) == 0
    assert _read(tmp_path / "s" / "finite-t_results.csv") == _read(tmp_path / "p" / "finite-t_results.csv")


def test_lp_partial_and_total_failure(tmp_path, monkeypatch, capsys):
    real = ge.solve_matrix_game_lp

    def flaky(game, max_dim=ge.MAX_DIM):
        if game.seed == 1:
            raise ge.LPFailure("forced")
        return real(game, max_dim)

    monkeypatch.setattr(ge, "solve_matrix_game_lp", flaky)
    args = ["lp-ensemble", "--m", "10", "--gammas", "1", "--output", str(tmp_path)]
    assert main(args + ["--seeds", "3"]) == EXIT_PARTIAL
    assert "1 of 3" in capsys.readouterr().err
    assert main(args + ["--seeds", "1:1"]) == EXIT_FAILURE


def test_finite_t_solver_failure_is_reported(tmp_path, monkeypatch, capsys):
    def boom(params, cfg=None):
        raise RuntimeError("no bracket")

    monkeypatch.setattr(cli, "solve_finite_t", boom)
    assert main(["finite-t", "--output", str(tmp_path)]) == EXIT_FAILURE
    assert "failed: no bracket" in (tmp_path / "finite-t_results.csv").read_text()


def test_comparison_row_z():
    p = {"gamma": 1.0}
    assert ComparisonRow(p, 1.0, "v", 1.0, 1.5, 0.25, 5).z == pytest.approx(2.0)
    assert ComparisonRow(p, 1.0, "v", 1.0, 1.0, 0.0, 5).z == 0.0
    assert ComparisonRow(p, 1.0, "v", 1.0, 0.5, 0.0, 5).z == -math.inf
    assert math.isnan(ComparisonRow(p, 1.0, "v", 1.0, 0.5, math.nan, 1).z)
    d = ComparisonRow(p, 1.0, "v", 1.0, 1.5, 0.25, 5).as_dict()
    assert d["gamma"] == 1.0 and d["z"] == pytest.approx(2.0)


def test_emit_figure_data_contract(tmp_path):
    rows = [ComparisonRow({}, 0.5, "value", 0.1, 0.2, 0.3, 2),
            ComparisonRow({}, 1.0, "rho_x", 1 / 3, 0.25, 1e-17, 2)]
    a = emit_figure_data(rows, tmp_path / "a.csv")
    b = emit_figure_data(list(rows), tmp_path / "b.csv")
    assert _read(a) == _read(b)
    text = a.read_text()
    assert text.splitlines()[0] == "x,series,theory,empirical,stderr"
    assert text.splitlines()[2] == "1.0,rho_x,0.3333333333333333,0.25,1e-17"
    assert text.endswith("\n") and "\r" not in text
    with pytest.raises(ValueError):
        emit_figure_data([], tmp_path / "empty.csv")
    assert not (tmp_path / "empty.csv").exists()
    with pytest.raises(OSError, match="missing"):
        emit_figure_data(rows, tmp_path / "missing" / "x.csv")


def test_compare_zero_t_rows(tmp_path, capsys):
    assert main(["compare", "--mode", "zero-t", "--m", "30", "--gammas", "0.5,1", "--seeds", "4",
                 "--output", str(tmp_path)]) == EXIT_OK
    fig = (tmp_path / "compare_figure_data.csv").read_text().splitlines()
    series = {line.split(",")[1] for line in fig[1:]}
    assert series == {"value", "rho_x", "rho_y", "q_x", "q_y", "support_ratio"}
    assert len(fig) == 1 + 2 * 6
    for line in fig[1:]:
        x, name, theory, emp, se = line.split(",")
        if name != "support_ratio":
            assert float(se) > 0
    # figure data regenerates byte for byte
    before = _read(tmp_path / "compare_figure_data.csv")
    manifest = tmp_path / "compare_manifest.json"
    assert main(["compare", "--config", str(manifest)]) == EXIT_OK
    assert _read(tmp_path / "compare_figure_data.csv") == before


def test_compare_finite_t_single_seed_uses_ais_error(tmp_path, capsys):
    s = resolve_config("compare", {"mode": "finite-t", "m": "4", "gammas": "1", "beta_max": "0.5",
                                   "k": "-1", "seeds": "1", "chains": "60", "temps": "30",
                                   "output": str(tmp_path)}).settings
    rows, failed = cli.compare_finite_t(s)
    assert failed == 0 and len(rows) == 1
    r = rows[0]
    assert r.n == 1 and r.x == -1.0 and r.stderr > 0
    assert r.point["N"] == 4 and r.point["M"] == 4
    assert math.isfinite(r.theory) and math.isfinite(r.z)


def test_ais_command_rows(tmp_path, capsys):
    assert main(["ais", "--m", "4", "--gammas", "1", "--beta-max", "0.5", "--k", "-1", "--seeds", "0,1",
                 "--chains", "40", "--temps", "20", "--output", str(tmp_path)]) == EXIT_OK
    lines = (tmp_path / "ais_results.csv").read_text().splitlines()
    header = lines[0].split(",")
    assert header[:15] == list(cli.AIS_CSV_FIELDS)
    assert [line.split(",")[0] for line in lines[1:]] == ["0", "1"]


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "thermal_minmax", "--version"], capture_output=True,
                         text=True, check=False)
    assert res.returncode == 0 and __version__ in res.stdout
    res = subprocess.run([sys.executable, "-m", "thermal_minmax", "zero-t", "--gammas", "1",
                          "--output", str(tmp_path)], capture_output=True, text=True, check=False)
    assert res.returncode == 0, res.stderr
