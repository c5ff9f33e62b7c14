"""CLI behavior: flags, exit codes, file outputs, determinism."""

import json

import numpy as np
import pytest

from rasch_lmmse.baselines import probit_information
from rasch_lmmse.cli import (
    ANALYZE_COLUMNS,
    _GIBBS_WARN_SECONDS,
    _projected_gibbs_seconds,
    main,
)
from rasch_lmmse.experiments import SyntheticConfig


def write_rasch_csv(path, U, Q, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(U)
    d = rng.standard_normal(Q)
    lines = ["user,item,response"]
    for i in range(Q):
        for u in range(U):
            y = 1 if a[u] - d[i] + rng.standard_normal() >= 0 else -1
            lines.append(f"u{u},q{i},{y}")
    path.write_text("\n".join(lines) + "\n")


def test_help_exits_zero():
    for argv in (["--help"], ["analyze", "--help"], ["simulate", "--help"],
                 ["fit", "--help"], ["crossval", "--help"]):
        with pytest.raises(SystemExit) as err:
            main(argv)
        assert err.value.code == 0


def test_missing_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as err:
        main([])
    assert err.value.code == 2


def test_analyze_basic(tmp_path, capsys):
    out = tmp_path / "analyze.csv"
    code = main([
        "analyze", "--users", "2,3", "--items", "4",
        "--snr-db", "-10,0,10", "--output", str(out),
    ])
    assert code == 0
    assert "6 rows" in capsys.readouterr().out
    lines = out.read_text().splitlines()
    assert lines[0].split(",") == ANALYZE_COLUMNS
    assert len(lines) == 7
    first = dict(zip(ANALYZE_COLUMNS, lines[1].split(",")))
    assert first["U"] == "2" and first["sigma2_x"] == "0.05"
    assert 0.0 < float(first["mse_ability_closed_form"]) < 0.05
    assert float(first["fisher_bound"]) <= float(first["mse_ability_closed_form"])


def test_analyze_sigma2_zero(tmp_path):
    out = tmp_path / "z.csv"
    assert main(["analyze", "--users", "2", "--items", "2",
                 "--sigma2", "0,1", "--output", str(out)]) == 0
    rows = out.read_text().splitlines()[1:]
    zero = dict(zip(ANALYZE_COLUMNS, rows[0].split(",")))
    assert zero["mse_ability_closed_form"] == "0.0"
    assert zero["snr_db"] == ""  # sigma2 was given directly
    assert float(dict(zip(ANALYZE_COLUMNS, rows[1].split(",")))
                 ["mse_ability_closed_form"]) > 0


def test_analyze_usage_errors(tmp_path, capsys):
    base = ["analyze", "--users", "2", "--items", "2", "--sigma2", "1",
            "--output", str(tmp_path / "x.csv")]
    assert main(base + ["--known-difficulties"]) == 2
    assert "exactly one of" in capsys.readouterr().err
    assert main(base + ["--known-difficulties", "--difficulty-sigma2", "1",
                        "--difficulty-file", "nope"]) == 2
    assert main(base + ["--difficulty-sigma2", "1"]) == 2
    with pytest.raises(SystemExit):  # --snr-db and --sigma2 are exclusive
        main(base + ["--snr-db", "0"])


def test_analyze_known_difficulty_file(tmp_path):
    d = np.array([0.3, -1.2, 0.8, 0.0])
    diff_file = tmp_path / "d.txt"
    diff_file.write_text("".join(f"{v}\n" for v in d))
    out = tmp_path / "kd.csv"
    code = main([
        "analyze", "--users", "5", "--items", "4", "--sigma2", "1",
        "--known-difficulties", "--difficulty-file", str(diff_file),
        "--output", str(out),
    ])
    assert code == 0
    row = dict(zip(ANALYZE_COLUMNS, out.read_text().splitlines()[1].split(",")))
    expected = 1.0 / (probit_information(-d).sum() + 1.0)
    assert float(row["fisher_bound"]) == pytest.approx(expected, rel=1e-12)
    assert row["mse_difficulty_closed_form"] == ""
    assert row["mse_asymptotic"] == ""

    # Q mismatch is a data error, not a usage error
    assert main([
        "analyze", "--users", "5", "--items", "3", "--sigma2", "1",
        "--known-difficulties", "--difficulty-file", str(diff_file),
        "--output", str(out),
    ]) == 1


def test_analyze_difficulty_file_parse_error(tmp_path, capsys):
    diff_file = tmp_path / "bad.txt"
    diff_file.write_text("0.5\nabc\n")
    code = main([
        "analyze", "--users", "2", "--items", "2", "--sigma2", "1",
        "--known-difficulties", "--difficulty-file", str(diff_file),
        "--output", str(tmp_path / "x.csv"),
    ])
    assert code == 1
    assert ":2:" in capsys.readouterr().err  # line number of the bad entry


def test_simulate_byte_identical_across_threads(tmp_path, capsys):
    argv = ["simulate", "--users", "2,3", "--items", "2", "--snr-db", "0",
            "--trials", "15", "--seed", "7"]
    p1, p2 = tmp_path / "t1.csv", tmp_path / "t2.csv"
    assert main(argv + ["--output", str(p1), "--threads", "1"]) == 0
    table = capsys.readouterr().out
    assert "lmmse mse" in table and "analytical" in table
    assert main(argv + ["--output", str(p2), "--threads", "4"]) == 0
    assert p1.read_bytes() == p2.read_bytes()


def test_simulate_missing_flags(capsys):
    assert main(["simulate", "--users", "2"]) == 2
    assert "missing required flags" in capsys.readouterr().err


def test_simulate_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "users_grid": [2], "items_grid": [2], "snr_db_grid": [0.0], "trials": 5,
    }))
    out = tmp_path / "sim.json"
    assert main(["simulate", "--config", str(cfg), "--format", "json",
                 "--output", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["schema_version"] == 1
    assert payload["config"]["trials"] == 5

    # explicit grid flags conflict with --config
    assert main(["simulate", "--config", str(cfg), "--users", "2",
                 "--output", str(out)]) == 2

    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["simulate", "--config", str(bad), "--output", str(out)]) == 1


def test_simulate_reports_failed_cells(tmp_path, capsys):
    assert main(["simulate", "--users", "2", "--items", "2", "--snr-db", "0",
                 "--trials", "2", "--estimators", "ls",
                 "--output", str(tmp_path / "ls.csv")]) == 0
    assert "failed: LinAlgError" in capsys.readouterr().out


def test_gibbs_runtime_projection():
    slow = SyntheticConfig(users_grid=(20,), items_grid=(20,),
                           snr_db_grid=(0.0,), trials=100,
                           estimators=("pm_gibbs",))
    assert _projected_gibbs_seconds(slow) > _GIBBS_WARN_SECONDS
    quick = SyntheticConfig(users_grid=(2,), items_grid=(2,),
                            snr_db_grid=(0.0,), trials=2,
                            estimators=("pm_gibbs",),
                            gibbs_burn_in=50, gibbs_samples=100)
    assert _projected_gibbs_seconds(quick) < _GIBBS_WARN_SECONDS


def test_fit_outputs_and_sign_convention(tmp_path):
    # every response correct: abilities must be >= 0 and difficulties <= 0
    data = tmp_path / "allpos.csv"
    lines = ["user,item,response"]
    for u in range(4):
        for i in range(3):
            lines.append(f"p{u},q{i},+1")
    data.write_text("\n".join(lines) + "\n")
    out = tmp_path / "fit.csv"
    assert main(["fit", "--data", str(data), "--output", str(out)]) == 0

    rows = [line.split(",") for line in out.read_text().splitlines()]
    assert rows[0] == ["kind", "id", "estimate"]
    abilities = {r[1]: float(r[2]) for r in rows[1:] if r[0] == "ability"}
    difficulties = {r[1]: float(r[2]) for r in rows[1:] if r[0] == "difficulty"}
    assert set(abilities) == {"p0", "p1", "p2", "p3"}
    assert set(difficulties) == {"q0", "q1", "q2"}
    assert all(v > 0 for v in abilities.values())
    assert all(v < 0 for v in difficulties.values())

    sidecar = json.loads((tmp_path / "fit.json").read_text())
    assert sidecar["schema_version"] == 1
    assert sidecar["estimator"] == "lmmse"
    assert sidecar["num_users"] == 4 and sidecar["num_items"] == 3
    assert sidecar["num_responses"] == 12
    assert sidecar["predicted_mse"] > 0
    assert sidecar["predicted_mse_ability_mean"] > 0
    assert sidecar["wall_time_seconds"] >= 0


def test_fit_movielens(tmp_path):
    ml = tmp_path / "u.data"
    rows = []
    rng = np.random.default_rng(0)
    for u in range(1, 6):
        for i in range(1, 5):
            rows.append(f"{u}\t{i}\t{rng.integers(1, 6)}\t0")
    ml.write_text("\n".join(rows) + "\n")
    out = tmp_path / "ml_fit.csv"
    assert main(["fit", "--movielens", str(ml), "--estimator", "map",
                 "--output", str(out)]) == 0
    assert out.exists()
    assert json.loads((tmp_path / "ml_fit.json").read_text())["predicted_mse"] is None


def test_fit_dataset_flag_errors(tmp_path, capsys):
    assert main(["fit", "--output", str(tmp_path / "x.csv")]) == 2
    assert "exactly one of" in capsys.readouterr().err
    assert main(["fit", "--data", "a.csv", "--movielens", "b.data",
                 "--output", str(tmp_path / "x.csv")]) == 2
    assert main(["fit", "--data", str(tmp_path / "missing.csv"),
                 "--output", str(tmp_path / "x.csv")]) == 1


def test_fit_zero_one_labels(tmp_path):
    data = tmp_path / "zo.csv"
    data.write_text("user,item,response\na,x,1\na,y,0\nb,x,0\nb,y,1\n")
    assert main(["fit", "--data", str(data), "--label-convention", "zero_one",
                 "--output", str(tmp_path / "f.csv")]) == 0


def test_crossval_outputs(tmp_path, capsys):
    data = tmp_path / "cv.csv"
    write_rasch_csv(data, U=10, Q=6, seed=3)
    out = tmp_path / "cv_out.csv"
    code = main(["crossval", "--data", str(data), "--folds", "3",
                 "--sigma2-grid", "1.0", "--output", str(out)])
    assert code == 0
    stdout = capsys.readouterr().out
    assert "estimator" in stdout and "lmmse" in stdout
    lines = out.read_text().splitlines()
    assert lines[0] == "estimator,fold,acc,auc,selected_sigma2_x,fallback_count"
    assert len(lines) == 4  # one row per fold

    json_out = tmp_path / "cv.json"
    assert main(["crossval", "--data", str(data), "--folds", "3",
                 "--sigma2-grid", "1.0", "--format", "json",
                 "--output", str(json_out)]) == 0
    payload = json.loads(json_out.read_text())
    assert payload["schema_version"] == 1
    assert "lmmse" in payload["per_estimator"]


def test_output_dir_env(tmp_path, monkeypatch):
    target = tmp_path / "outputs"
    target.mkdir()
    monkeypatch.setenv("RASCH_LMMSE_OUTPUT_DIR", str(target))
    assert main(["analyze", "--users", "2", "--items", "2",
                 "--sigma2", "1", "--output", "rel.csv"]) == 0
    assert (target / "rel.csv").exists()


def test_output_directory_handling(tmp_path, capsys):
    # missing parent directories are created
    nested = tmp_path / "a" / "b" / "x.csv"
    assert main(["analyze", "--users", "2", "--items", "2", "--sigma2", "1",
                 "--output", str(nested)]) == 0
    assert nested.exists()
    capsys.readouterr()

    # but an unwritable path (parent is a file) is a runtime error
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    code = main(["analyze", "--users", "2", "--items", "2", "--sigma2", "1",
                 "--output", str(blocker / "x.csv")])
    assert code == 1
    assert "error:" in capsys.readouterr().err
