"""Synthetic grid study, scoring metrics, and cross-validation."""

import json

import numpy as np
import pytest

from rasch_lmmse.data import ResponseSet
from rasch_lmmse.experiments import (
    CvConfig,
    SyntheticConfig,
    accuracy,
    auc,
    fit_response_set,
    run_cross_validation,
    run_synthetic,
    snr_to_sigma2,
)
from rasch_lmmse.rasch import RaschDesign, rasch_closed_form_mse


def simulate_response_set(U, Q, seed, drop=()):
    """Full U x Q response set from the generative model, minus `drop` pairs."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(U)
    d = rng.standard_normal(Q)
    users, items, responses = [], [], []
    for i in range(Q):
        for u in range(U):
            if (u, i) in drop:
                continue
            users.append(u)
            items.append(i)
            responses.append(1.0 if a[u] - d[i] + rng.standard_normal() >= 0 else -1.0)
    return ResponseSet(
        users=np.array(users),
        items=np.array(items),
        responses=np.array(responses),
        num_users=U,
        num_items=Q,
    )


def test_snr_mapping():
    assert snr_to_sigma2(0.0) == 0.5
    assert np.isclose(snr_to_sigma2(-10.0), 0.05)
    assert np.isclose(snr_to_sigma2(10.0), 5.0)


def test_synthetic_config_validation():
    ok = dict(users_grid=(2,), items_grid=(3,), snr_db_grid=(0.0,))
    SyntheticConfig(**ok)
    with pytest.raises(ValueError):
        SyntheticConfig(users_grid=(), items_grid=(3,), snr_db_grid=(0.0,))
    with pytest.raises(ValueError):
        SyntheticConfig(**ok, trials=0)
    with pytest.raises(ValueError):
        SyntheticConfig(**ok, estimators=("lmmse", "oracle"))
    with pytest.raises(ValueError):
        SyntheticConfig(users_grid=(0,), items_grid=(3,), snr_db_grid=(0.0,))
    # estimator list is normalized to a sorted, deduplicated tuple
    cfg = SyntheticConfig(**ok, estimators=("map", "lmmse", "map"))
    assert cfg.estimators == ("lmmse", "map")


def test_cv_config_validation():
    CvConfig(folds=2, prior_variance_grid=(1.0,))
    with pytest.raises(ValueError):
        CvConfig(folds=1)
    with pytest.raises(ValueError):
        CvConfig(prior_variance_grid=(1.0, -0.5))
    with pytest.raises(ValueError):
        CvConfig(prior_variance_grid=())
    with pytest.raises(ValueError, match="folds >= 3"):
        CvConfig(folds=2, prior_variance_grid=(0.5, 1.0))
    with pytest.raises(ValueError):  # bound, not a predictor
        CvConfig(estimators=("fisher_bound",))


def test_run_synthetic_deterministic_across_threads():
    config = SyntheticConfig(
        users_grid=(2, 3),
        items_grid=(2,),
        snr_db_grid=(0.0, 10.0),
        trials=20,
        estimators=("lmmse", "map"),
        seed=3,
    )
    r1 = run_synthetic(config, threads=1)
    r4 = run_synthetic(config, threads=4)
    assert r1.to_csv() == r4.to_csv()
    assert len(r1.cells) == 4


def test_empirical_matches_analytical():
    config = SyntheticConfig(
        users_grid=(4,), items_grid=(6,), snr_db_grid=(0.0,), trials=300
    )
    cell = run_synthetic(config).cells[0]
    assert cell["error"] is None
    mse_a, _ = rasch_closed_form_mse(RaschDesign(U=4, Q=6, sigma2_a=0.5, sigma2_d=0.5))
    assert cell["analytical_lmmse_mse"] == pytest.approx(mse_a)
    z = abs(cell["empirical_lmmse_mse"] - mse_a) / cell["empirical_lmmse_stderr"]
    assert z <= 3.0


def test_known_difficulty_mode():
    config = SyntheticConfig(
        users_grid=(8,),
        items_grid=(10,),
        snr_db_grid=(0.0,),
        trials=200,
        estimators=("lmmse", "fisher_bound"),
        known_difficulties=True,
    )
    cell = run_synthetic(config).cells[0]
    assert cell["error"] is None
    z = (
        abs(cell["empirical_lmmse_mse"] - cell["analytical_lmmse_mse"])
        / cell["empirical_lmmse_stderr"]
    )
    assert z <= 3.0
    assert 0.0 < cell["fisher_bound"] <= cell["analytical_lmmse_mse"] + 1e-12

    bad = SyntheticConfig(
        users_grid=(2,),
        items_grid=(2,),
        snr_db_grid=(0.0,),
        trials=2,
        estimators=("map",),
        known_difficulties=True,
    )
    cell = run_synthetic(bad).cells[0]
    assert "lmmse estimator only" in cell["error"]


def test_error_cells_recorded_not_raised():
    # the full design has a one-dimensional null space, so LS is singular;
    # the cell must record the failure and the run must continue
    config = SyntheticConfig(
        users_grid=(3,), items_grid=(2, 4), snr_db_grid=(0.0,),
        trials=2, estimators=("ls",),
    )
    result = run_synthetic(config)
    assert len(result.cells) == 2
    for cell in result.cells:
        assert cell["error"].startswith("LinAlgError")
    # serialization still works with the empirical columns absent
    csv_text = result.to_csv()
    assert csv_text.splitlines()[0].split(",")[-1] == "error"


def test_result_serialization():
    config = SyntheticConfig(
        users_grid=(2,), items_grid=(2,), snr_db_grid=(0.0,), trials=3,
        estimators=("lmmse", "fisher_bound"), include_difficulty_mse=True,
    )
    result = run_synthetic(config)
    header = result.to_csv().splitlines()[0].split(",")
    assert header == [
        "U", "Q", "snr_db", "sigma2_x",
        "analytical_lmmse_mse", "predicted_lmmse_mse",
        "empirical_lmmse_mse", "empirical_lmmse_stderr",
        "fisher_bound", "analytical_difficulty_mse", "error",
    ]
    # timing lives in the JSON payload only; CSV stays byte-reproducible
    assert "wall" not in result.to_csv()
    payload = json.loads(result.to_json())
    assert payload["schema_version"] == 1
    assert "wall_time_seconds" in payload["cells"][0]
    assert payload["config"]["estimators"] == ["fisher_bound", "lmmse"]


def test_accuracy_and_auc():
    assert accuracy([0.6, 0.4, 0.5], [1, -1, 1]) == 1.0
    assert accuracy([0.6, 0.4], [-1, -1]) == 0.5
    with pytest.raises(ValueError):
        accuracy([1.2], [1])
    with pytest.raises(ValueError):
        accuracy([], [])
    with pytest.raises(ValueError):
        accuracy([0.5, 0.5], [1])

    assert auc([0.9, 0.1, 0.8, 0.2], [1, -1, 1, -1]) == 1.0
    assert auc([0.1, 0.9], [1, -1]) == 0.0
    # ties get midranks
    assert auc([0.5, 0.5, 0.2, 0.8], [1, -1, -1, 1]) == 0.875
    with pytest.raises(ValueError, match="both classes"):
        auc([0.5, 0.6], [1, 1])
    with pytest.raises(ValueError):
        auc([0.5], [1, -1])


def test_cross_validation_runs_and_is_deterministic():
    data = simulate_response_set(10, 6, seed=11)
    config = CvConfig(folds=3, seed=5, prior_variance_grid=(1.0,),
                      estimators=("lmmse", "map"))
    r1 = run_cross_validation(data, config, threads=1)
    r3 = run_cross_validation(data, config, threads=3)
    assert r1.to_csv() == r3.to_csv()
    for rec in r1.per_estimator.values():
        assert len(rec["acc_per_fold"]) == 3
        assert 0.0 <= rec["acc_mean"] <= 1.0
        assert rec["selected_sigma2_x"] == [1.0, 1.0, 1.0]
    assert len(r1.fallback_counts) == 3
    table = r1.summary_table()
    assert "lmmse" in table and "map" in table


def test_cross_validation_tuning_and_fallback():
    # user 9 has a single response: the fold holding it cannot see the user
    drop = {(9, i) for i in range(1, 6)}
    data = simulate_response_set(10, 6, seed=2, drop=drop)
    config = CvConfig(folds=3, seed=1, prior_variance_grid=(0.25, 1.0))
    result = run_cross_validation(data, config)
    rec = result.per_estimator["lmmse"]
    assert all(s in (0.25, 1.0) for s in rec["selected_sigma2_x"])
    assert sum(result.fallback_counts) >= 1

    with pytest.raises(ValueError, match="more folds"):
        run_cross_validation(
            simulate_response_set(2, 1, seed=0), CvConfig(folds=5)
        )


def test_fit_response_set():
    data = simulate_response_set(8, 5, seed=4)
    out = fit_response_set(data, estimator="lmmse", sigma2_x=1.0)
    assert out["abilities"].shape == (8,)
    assert out["difficulties"].shape == (5,)
    assert out["predicted_mse"] is not None
    assert out["per_component_mse"].shape == (13,)
    assert out["wall_time_seconds"] >= 0.0

    out_map = fit_response_set(data, estimator="map")
    assert out_map["predicted_mse"] is None
    assert np.all(np.isfinite(out_map["abilities"]))

    with pytest.raises(ValueError, match="unknown estimator"):
        fit_response_set(data, estimator="ridge")
    with pytest.raises(np.linalg.LinAlgError):
        fit_response_set(data, estimator="ls")  # full design is rank deficient
