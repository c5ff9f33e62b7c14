"""Experiment harnesses: synthetic MSE studies and k-fold cross-validation.

The synthetic study sweeps (users, items, SNR) cells, draws Rasch instances,
runs the selected estimators, and reports empirical ability MSEs next to
the analytical values.  Cross-validation holds out response folds, tunes
the prior variance on a validation fold, and scores held-out predictions
with ACC and AUC.

All randomness derives from per-(cell, trial) or per-fold seed sequences,
so results are independent of thread scheduling.
"""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product

import numpy as np
import scipy.stats

from .baselines import (
    GibbsConfig,
    MapConfig,
    fisher_rasch_ability_bound,
    map_fit,
    pm_gibbs,
    probit_information,
)
from .data import ResponseSet
from .linear_probit import lmmse_fit_sparse, ls_fit
from .rasch import (
    KnownDifficultyModel,
    RaschDesign,
    known_difficulty_fit,
    rasch_closed_form_mse,
    rasch_design_matrix,
    rasch_fast_lmmse_fit,
)
from .specfun import norm_cdf

SCHEMA_VERSION = 1

SYNTHETIC_ESTIMATORS = ("lmmse", "pm_gibbs", "map", "fisher_bound", "ls")
CV_ESTIMATORS = ("lmmse", "pm_gibbs", "map", "logit_map", "ls")

# Column name stem per estimator in result records.
_STEM = {"lmmse": "lmmse", "pm_gibbs": "pm", "map": "map", "ls": "ls"}


def snr_to_sigma2(snr_db) -> float:
    """Map an SNR in dB to the prior variance sigma2_x.

    Convention: the per-observation signal power Var(a_u - d_i) = 2 sigma2_x
    against unit noise power, so sigma2_x = 10^(snr_db/10) / 2.
    """
    return 10.0 ** (float(snr_db) / 10.0) / 2.0


def _normalize_estimators(estimators, allowed):
    est = tuple(sorted(set(estimators)))
    for name in est:
        if name not in allowed:
            raise ValueError(
                f"unknown estimator {name!r}; allowed: {', '.join(allowed)}"
            )
    if not est:
        raise ValueError("at least one estimator required")
    return est


@dataclass(frozen=True)
class SyntheticConfig:
    """Grid configuration for the synthetic MSE study."""

    users_grid: tuple
    items_grid: tuple
    snr_db_grid: tuple
    trials: int = 1000
    estimators: tuple = ("lmmse",)
    seed: int = 0
    known_difficulties: bool = False
    gibbs_burn_in: int = 10_000
    gibbs_samples: int = 20_000
    include_difficulty_mse: bool = False

    def __post_init__(self):
        object.__setattr__(self, "users_grid", tuple(int(u) for u in self.users_grid))
        object.__setattr__(self, "items_grid", tuple(int(q) for q in self.items_grid))
        object.__setattr__(
            self, "snr_db_grid", tuple(float(s) for s in self.snr_db_grid)
        )
        if not (self.users_grid and self.items_grid and self.snr_db_grid):
            raise ValueError("grids must be nonempty")
        if any(u < 1 for u in self.users_grid) or any(q < 1 for q in self.items_grid):
            raise ValueError("users and items must be positive")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        object.__setattr__(
            self,
            "estimators",
            _normalize_estimators(self.estimators, SYNTHETIC_ESTIMATORS),
        )

    def echo(self):
        return {
            "users_grid": list(self.users_grid),
            "items_grid": list(self.items_grid),
            "snr_db_grid": list(self.snr_db_grid),
            "trials": self.trials,
            "estimators": list(self.estimators),
            "seed": self.seed,
            "known_difficulties": self.known_difficulties,
            "gibbs_burn_in": self.gibbs_burn_in,
            "gibbs_samples": self.gibbs_samples,
            "include_difficulty_mse": self.include_difficulty_mse,
        }


@dataclass
class ExperimentResult:
    """Per-cell records of a synthetic run, serializable to CSV and JSON."""

    config: dict
    cells: list
    schema_version: int = SCHEMA_VERSION

    def csv_columns(self):
        cols = [
            "U",
            "Q",
            "snr_db",
            "sigma2_x",
            "analytical_lmmse_mse",
            "predicted_lmmse_mse",
        ]
        for name in self.config["estimators"]:
            if name == "fisher_bound":
                continue
            stem = _STEM[name]
            cols += [f"empirical_{stem}_mse", f"empirical_{stem}_stderr"]
        if "fisher_bound" in self.config["estimators"]:
            cols.append("fisher_bound")
        if self.config.get("include_difficulty_mse"):
            cols.append("analytical_difficulty_mse")
        cols.append("error")
        return cols

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        cols = self.csv_columns()
        writer.writerow(cols)
        for cell in self.cells:
            writer.writerow([_format_cell_value(cell.get(c)) for c in cols])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema_version": self.schema_version,
                "config": self.config,
                "cells": self.cells,
            },
            indent=2,
            sort_keys=True,
        )


def _format_cell_value(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _trial_rng(seed, cell_idx, trial_idx):
    return np.random.default_rng(np.random.SeedSequence((seed, cell_idx, trial_idx)))


def _gibbs_seed(seed, cell_idx, trial_idx):
    ss = np.random.SeedSequence((seed, cell_idx, trial_idx, 1))
    return int(ss.generate_state(1, dtype=np.uint64)[0])




def _run_standard_cell(config, cell_idx, U, Q, snr_db):
    sigma2 = snr_to_sigma2(snr_db)
    design = RaschDesign(U=U, Q=Q, sigma2_a=sigma2, sigma2_d=sigma2)
    mse_a, mse_d = rasch_closed_form_mse(design)

    needs_dense = {"map", "ls", "pm_gibbs"} & set(config.estimators)
    model = rasch_design_matrix(design) if needs_dense else None

    point_estimators = [e for e in config.estimators if e != "fisher_bound"]
    errs = {e: np.empty(config.trials) for e in point_estimators}
    times = {e: 0.0 for e in point_estimators}

    for trial in range(config.trials):
        rng = _trial_rng(config.seed, cell_idx, trial)
        a = rng.normal(scale=np.sqrt(sigma2), size=U)
        d = rng.normal(scale=np.sqrt(sigma2), size=Q)
        w = rng.standard_normal((U, Q))
        Y = np.where(a[:, None] - d[None, :] + w >= 0, 1.0, -1.0)
        y_flat = Y.flatten(order="F")

        for name in point_estimators:
            t0 = time.perf_counter()
            if name == "lmmse":
                est = rasch_fast_lmmse_fit(design, Y).estimate
            elif name == "map":
                est = map_fit(model, y_flat)
            elif name == "ls":
                est = ls_fit(model, y_flat).estimate
            elif name == "pm_gibbs":
                est = pm_gibbs(
                    model,
                    y_flat,
                    GibbsConfig(
                        burn_in=config.gibbs_burn_in,
                        samples=config.gibbs_samples,
                        seed=_gibbs_seed(config.seed, cell_idx, trial),
                    ),
                )
            times[name] += time.perf_counter() - t0
            errs[name][trial] = float(np.mean((est[:U] - a) ** 2))

    cell = {
        "U": U,
        "Q": Q,
        "snr_db": snr_db,
        "sigma2_x": sigma2,
        "analytical_lmmse_mse": mse_a,
        "predicted_lmmse_mse": mse_a,
        "error": None,
    }
    if config.include_difficulty_mse:
        cell["analytical_difficulty_mse"] = mse_d
    for name in point_estimators:
        stem = _STEM[name]
        cell[f"empirical_{stem}_mse"] = float(np.mean(errs[name]))
        cell[f"empirical_{stem}_stderr"] = (
            float(np.std(errs[name], ddof=1) / np.sqrt(config.trials))
            if config.trials > 1
            else None
        )
    if "fisher_bound" in config.estimators:
        t0 = time.perf_counter()
        cell["fisher_bound"] = fisher_rasch_ability_bound(U, Q, sigma2)
        times["fisher_bound"] = time.perf_counter() - t0
    cell["wall_time_seconds"] = {k: round(v, 6) for k, v in times.items()}
    return cell


def _run_known_difficulty_cell(config, cell_idx, U, Q, snr_db):
    """Known-difficulty variant: d ~ N(0,1) treated as known, abilities estimated."""
    sigma2 = snr_to_sigma2(snr_db)
    point_estimators = [e for e in config.estimators if e != "fisher_bound"]
    if set(point_estimators) - {"lmmse"}:
        raise ValueError(
            "known_difficulties mode supports the lmmse estimator only"
        )
    errs = np.empty(config.trials)
    predicted = np.empty(config.trials)
    fisher = np.empty(config.trials)
    t_lmmse = 0.0
    for trial in range(config.trials):
        rng = _trial_rng(config.seed, cell_idx, trial)
        d = rng.standard_normal(Q)
        a = rng.normal(scale=np.sqrt(sigma2), size=U)
        w = rng.standard_normal((U, Q))
        Y = np.where(a[:, None] - d[None, :] + w >= 0, 1.0, -1.0)
        km = KnownDifficultyModel(d=d, x_bar=0.0, sigma2_x=sigma2)
        t0 = time.perf_counter()
        sq = np.empty(U)
        for u in range(U):
            a_hat, pmse = known_difficulty_fit(km, Y[u])
            sq[u] = (a_hat - a[u]) ** 2
        t_lmmse += time.perf_counter() - t0
        errs[trial] = float(np.mean(sq))
        predicted[trial] = pmse
        if "fisher_bound" in config.estimators:
            lam = probit_information(-d)
            fisher[trial] = 1.0 / (lam.sum() + 1.0 / sigma2)
    cell = {
        "U": U,
        "Q": Q,
        "snr_db": snr_db,
        "sigma2_x": sigma2,
        "analytical_lmmse_mse": float(np.mean(predicted)),
        "predicted_lmmse_mse": float(np.mean(predicted)),
        "empirical_lmmse_mse": float(np.mean(errs)),
        "empirical_lmmse_stderr": (
            float(np.std(errs, ddof=1) / np.sqrt(config.trials))
            if config.trials > 1
            else None
        ),
        "error": None,
        "wall_time_seconds": {"lmmse": round(t_lmmse, 6)},
    }
    if "fisher_bound" in config.estimators:
        cell["fisher_bound"] = float(np.mean(fisher))
    return cell




def run_synthetic(config: SyntheticConfig, threads: int | None = None) -> ExperimentResult:
    """Run the synthetic grid study.

    Each (U, Q, snr) cell draws `trials` Rasch instances and accumulates
    per-trial mean squared errors on the ability components.  An estimator
    failure aborts its cell (recorded in the cell's `error` field) without
    stopping the run.  Deterministic for a given config, regardless of
    thread count.
    """
    cells_spec = list(
        product(config.users_grid, config.items_grid, config.snr_db_grid)
    )

    def run_cell(args):
        cell_idx, (U, Q, snr_db) = args
        try:
            if config.known_difficulties:
                return _run_known_difficulty_cell(config, cell_idx, U, Q, snr_db)
            return _run_standard_cell(config, cell_idx, U, Q, snr_db)
        except Exception as err:  # recorded, not raised: other cells continue
            return {
                "U": U,
                "Q": Q,
                "snr_db": snr_db,
                "sigma2_x": snr_to_sigma2(snr_db),
                "error": f"{type(err).__name__}: {err}",
            }

    indexed = list(enumerate(cells_spec))
    if threads is not None and threads > 1 and len(indexed) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cells = list(pool.map(run_cell, indexed))
    else:
        cells = [run_cell(item) for item in indexed]
    return ExperimentResult(config=config.echo(), cells=cells)


def accuracy(predictions, labels) -> float:
    """Fraction of correct sign predictions at the p >= 0.5 threshold."""
    predictions = np.asarray(predictions, dtype=np.float64).ravel()
    labels = np.asarray(labels, dtype=np.float64).ravel()
    if len(predictions) == 0:
        raise ValueError("empty input")
    if len(predictions) != len(labels):
        raise ValueError("predictions and labels must have equal length")
    if np.any((predictions < 0) | (predictions > 1)):
        raise ValueError("predictions must be probabilities in [0, 1]")
    predicted_sign = np.where(predictions >= 0.5, 1.0, -1.0)
    return float(np.mean(predicted_sign == labels))


def auc(predictions, labels) -> float:
    """Area under the ROC curve via the rank (Mann-Whitney) statistic."""
    predictions = np.asarray(predictions, dtype=np.float64).ravel()
    labels = np.asarray(labels, dtype=np.float64).ravel()
    if len(predictions) != len(labels):
        raise ValueError("predictions and labels must have equal length")
    pos = labels > 0
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC requires both classes present")
    ranks = scipy.stats.rankdata(predictions)
    return float(
        (ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
    )


@dataclass(frozen=True)
class CvConfig:
    """Configuration for k-fold cross-validation over response pairs."""

    folds: int = 10
    seed: int = 0
    prior_variance_grid: tuple = (0.1, 0.25, 0.5, 1.0, 2.0)
    estimators: tuple = ("lmmse",)
    gibbs_burn_in: int = 10_000
    gibbs_samples: int = 20_000

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("folds must be at least 2")
        grid = tuple(float(v) for v in self.prior_variance_grid)
        if not grid or any(v <= 0 for v in grid):
            raise ValueError("prior_variance_grid must be nonempty and positive")
        object.__setattr__(self, "prior_variance_grid", grid)
        object.__setattr__(
            self, "estimators", _normalize_estimators(self.estimators, CV_ESTIMATORS)
        )
        if len(grid) > 1 and self.folds < 3:
            raise ValueError(
                "tuning over a variance grid needs folds >= 3 (one validation "
                "fold inside the training split)"
            )

    def echo(self):
        return {
            "folds": self.folds,
            "seed": self.seed,
            "prior_variance_grid": list(self.prior_variance_grid),
            "estimators": list(self.estimators),
            "gibbs_burn_in": self.gibbs_burn_in,
            "gibbs_samples": self.gibbs_samples,
        }


@dataclass
class CvResult:
    """Cross-validation scores per estimator, plus fold-level diagnostics."""

    config: dict
    per_estimator: dict
    fallback_counts: list
    schema_version: int = SCHEMA_VERSION

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema_version": self.schema_version,
                "config": self.config,
                "per_estimator": self.per_estimator,
                "fallback_counts": self.fallback_counts,
            },
            indent=2,
            sort_keys=True,
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            [
                "estimator",
                "fold",
                "acc",
                "auc",
                "selected_sigma2_x",
                "fallback_count",
            ]
        )
        for name, rec in self.per_estimator.items():
            for f in range(len(rec["acc_per_fold"])):
                writer.writerow(
                    [
                        name,
                        f,
                        _format_cell_value(rec["acc_per_fold"][f]),
                        _format_cell_value(rec["auc_per_fold"][f]),
                        _format_cell_value(rec["selected_sigma2_x"][f]),
                        self.fallback_counts[f],
                    ]
                )
        return buf.getvalue()

    def summary_table(self) -> str:
        lines = [f"{'estimator':<12} {'ACC':>16} {'AUC':>16}"]
        for name, rec in self.per_estimator.items():
            acc = f"{rec['acc_mean']:.4f} ± {rec['acc_std']:.4f}"
            if rec["auc_mean"] is None:
                roc = "undefined"
            elif rec["auc_std"] is None:
                roc = f"{rec['auc_mean']:.4f}"
            else:
                roc = f"{rec['auc_mean']:.4f} ± {rec['auc_std']:.4f}"
            lines.append(f"{name:<12} {acc:>16} {roc:>16}")
        return "\n".join(lines)


def _subset(data, idx):
    return (
        data.users[idx],
        data.items[idx],
        data.responses[idx],
    )


def _fit_estimator(name, design, users, items, responses, gibbs_config):
    """Fit one estimator on observed triplets; returns (abilities, difficulties)."""
    subset = ResponseSet(
        users=users,
        items=items,
        responses=responses,
        num_users=design.U,
        num_items=design.Q,
    )
    model = rasch_design_matrix(design, observed=subset, sparse=True)
    y = responses
    if name == "lmmse":
        est = lmmse_fit_sparse(model, y).estimate
    elif name == "map":
        est = map_fit(model, y, MapConfig(link="probit"))
    elif name == "logit_map":
        est = map_fit(model, y, MapConfig(link="logit"))
    elif name == "pm_gibbs":
        est = pm_gibbs(model, y, gibbs_config)
    elif name == "ls":
        dense_model = rasch_design_matrix(design, observed=subset, sparse=False)
        est = ls_fit(dense_model, y).estimate
    else:
        raise ValueError(f"unknown estimator {name!r}")
    U = design.U
    abilities = est[:U].copy()
    difficulties = -est[U:]
    # Parameters never observed in training stay at the prior mean exactly.
    seen_u = np.zeros(U, dtype=bool)
    seen_u[users] = True
    seen_i = np.zeros(design.Q, dtype=bool)
    seen_i[items] = True
    abilities[~seen_u] = 0.0
    difficulties[~seen_i] = 0.0
    return abilities, difficulties


def _predict(abilities, difficulties, users, items):
    return norm_cdf(abilities[users] - difficulties[items])


# Above this parameter count the N conjugate-gradient solves for the
# predicted MSE get expensive; callers can still force it.
_FIT_MSE_LIMIT = 600


def fit_response_set(
    data: ResponseSet,
    estimator: str = "lmmse",
    sigma2_x: float = 1.0,
    gibbs_config: GibbsConfig | None = None,
    compute_mse: bool | None = None,
) -> dict:
    """Fit abilities and difficulties to an observed ResponseSet.

    Returns a dict with `abilities`, `difficulties`, `predicted_mse`
    (total; None when unavailable for the estimator or too costly),
    `per_component_mse` when available, and `wall_time_seconds`.
    """
    if estimator not in CV_ESTIMATORS:
        raise ValueError(
            f"unknown estimator {estimator!r}; allowed: {', '.join(CV_ESTIMATORS)}"
        )
    if len(data) == 0:
        raise ValueError("data is empty")
    design = RaschDesign(
        U=data.num_users, Q=data.num_items, sigma2_a=sigma2_x, sigma2_d=sigma2_x
    )
    model = rasch_design_matrix(design, observed=data, sparse=True)
    y = data.responses
    predicted_mse = None
    per_component = None
    t0 = time.perf_counter()
    if estimator == "lmmse":
        if compute_mse is None:
            compute_mse = design.U + design.Q <= _FIT_MSE_LIMIT
        sol = lmmse_fit_sparse(model, y, compute_mse=compute_mse)
        est = sol.estimate
        predicted_mse = sol.predicted_mse
        per_component = sol.per_component_mse
    elif estimator == "map":
        est = map_fit(model, y, MapConfig(link="probit"))
    elif estimator == "logit_map":
        est = map_fit(model, y, MapConfig(link="logit"))
    elif estimator == "pm_gibbs":
        est = pm_gibbs(model, y, gibbs_config or GibbsConfig())
    else:  # ls
        dense_model = rasch_design_matrix(design, observed=data, sparse=False)
        sol = ls_fit(dense_model, y)
        est = sol.estimate
        predicted_mse = sol.predicted_mse
        per_component = sol.per_component_mse
    wall = time.perf_counter() - t0
    abilities, difficulties = est[: design.U].copy(), -est[design.U :]
    return {
        "abilities": abilities,
        "difficulties": difficulties,
        "predicted_mse": predicted_mse,
        "per_component_mse": per_component,
        "wall_time_seconds": wall,
    }


def _score_auc_or_acc(pred, labels):
    """AUC when defined, ACC otherwise (single-class validation folds)."""
    try:
        return auc(pred, labels)
    except ValueError:
        return accuracy(pred, labels)


def run_cross_validation(
    data: ResponseSet, config: CvConfig, threads: int | None = None
) -> CvResult:
    """K-fold cross-validation of response prediction on held-out pairs.

    For each fold: the fold is the test set; the next fold (cyclically)
    inside the training split is the validation set used to select
    sigma2_x per estimator (by AUC); the estimator is refit on the full
    training split at the selected variance and scored on the test fold
    with ACC and AUC.  Users/items absent from training fall back to the
    prior mean 0 (counted per fold).
    """
    n = len(data)
    if n == 0:
        raise ValueError("data is empty")
    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(n)
    fold_idx = np.array_split(perm, config.folds)
    if any(len(f) == 0 for f in fold_idx):
        raise ValueError("more folds than observations")

    def run_fold(f):
        test = fold_idx[f]
        val_f = (f + 1) % config.folds
        train_folds = [k for k in range(config.folds) if k != f]
        tune_folds = [k for k in train_folds if k != val_f]
        train_all = np.concatenate([fold_idx[k] for k in train_folds])
        grid = config.prior_variance_grid
        if len(grid) > 1:
            tune_train = np.concatenate([fold_idx[k] for k in tune_folds])
            val = fold_idx[val_f]
        else:
            tune_train = train_all
            val = None

        test_u, test_i, test_y = _subset(data, test)
        seen_u = set(data.users[train_all].tolist())
        seen_i = set(data.items[train_all].tolist())
        fallback = int(
            sum((u not in seen_u) or (i not in seen_i) for u, i in zip(test_u, test_i))
        )

        fold_out = {}
        for name in config.estimators:
            gibbs_config = GibbsConfig(
                burn_in=config.gibbs_burn_in,
                samples=config.gibbs_samples,
                seed=int(
                    np.random.SeedSequence((config.seed, f, 2)).generate_state(
                        1, dtype=np.uint64
                    )[0]
                ),
            )
            if val is not None:
                scores = []
                val_u, val_i, val_y = _subset(data, val)
                for sigma2 in grid:
                    design = RaschDesign(
                        U=data.num_users,
                        Q=data.num_items,
                        sigma2_a=sigma2,
                        sigma2_d=sigma2,
                    )
                    ab, diff = _fit_estimator(
                        name, design, *_subset(data, tune_train), gibbs_config
                    )
                    pred = _predict(ab, diff, val_u, val_i)
                    scores.append(_score_auc_or_acc(pred, val_y))
                selected = grid[int(np.argmax(scores))]
            else:
                selected = grid[0]

            design = RaschDesign(
                U=data.num_users,
                Q=data.num_items,
                sigma2_a=selected,
                sigma2_d=selected,
            )
            t0 = time.perf_counter()
            ab, diff = _fit_estimator(
                name, design, *_subset(data, train_all), gibbs_config
            )
            pred = _predict(ab, diff, test_u, test_i)
            runtime = time.perf_counter() - t0
            acc_val = accuracy(pred, test_y)
            try:
                auc_val = auc(pred, test_y)
            except ValueError:
                auc_val = None
            fold_out[name] = {
                "acc": acc_val,
                "auc": auc_val,
                "selected_sigma2_x": selected,
                "runtime_seconds": runtime,
            }
        return fold_out, fallback

    if threads is not None and threads > 1 and config.folds > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_fold, range(config.folds)))
    else:
        results = [run_fold(f) for f in range(config.folds)]

    fallback_counts = [r[1] for r in results]
    per_estimator = {}
    for name in config.estimators:
        accs = [r[0][name]["acc"] for r in results]
        aucs = [r[0][name]["auc"] for r in results]
        defined = [v for v in aucs if v is not None]
        per_estimator[name] = {
            "acc_mean": float(np.mean(accs)),
            "acc_std": float(np.std(accs, ddof=1)),
            "auc_mean": float(np.mean(defined)) if defined else None,
            "auc_std": (
                float(np.std(defined, ddof=1)) if len(defined) > 1 else None
            ),
            "acc_per_fold": accs,
            "auc_per_fold": aucs,
            "selected_sigma2_x": [r[0][name]["selected_sigma2_x"] for r in results],
            "runtime_seconds": [r[0][name]["runtime_seconds"] for r in results],
            "auc_undefined_folds": [
                f for f, v in enumerate(aucs) if v is None
            ],
        }
    return CvResult(
        config=config.echo(),
        per_estimator=per_estimator,
        fallback_counts=fallback_counts,
    )
