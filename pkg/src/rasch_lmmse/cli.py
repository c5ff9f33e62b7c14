"""Command-line interface: analyze, simulate, fit, and crossval subcommands.

Exit codes: 0 on success, 1 on runtime errors (bad data, failed fits),
2 on usage errors.  File outputs are written atomically (temp file in the
target directory, then rename).  Relative output paths resolve against
RASCH_LMMSE_OUTPUT_DIR when set, else the working directory.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import re
import sys
import tempfile

import numpy as np

from .baselines import (
    GibbsConfig,
    fisher_rasch_ability_bound,
    probit_information,
)
from .data import binarize_ratings, load_movielens, load_triplets
from .experiments import (
    CV_ESTIMATORS,
    SCHEMA_VERSION,
    SYNTHETIC_ESTIMATORS,
    CvConfig,
    SyntheticConfig,
    fit_response_set,
    run_cross_validation,
    run_synthetic,
    snr_to_sigma2,
)
from .rasch import (
    KnownDifficultyModel,
    RaschDesign,
    known_difficulty_predicted_mse,
    rasch_asymptotic_mse,
    rasch_closed_form_mse,
)

ANALYZE_COLUMNS = [
    "U",
    "Q",
    "snr_db",
    "sigma2_x",
    "mse_ability_closed_form",
    "mse_difficulty_closed_form",
    "mse_asymptotic",
    "fisher_bound",
]

# Calibrated per-iteration Gibbs cost model for the runtime warning:
# seconds/iteration = base + slope_m * M + slope_n2 * N^2.
_GIBBS_ITER_BASE = 6.5e-5
_GIBBS_ITER_PER_OBS = 8e-8
_GIBBS_ITER_PER_N2 = 2e-9
_GIBBS_WARN_SECONDS = 60.0


class UsageError(Exception):
    """Command-line usage problem: reported on stderr, exit code 2."""


def _int_list(text):
    try:
        return tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text):
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _estimator_list(text):
    return tuple(tok.strip() for tok in text.split(",") if tok.strip())


def _resolve_output(path):
    if os.path.isabs(path):
        return path
    base = os.environ.get("RASCH_LMMSE_OUTPUT_DIR", ".")
    return os.path.join(base, path)


def _atomic_write(path, text):
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _load_difficulties(path):
    values = []
    with open(path) as handle:
        for line_no, line in enumerate(handle, start=1):
            token = line.strip()
            if not token:
                continue
            try:
                values.append(float(token))
            except ValueError:
                raise ValueError(
                    f"{path}:{line_no}: expected one difficulty per line, got {token!r}"
                )
    if not values:
        raise ValueError(f"{path}: no difficulties found")
    return np.array(values)


def _cmd_analyze(args):
    if args.known_difficulties:
        if (args.difficulty_file is None) == (args.difficulty_sigma2 is None):
            raise UsageError(
                "--known-difficulties requires exactly one of "
                "--difficulty-file / --difficulty-sigma2"
            )
    elif args.difficulty_file is not None or args.difficulty_sigma2 is not None:
        raise UsageError(
            "--difficulty-file / --difficulty-sigma2 require --known-difficulties"
        )
    use_snr = args.snr_db is not None
    levels = args.snr_db if use_snr else args.sigma2
    file_d = (
        _load_difficulties(args.difficulty_file)
        if args.difficulty_file is not None
        else None
    )

    rows = []
    row_idx = 0
    for U in args.users:
        for Q in args.items:
            if U < 1 or Q < 1:
                raise ValueError("users and items must be positive")
            for level in levels:
                sigma2 = snr_to_sigma2(level) if use_snr else float(level)
                if sigma2 < 0:
                    raise ValueError("sigma2 must be nonnegative")
                snr_field = float(level) if use_snr else None
                row = {"U": U, "Q": Q, "snr_db": snr_field, "sigma2_x": sigma2}
                if sigma2 == 0.0:
                    # Degenerate prior: parameters are known to be zero.
                    row.update(
                        mse_ability_closed_form=0.0,
                        mse_difficulty_closed_form=None if args.known_difficulties else 0.0,
                        mse_asymptotic=None if args.known_difficulties else 0.0,
                        fisher_bound=0.0,
                    )
                elif args.known_difficulties:
                    if file_d is not None:
                        if file_d.size != Q:
                            raise ValueError(
                                f"difficulty file has {file_d.size} entries, "
                                f"but Q={Q} was requested"
                            )
                        d = file_d
                    else:
                        rng = np.random.default_rng(
                            np.random.SeedSequence((args.seed, row_idx))
                        )
                        d = rng.normal(
                            scale=np.sqrt(args.difficulty_sigma2), size=Q
                        )
                    km = KnownDifficultyModel(d=d, x_bar=0.0, sigma2_x=sigma2)
                    row.update(
                        mse_ability_closed_form=known_difficulty_predicted_mse(km),
                        mse_difficulty_closed_form=None,
                        mse_asymptotic=None,
                        fisher_bound=float(
                            1.0 / (probit_information(-d).sum() + 1.0 / sigma2)
                        ),
                    )
                else:
                    design = RaschDesign(
                        U=U, Q=Q, sigma2_a=sigma2, sigma2_d=sigma2
                    )
                    mse_a, mse_d = rasch_closed_form_mse(design)
                    row.update(
                        mse_ability_closed_form=mse_a,
                        mse_difficulty_closed_form=mse_d,
                        mse_asymptotic=rasch_asymptotic_mse(sigma2),
                        fisher_bound=fisher_rasch_ability_bound(U, Q, sigma2),
                    )
                rows.append(row)
                row_idx += 1

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ANALYZE_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in ANALYZE_COLUMNS])
    path = _resolve_output(args.output)
    _atomic_write(path, buf.getvalue())
    print(f"wrote {path} ({len(rows)} rows)")
    return 0


def _projected_gibbs_seconds(cfg):
    iters = cfg.gibbs_burn_in + cfg.gibbs_samples
    total = 0.0
    for U in cfg.users_grid:
        for Q in cfg.items_grid:
            M, N = U * Q, U + Q
            per_iter = (
                _GIBBS_ITER_BASE
                + _GIBBS_ITER_PER_OBS * M
                + _GIBBS_ITER_PER_N2 * N * N
            )
            total += len(cfg.snr_db_grid) * cfg.trials * iters * per_iter
    return total


def _load_config_file(path, flag_values, flag_names):
    if any(v is not None for v in flag_values):
        raise UsageError(
            f"--config is mutually exclusive with {', '.join(flag_names)}"
        )
    with open(path) as handle:
        try:
            payload = json.load(handle)
        except json.JSONDecodeError as err:
            raise ValueError(f"{path}: invalid JSON ({err})")
    if not isinstance(payload, dict):
        raise ValueError(f"{path}: expected a JSON object")
    return payload


def _simulate_table(result):
    lines = []
    estimators = result.config["estimators"]
    header = f"{'U':>6} {'Q':>6} {'snr_db':>8} {'sigma2':>9} {'analytical':>12}"
    for name in estimators:
        if name == "fisher_bound":
            continue
        stem = {"lmmse": "lmmse", "pm_gibbs": "pm", "map": "map", "ls": "ls"}[name]
        header += f" {stem + ' mse':>12} {stem + ' se':>10}"
    if "fisher_bound" in estimators:
        header += f" {'fisher':>10}"
    lines.append(header)
    for cell in result.cells:
        if cell.get("error"):
            lines.append(
                f"{cell['U']:>6} {cell['Q']:>6} {cell['snr_db']:>8g} "
                f"{cell['sigma2_x']:>9.4g} failed: {cell['error']}"
            )
            continue
        line = (
            f"{cell['U']:>6} {cell['Q']:>6} {cell['snr_db']:>8g} "
            f"{cell['sigma2_x']:>9.4g} {cell['analytical_lmmse_mse']:>12.6f}"
        )
        for name in estimators:
            if name == "fisher_bound":
                continue
            stem = {"lmmse": "lmmse", "pm_gibbs": "pm", "map": "map", "ls": "ls"}[name]
            mse = cell.get(f"empirical_{stem}_mse")
            se = cell.get(f"empirical_{stem}_stderr")
            line += f" {mse:>12.6f}" if mse is not None else f" {'':>12}"
            line += f" {se:>10.2e}" if se is not None else f" {'':>10}"
        if "fisher_bound" in estimators:
            line += f" {cell['fisher_bound']:>10.6f}"
        lines.append(line)
    return "\n".join(lines)


def _cmd_simulate(args):
    if args.config is not None:
        payload = _load_config_file(
            args.config,
            [args.users, args.items, args.snr_db],
            ["--users", "--items", "--snr-db"],
        )
        cfg = SyntheticConfig(**payload)
    else:
        missing = [
            flag
            for flag, v in (
                ("--users", args.users),
                ("--items", args.items),
                ("--snr-db", args.snr_db),
            )
            if v is None
        ]
        if missing:
            raise UsageError(f"missing required flags: {', '.join(missing)}")
        cfg = SyntheticConfig(
            users_grid=args.users,
            items_grid=args.items,
            snr_db_grid=args.snr_db,
            trials=args.trials,
            estimators=args.estimators,
            seed=args.seed,
            known_difficulties=args.known_difficulties,
            gibbs_burn_in=args.gibbs_burnin,
            gibbs_samples=args.gibbs_samples,
        )

    if "pm_gibbs" in cfg.estimators:
        projected = _projected_gibbs_seconds(cfg)
        if projected > _GIBBS_WARN_SECONDS:
            print(
                f"warning: pm_gibbs with burn-in {cfg.gibbs_burn_in} and "
                f"{cfg.gibbs_samples} samples projects to roughly "
                f"{projected / 60:.1f} minutes of sampling",
                file=sys.stderr,
            )

    threads = args.threads if args.threads is not None else os.cpu_count()
    result = run_synthetic(cfg, threads=threads)
    default_name = "simulate.json" if args.format == "json" else "simulate.csv"
    path = _resolve_output(args.output or default_name)
    text = result.to_json() if args.format == "json" else result.to_csv()
    _atomic_write(path, text)
    print(_simulate_table(result))
    print(f"wrote {path}")
    return 0


def _load_dataset(args):
    if (args.data is None) == (args.movielens is None):
        raise UsageError("exactly one of --data / --movielens is required")
    if args.data is not None:
        return load_triplets(args.data, label_convention=args.label_convention)
    return binarize_ratings(load_movielens(args.movielens))


def _cmd_fit(args):
    data = _load_dataset(args)
    gibbs = GibbsConfig(
        burn_in=args.gibbs_burnin, samples=args.gibbs_samples, seed=args.seed
    )
    out = fit_response_set(
        data, estimator=args.estimator, sigma2_x=args.sigma2, gibbs_config=gibbs
    )

    user_ids = data.user_ids if data.user_ids else tuple(range(data.num_users))
    item_ids = data.item_ids if data.item_ids else tuple(range(data.num_items))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["kind", "id", "estimate"])
    for u in range(data.num_users):
        writer.writerow(["ability", user_ids[u], _fmt(float(out["abilities"][u]))])
    for i in range(data.num_items):
        writer.writerow(["difficulty", item_ids[i], _fmt(float(out["difficulties"][i]))])
    path = _resolve_output(args.output)
    _atomic_write(path, buf.getvalue())

    per_comp = out["per_component_mse"]
    sidecar = {
        "schema_version": SCHEMA_VERSION,
        "estimator": args.estimator,
        "sigma2_x": args.sigma2,
        "num_users": data.num_users,
        "num_items": data.num_items,
        "num_responses": len(data),
        "predicted_mse": (
            None if out["predicted_mse"] is None else float(out["predicted_mse"])
        ),
        "predicted_mse_ability_mean": (
            None
            if per_comp is None
            else float(np.mean(per_comp[: data.num_users]))
        ),
        "predicted_mse_difficulty_mean": (
            None
            if per_comp is None
            else float(np.mean(per_comp[data.num_users :]))
        ),
        "wall_time_seconds": out["wall_time_seconds"],
    }
    sidecar_path = os.path.splitext(path)[0] + ".json"
    _atomic_write(sidecar_path, json.dumps(sidecar, indent=2, sort_keys=True))
    print(
        f"fit {args.estimator} on {len(data)} responses "
        f"({data.num_users} users, {data.num_items} items) "
        f"in {out['wall_time_seconds']:.3f}s"
    )
    if out["predicted_mse"] is not None:
        print(f"predicted total MSE: {out['predicted_mse']:.6f}")
    print(f"wrote {path} and {sidecar_path}")
    return 0


def _cmd_crossval(args):
    data = _load_dataset(args)
    if args.config is not None:
        payload = _load_config_file(args.config, [], [])
        cfg = CvConfig(**payload)
    else:
        cfg = CvConfig(
            folds=args.folds,
            seed=args.seed,
            prior_variance_grid=args.sigma2_grid,
            estimators=args.estimators,
            gibbs_burn_in=args.gibbs_burnin,
            gibbs_samples=args.gibbs_samples,
        )
    threads = args.threads if args.threads is not None else os.cpu_count()
    result = run_cross_validation(data, cfg, threads=threads)
    print(result.summary_table())
    for name, rec in result.per_estimator.items():
        for f in rec["auc_undefined_folds"]:
            print(f"note: {name} fold {f}: AUC undefined (single-class test fold)")
    default_name = "crossval.json" if args.format == "json" else "crossval.csv"
    path = _resolve_output(args.output or default_name)
    text = result.to_json() if args.format == "json" else result.to_csv()
    _atomic_write(path, text)
    print(f"wrote {path}")
    return 0


# Lets "--snr-db -10,0,10" parse: argparse only treats a leading-dash token
# as a value when it looks like a negative number, so widen that test to
# cover comma-separated lists.
_NEGATIVE_LIST = re.compile(r"^-\d+[\d.,eE+-]*$")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rasch-lmmse",
        description=(
            "Linear MMSE estimation of Rasch model parameters from one-bit "
            "responses, with closed-form MSE analysis and baselines."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_analyze = sub.add_parser(
        "analyze",
        help="closed-form MSE and Fisher bound tables (no data needed)",
    )
    p_analyze.add_argument("--users", type=_int_list, required=True,
                           help="comma-separated user counts")
    p_analyze.add_argument("--items", type=_int_list, required=True,
                           help="comma-separated item counts")
    level = p_analyze.add_mutually_exclusive_group(required=True)
    level.add_argument("--snr-db", type=_float_list,
                       help="comma-separated SNRs in dB")
    level.add_argument("--sigma2", type=_float_list,
                       help="comma-separated prior variances")
    p_analyze.add_argument("--known-difficulties", action="store_true",
                           help="single-user analysis with known item difficulties")
    p_analyze.add_argument("--difficulty-file",
                           help="file with one known difficulty per line")
    p_analyze.add_argument("--difficulty-sigma2", type=float,
                           help="draw known difficulties from N(0, s2)")
    p_analyze.add_argument("--seed", type=int, default=0,
                           help="seed for drawn difficulties")
    p_analyze.add_argument("--output", default="analyze.csv")
    p_analyze.set_defaults(func=_cmd_analyze)

    p_sim = sub.add_parser(
        "simulate", help="synthetic MSE study over a (users, items, SNR) grid"
    )
    p_sim.add_argument("--users", type=_int_list)
    p_sim.add_argument("--items", type=_int_list)
    p_sim.add_argument("--snr-db", type=_float_list)
    p_sim.add_argument("--trials", type=int, default=100)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--estimators", type=_estimator_list, default=("lmmse",),
                       help=f"comma-separated from: {', '.join(SYNTHETIC_ESTIMATORS)}")
    p_sim.add_argument("--gibbs-burnin", type=int, default=10_000)
    p_sim.add_argument("--gibbs-samples", type=int, default=20_000)
    p_sim.add_argument("--known-difficulties", action="store_true")
    p_sim.add_argument("--format", choices=("csv", "json"), default="csv")
    p_sim.add_argument("--output", default=None)
    p_sim.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: machine parallelism); "
                            "results are identical for any value")
    p_sim.add_argument("--config",
                       help="JSON file with the full config (replaces grid flags)")
    p_sim.set_defaults(func=_cmd_simulate)

    p_fit = sub.add_parser("fit", help="fit abilities/difficulties to a dataset")
    p_fit.add_argument("--data", help="triplet CSV (user,item,response)")
    p_fit.add_argument("--movielens", help="MovieLens u.data style ratings file")
    p_fit.add_argument("--label-convention", choices=("pm_one", "zero_one"),
                       default="pm_one")
    p_fit.add_argument("--estimator", choices=CV_ESTIMATORS, default="lmmse")
    p_fit.add_argument("--sigma2", type=float, default=1.0,
                       help="prior variance for both parameter blocks")
    p_fit.add_argument("--seed", type=int, default=0, help="Gibbs seed")
    p_fit.add_argument("--gibbs-burnin", type=int, default=10_000)
    p_fit.add_argument("--gibbs-samples", type=int, default=20_000)
    p_fit.add_argument("--output", default="fit.csv")
    p_fit.set_defaults(func=_cmd_fit)

    p_cv = sub.add_parser(
        "crossval", help="k-fold response prediction with ACC/AUC"
    )
    p_cv.add_argument("--data", help="triplet CSV (user,item,response)")
    p_cv.add_argument("--movielens", help="MovieLens u.data style ratings file")
    p_cv.add_argument("--label-convention", choices=("pm_one", "zero_one"),
                      default="pm_one")
    p_cv.add_argument("--folds", type=int, default=10)
    p_cv.add_argument("--seed", type=int, default=0)
    p_cv.add_argument("--estimators", type=_estimator_list, default=("lmmse",),
                      help=f"comma-separated from: {', '.join(CV_ESTIMATORS)}")
    p_cv.add_argument("--sigma2-grid", type=_float_list,
                      default=(0.1, 0.25, 0.5, 1.0, 2.0))
    p_cv.add_argument("--gibbs-burnin", type=int, default=10_000)
    p_cv.add_argument("--gibbs-samples", type=int, default=20_000)
    p_cv.add_argument("--format", choices=("csv", "json"), default="csv")
    p_cv.add_argument("--output", default=None)
    p_cv.add_argument("--threads", type=int, default=None)
    p_cv.add_argument("--config",
                      help="JSON file with the full config (replaces tuning flags)")
    p_cv.set_defaults(func=_cmd_crossval)

    for p in (parser, p_analyze, p_sim, p_fit, p_cv):
        p._negative_number_matcher = _NEGATIVE_LIST
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError, np.linalg.LinAlgError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
