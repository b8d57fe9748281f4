"""Command-line front end.

Subcommands: fit, emulate, forcing, spatial-emulate, evaluate, sample,
verify.  Outputs are plot-ready CSV files with floats at full round-trip
precision, so reruns with the same inputs and seed are byte-identical.

Exit codes: 0 ok, 2 data error, 3 optimization/numerical failure,
4 model-scenario compatibility error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys

import numpy as np

from . import oracles
from .errors import EmulatorError, NonFinite, ParseError, SchemaError, SingularGram
from .inference import (
    build_prior_from_model,
    fit_hyperparameters,
    marginal_log_likelihood,
    posterior_forcing,
    posterior_temperature,
    sample_posterior,
    with_variability,
)
from .metrics import (
    SCORE_FIELDS,
    Z95,
    ScoreReport,
    deterministic_scores,
    probabilistic_scores,
    spatial_scores,
)
from .model_io import load_model, save_model
from .scenario import assemble_training_set, load_scenario, spatial_companion_path
from .spatial import fit_pattern_scaling, spatial_posterior

# Used whenever --seed is omitted, so unseeded runs are still reproducible.
DEFAULT_SEED = 101

EXIT_OK = 0
EXIT_DATA = 2
EXIT_OPTIMIZATION = 3
EXIT_COMPAT = 4


class CompatibilityError(EmulatorError):
    """Model and scenario disagree about the atmospheric agents."""


def _fmt(value: float) -> str:
    return repr(float(value))


def _scenario_agent_names(path) -> set[str]:
    """Agent names declared by a scenario file header."""
    with open(path, newline="", encoding="utf-8") as handle:
        header = next(csv.reader(handle), [])
    names = set()
    for column in header:
        column = column.strip()
        for prefix in ("emission:", "cumulative_emission:"):
            if column.startswith(prefix):
                names.add(column[len(prefix):])
    return names


def _load_scenarios(paths, model):
    scenarios = []
    for path in paths:
        found = _scenario_agent_names(path)
        expected = set(model.agent_names)
        # a file with declared agents that disagree is a compatibility
        # problem; anything structurally broken falls through to the loader
        if found and found != expected:
            raise CompatibilityError(
                f"{path}: scenario agents {sorted(found)} do not match model agents "
                f"{sorted(expected)}"
            )
        scenarios.append(load_scenario(path, model.agents))
    return scenarios


def _require_holdout(scenarios, name):
    names = [s.name for s in scenarios]
    if name not in names:
        raise SchemaError(f"holdout '{name}' is not among the given scenarios {names}")


def _prepare(model, scenarios, holdout):
    """Training set and prior over all scenarios, holding one out."""
    train, _ = assemble_training_set(scenarios, holdout=(holdout,), agents=model.agent_names)
    if model.kernel.standardize_inputs and model.standardization is None:
        model = dataclasses.replace(model, standardization=train.standardization)
    prior = build_prior_from_model(scenarios, model)
    return model, train, prior


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)


def cmd_fit(args) -> int:
    model = load_model(args.config)
    scenarios = _load_scenarios(args.scenario, model)
    holdout = tuple(args.holdout)
    train, _ = assemble_training_set(scenarios, holdout=holdout, agents=model.agent_names)

    if not model.fit.free:
        save_model(model, args.out)
        if train.n > 0:
            scored = model
            if model.kernel.standardize_inputs and model.standardization is None:
                scored = dataclasses.replace(model, standardization=train.standardization)
            prior = build_prior_from_model(
                [s for s in scenarios if s.name not in holdout], scored
            )
            print(f"fit: all parameters fixed, mll={marginal_log_likelihood(prior, train):.6f}")
        else:
            print("fit: all parameters fixed")
        print(f"fit: wrote {args.out}")
        return EXIT_OK

    if train.n == 0:
        raise SchemaError("cannot fit hyperparameters with an empty training set")
    if model.kernel.standardize_inputs:
        model = dataclasses.replace(model, standardization=train.standardization)
    train_scenarios = [s for s in scenarios if s.name not in holdout]

    def builder(candidate):
        return build_prior_from_model(train_scenarios, candidate)

    result = fit_hyperparameters(builder, train, model, seed=args.seed)
    save_model(result.model, args.out)
    finite = [t for t in result.trace if np.isfinite(t)]
    initial = finite[0] if finite else float("nan")
    print(
        f"fit: n={train.n} free={','.join(model.fit.free)} "
        f"evaluations={result.iterations} initial_mll={initial:.6f} "
        f"final_mll={result.mll:.6f}"
    )
    print(f"fit: wrote {args.out}")
    return EXIT_OK


def _target_rows(prior, name):
    return prior.rows_for_scenario(name)


def cmd_emulate(args) -> int:
    model = load_model(args.model)
    scenarios = _load_scenarios(args.scenario, model)
    _require_holdout(scenarios, args.holdout)
    model, train, prior = _prepare(model, scenarios, args.holdout)
    rows = _target_rows(prior, args.holdout)
    posterior = posterior_temperature(prior, train, rows)
    gamma = prior.variability_gram.values[np.ix_(rows, rows)]
    predictive = with_variability(posterior, gamma, prior.sigma)
    std = predictive.std()
    half = Z95 * std
    years = [year for _, year in predictive.index]
    out_rows = [
        [
            str(year),
            _fmt(prior.mean[row]),
            _fmt(mean),
            _fmt(s),
            _fmt(mean - h),
            _fmt(mean + h),
        ]
        for year, row, mean, s, h in zip(years, rows, predictive.mean, std, half)
    ]
    _write_csv(
        args.out,
        ["year", "prior_mean", "posterior_mean", "posterior_std", "lower95", "upper95"],
        out_rows,
    )
    print(f"emulate: wrote {args.out} ({len(out_rows)} rows)")
    return EXIT_OK


def cmd_forcing(args) -> int:
    model = load_model(args.model)
    scenarios = _load_scenarios(args.scenario, model)
    _require_holdout(scenarios, args.holdout)
    model, train, prior = _prepare(model, scenarios, args.holdout)
    rows = _target_rows(prior, args.holdout)
    posterior = posterior_forcing(prior, train, rows)
    std = posterior.std()
    half = Z95 * std
    years = [year for _, year in posterior.index]
    out_rows = [
        [
            str(year),
            _fmt(prior.forcing_mean[row]),
            _fmt(mean),
            _fmt(s),
            _fmt(mean - h),
            _fmt(mean + h),
        ]
        for year, row, mean, s, h in zip(years, rows, posterior.mean, std, half)
    ]
    _write_csv(
        args.out,
        ["year", "prior_mean", "posterior_mean", "posterior_std", "lower95", "upper95"],
        out_rows,
    )
    print(f"forcing: wrote {args.out} ({len(out_rows)} rows)")
    return EXIT_OK


def cmd_spatial_emulate(args) -> int:
    model = load_model(args.model)
    scenarios = _load_scenarios(args.scenario, model)
    _require_holdout(scenarios, args.holdout)
    model, train, prior = _prepare(model, scenarios, args.holdout)

    train_scenarios = [s for s in scenarios if s.name != args.holdout]
    for scen in train_scenarios:
        if scen.spatial_temperature is None:
            raise SchemaError(f"scenario '{scen.name}' carries no spatial temperatures")
    grids = {tuple(s.spatial_grid.latitudes) + tuple(s.spatial_grid.longitudes)
             for s in train_scenarios}
    if len(grids) > 1:
        raise SchemaError("training scenarios live on different spatial grids")
    sgrid = train_scenarios[0].spatial_grid

    pattern = fit_pattern_scaling(
        [s.global_temperature for s in train_scenarios],
        [s.spatial_temperature for s in train_scenarios],
        sgrid,
    )
    local = np.concatenate([s.spatial_temperature for s in train_scenarios], axis=0)
    rows = _target_rows(prior, args.holdout)
    field = spatial_posterior(pattern, prior, train, local, rows)

    gamma = prior.variability_gram.values[np.ix_(rows, rows)]
    years = [prior.index[r][1] for r in rows]
    out_rows = []
    for i, lat in enumerate(sgrid.latitudes):
        for j, lon in enumerate(sgrid.longitudes):
            cell = field[(i, j)]
            beta = pattern.slope[i, j]
            prior_mean = beta * prior.mean[rows] + pattern.intercept[i, j]
            variance = (
                np.clip(np.diag(cell.covariance), 0.0, None)
                + prior.sigma**2 * beta**2 * np.diag(gamma)
                + pattern.residual_variance[i, j]
            )
            std = np.sqrt(variance)
            for a, year in enumerate(years):
                mean = cell.mean[a]
                half = Z95 * std[a]
                out_rows.append(
                    [
                        _fmt(lat),
                        _fmt(lon),
                        str(year),
                        _fmt(prior_mean[a]),
                        _fmt(mean),
                        _fmt(std[a]),
                        _fmt(mean - half),
                        _fmt(mean + half),
                    ]
                )
    _write_csv(
        args.out,
        ["lat", "lon", "year", "prior_mean", "posterior_mean", "posterior_std",
         "lower95", "upper95"],
        out_rows,
    )
    print(f"spatial-emulate: wrote {args.out} ({len(out_rows)} rows)")
    return EXIT_OK


def cmd_sample(args) -> int:
    model = load_model(args.model)
    scenarios = _load_scenarios(args.scenario, model)
    _require_holdout(scenarios, args.holdout)
    model, train, prior = _prepare(model, scenarios, args.holdout)
    rows = _target_rows(prior, args.holdout)
    posterior = posterior_temperature(prior, train, rows)
    gamma = prior.variability_gram.values[np.ix_(rows, rows)]
    predictive = with_variability(posterior, gamma, prior.sigma)
    draws = sample_posterior(predictive, args.count, args.seed)
    header = ["year"] + [f"sample_{i:04d}" for i in range(args.count)]
    years = [year for _, year in predictive.index]
    out_rows = [
        [str(year)] + [_fmt(draws[s, a]) for s in range(args.count)]
        for a, year in enumerate(years)
    ]
    _write_csv(args.out, header, out_rows)
    print(f"sample: wrote {args.out} ({args.count} draws)")
    return EXIT_OK


def _parse_period(text):
    if text is None:
        return None
    try:
        first, last = text.split(":")
        first, last = int(first), int(last)
    except ValueError:
        raise ParseError(f"cannot parse period '{text}', expected '<y0>:<y1>'") from None
    if first > last:
        raise ParseError(f"period start {first} is after end {last}")
    return first, last


def _read_prediction_csv(path):
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = [h.strip() for h in next(reader, [])]
        rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    return header, rows


def _read_truth_global(path) -> dict[int, float]:
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = [h.strip() for h in next(reader, [])]
        if "year" not in header or "tas_global" not in header:
            raise SchemaError(f"{path}: truth scenario needs year and tas_global columns")
        y, t = header.index("year"), header.index("tas_global")
        out = {}
        for row in reader:
            if not row or not any(cell.strip() for cell in row):
                continue
            out[int(row[y])] = float(row[t])
    return out


def _read_truth_spatial(path) -> dict[tuple[float, float, int], float]:
    companion = spatial_companion_path(path)
    if not companion.exists():
        raise SchemaError(f"{companion}: spatial truth file not found")
    out = {}
    with open(companion, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = [h.strip() for h in next(reader, [])]
        if header != ["lat", "lon", "year", "tas"]:
            raise SchemaError(f"{companion}: expected columns lat, lon, year, tas")
        for row in reader:
            if not row or not any(cell.strip() for cell in row):
                continue
            out[(float(row[0]), float(row[1]), int(row[2]))] = float(row[3])
    return out


def _score_pair(mean, std, truth):
    rmse, mae, bias = deterministic_scores(mean, truth)
    ll, calib, crps = probabilistic_scores(mean, np.asarray(std) ** 2, truth)
    return ScoreReport(rmse=rmse, mae=mae, bias=bias, log_likelihood=ll,
                       calib95=calib, crps=crps)


def cmd_evaluate(args) -> int:
    period = _parse_period(args.period)
    header, rows = _read_prediction_csv(args.predictions)
    spatial = header[:3] == ["lat", "lon", "year"]
    col = {name: i for i, name in enumerate(header)}
    for needed in ("year", "prior_mean", "posterior_mean", "posterior_std"):
        if needed not in col:
            raise SchemaError(f"{args.predictions}: missing column '{needed}'")

    def in_period(year):
        return period is None or (period[0] <= year <= period[1])

    if not spatial:
        truth_by_year = _read_truth_global(args.scenario)
        years, prior_mean, post_mean, post_std, truth = [], [], [], [], []
        for row in rows:
            year = int(row[col["year"]])
            if not in_period(year):
                continue
            if year not in truth_by_year:
                raise SchemaError(
                    f"truth scenario has no year {year} inside the requested period"
                )
            years.append(year)
            prior_mean.append(float(row[col["prior_mean"]]))
            post_mean.append(float(row[col["posterior_mean"]]))
            post_std.append(float(row[col["posterior_std"]]))
            truth.append(truth_by_year[year])
        if not years:
            raise SchemaError("no prediction rows fall inside the requested period")
        posterior = _score_pair(post_mean, post_std, truth)
        p_rmse, p_mae, p_bias = deterministic_scores(prior_mean, truth)
        prior = ScoreReport(rmse=p_rmse, mae=p_mae, bias=p_bias)
    else:
        truth_cells = _read_truth_spatial(args.scenario)
        from .scenario import SpatialGrid

        cells: dict[tuple[float, float], dict[str, list[float]]] = {}
        for row in rows:
            year = int(row[col["year"]])
            if not in_period(year):
                continue
            key = (float(row[col["lat"]]), float(row[col["lon"]]))
            cell = cells.setdefault(
                key, {"prior": [], "mean": [], "std": [], "truth": []}
            )
            tkey = (key[0], key[1], year)
            if tkey not in truth_cells:
                raise SchemaError(
                    f"spatial truth has no value for {tkey} inside the requested period"
                )
            cell["prior"].append(float(row[col["prior_mean"]]))
            cell["mean"].append(float(row[col["posterior_mean"]]))
            cell["std"].append(float(row[col["posterior_std"]]))
            cell["truth"].append(truth_cells[tkey])
        if not cells:
            raise SchemaError("no prediction rows fall inside the requested period")
        lats = sorted({lat for lat, _ in cells})
        lons = sorted({lon for _, lon in cells})
        grid = SpatialGrid(latitudes=lats, longitudes=lons)
        post_reports, prior_reports = [], []
        for lat in lats:
            post_row, prior_row = [], []
            for lon in lons:
                cell = cells.get((lat, lon))
                if cell is None:
                    raise SchemaError(f"prediction grid is missing cell ({lat}, {lon})")
                post_row.append(_score_pair(cell["mean"], cell["std"], cell["truth"]))
                rmse, mae, bias = deterministic_scores(cell["prior"], cell["truth"])
                prior_row.append(ScoreReport(rmse=rmse, mae=mae, bias=bias))
            post_reports.append(post_row)
            prior_reports.append(prior_row)
        posterior = spatial_scores(post_reports, grid)
        prior = spatial_scores(prior_reports, grid)

    _write_csv(
        args.out,
        ["label", *SCORE_FIELDS],
        [["posterior", *posterior.csv_values()], ["prior", *prior.csv_values()]],
    )
    print("evaluate: posterior scores")
    print(posterior.to_table())
    print(f"evaluate: wrote {args.out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    checks = oracles.default_verification(seed=args.seed)
    _write_csv(
        args.out,
        ["check", "statistic", "tolerance", "pass"],
        [
            [c.name, _fmt(c.statistic), _fmt(c.tolerance), "true" if c.passed else "false"]
            for c in checks
        ],
    )
    failures = [c for c in checks if not c.passed]
    for check in checks:
        status = "ok" if check.passed else "FAIL"
        print(f"verify: {check.name}: {check.statistic:.3e} <= {check.tolerance:.3e} [{status}]")
    print(f"verify: wrote {args.out}")
    return EXIT_OK if not failures else EXIT_OPTIMIZATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ebgp",
        description="Gaussian-process surface temperature emulator with an "
        "energy-balance prior",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, scenarios=True, model=False, holdout=False):
        if scenarios:
            p.add_argument("--scenario", nargs="+", required=True, metavar="PATH",
                           help="scenario CSV files")
        if model:
            p.add_argument("--model", required=True, help="model file")
        if holdout:
            p.add_argument("--holdout", required=True,
                           help="scenario name to emulate (excluded from training)")
        p.add_argument("--out", required=True, help="output path")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED,
                       help=f"random seed (default {DEFAULT_SEED})")
        p.add_argument("--format", choices=["csv"], default="csv",
                       help="output format (csv only)")

    p = sub.add_parser("fit", help="fit hyperparameters by marginal likelihood")
    p.add_argument("--config", required=True, help="model/config file")
    p.add_argument("--holdout", action="append", default=[], metavar="NAME",
                   help="scenario name to exclude from training (repeatable)")
    add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("emulate", help="posterior temperature for a held-out scenario")
    add_common(p, model=True, holdout=True)
    p.set_defaults(func=cmd_emulate)

    p = sub.add_parser("forcing", help="posterior radiative forcing for a held-out scenario")
    add_common(p, model=True, holdout=True)
    p.set_defaults(func=cmd_forcing)

    p = sub.add_parser("spatial-emulate", help="per-cell posterior temperatures")
    add_common(p, model=True, holdout=True)
    p.set_defaults(func=cmd_spatial_emulate)

    p = sub.add_parser("sample", help="draw joint posterior samples")
    add_common(p, model=True, holdout=True)
    p.add_argument("--count", type=int, default=100, help="number of draws")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("evaluate", help="score predictions against a truth scenario")
    p.add_argument("--predictions", required=True, help="prediction CSV from emulate")
    p.add_argument("--scenario", required=True, help="truth scenario CSV")
    p.add_argument("--period", default=None, metavar="Y0:Y1",
                   help="inclusive year range to score")
    p.add_argument("--out", required=True, help="output path")
    p.add_argument("--format", choices=["csv"], default="csv")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("verify", help="run the oracle verification suite")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--format", choices=["csv"], default="csv")
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CompatibilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPAT
    except (NonFinite, SingularGram) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OPTIMIZATION
    except (EmulatorError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
