"""Command-line front end.

Verbs: ``calibrate`` (CSV to model), ``moments`` (closed-form table, with an
optional Monte Carlo cross-check), ``sweep`` (strategy/parameter sweeps as
CSV and optional SVG), ``simulate`` (Monte Carlo runs or monthly synthetic
series), ``optimize`` (criterion maximization).

Every invocation that writes files also writes ``manifest.json`` next to
them, recording the resolved configuration, input hashes, the tool version,
and output hashes; re-running the manifest's ``argv`` (plus any ``--out``)
reproduces every output byte for byte.

Exit codes: 0 success, 1 usage, 2 bad input data, 3 numeric failure
(sweeps report per-point optimizer failures as warnings and exit 0 unless
``--strict``).  All numbers are printed in shortest round-trip form.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import (
    CalibrationDataError,
    CalibrationNumericError,
    CalibrationReport,
    calibrate,
    read_timeseries_csv,
    reference_estimates,
    report_from_estimates,
    timeseries_to_csv,
)
from .criterion import OptimizerConfig, UnboundedCriterionError, optimize, sweep_gamma, sweep_theta
from .linalg import NumericError, StabilityError
from .mc import SimConfig, SimulationError, simulate, simulate_discrete
from .model import (
    CriterionParams,
    FactorModel,
    ModelValidationError,
    Strategy,
    load_model,
    model_to_dict,
)
from .moments import moments

__all__ = ["main"]


class UsageError(Exception):
    """Bad flag combination or value; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors by default; remap to 1 to
    # keep 2 reserved for input-data problems.
    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _parse_floats(text: str, what: str):
    try:
        return [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise UsageError(f"{what}: expected comma-separated numbers, got {text!r}") from None


def _parse_vector(text: str, length: int, what: str) -> np.ndarray:
    vals = _parse_floats(text, what)
    if len(vals) == 1 and length > 1:
        vals = vals * length
    if len(vals) != length:
        raise UsageError(f"{what}: expected {length} value(s), got {len(vals)}")
    return np.array(vals)


def _parse_matrix(text: str, m: int, n: int, what: str) -> np.ndarray:
    rows = [r for r in text.split(";") if r.strip() != ""]
    if len(rows) == 1:
        vals = _parse_floats(rows[0], what)
        if len(vals) == 1:
            return np.full((m, n), vals[0])
    if len(rows) != m:
        raise UsageError(f"{what}: expected {m} row(s) separated by ';', got {len(rows)}")
    out = np.empty((m, n))
    for i, row in enumerate(rows):
        vals = _parse_floats(row, what)
        if len(vals) != n:
            raise UsageError(f"{what}: row {i + 1} has {len(vals)} value(s), expected {n}")
        out[i] = vals
    return out


def _parse_grid(text: str, log: bool, what: str) -> np.ndarray:
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"{what}: expected lo:hi:count, got {text!r}")
        try:
            lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise UsageError(f"{what}: expected lo:hi:count, got {text!r}") from None
        if count < 2 or not hi > lo:
            raise UsageError(f"{what}: need lo < hi and count >= 2, got {text!r}")
        if log:
            if lo <= 0:
                raise UsageError(f"{what}: log spacing needs lo > 0, got {lo}")
            return np.geomspace(lo, hi, count)
        return np.linspace(lo, hi, count)
    return np.array(_parse_floats(text, what))


def _fmt(v) -> str:
    return repr(float(v))


def _json_text(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _strip_out(argv):
    out, skip = [], False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok == "--out":
            skip = True
            continue
        if tok.startswith("--out="):
            continue
        out.append(tok)
    return out


def _emit(args, verb: str, files: dict, inputs=()) -> None:
    """Write output files plus the reproducibility manifest."""
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    hashes = {}
    for name, content in files.items():
        data = content.encode("utf-8") if isinstance(content, str) else content
        (out_dir / name).write_bytes(data)
        hashes[name] = _sha256_bytes(data)
    arguments = {
        k: v for k, v in vars(args).items() if k not in ("func", "out", "raw_argv")
    }
    manifest = {
        "v": 1,
        "tool": "longrun",
        "version": __version__,
        "command": verb,
        "argv": _strip_out(args.raw_argv),
        "arguments": arguments,
        "inputs": {str(p): _sha256_bytes(Path(p).read_bytes()) for p in inputs},
        "outputs": hashes,
    }
    (out_dir / "manifest.json").write_text(_json_text(manifest), encoding="utf-8")


def _load(args) -> FactorModel:
    if not args.model:
        raise UsageError("--model is required for this command")
    return load_model(args.model)


def _report_doc(report: CalibrationReport) -> dict:
    d = report.discrete
    return {
        "v": 1,
        "model": model_to_dict(report.model),
        "persistence_map": report.persistence_map,
        "unit_conventions": report.unit_conventions,
        "discrete": {
            "nobs": d.nobs,
            "factor_means": d.factor_means.tolist(),
            "return_const": d.return_const.tolist(),
            "return_slope": d.return_slope.tolist(),
            "return_tstats": d.return_tstats.tolist(),
            "factor_const": d.factor_const.tolist(),
            "persistence": d.persistence.tolist(),
            "factor_tstats": d.factor_tstats.tolist(),
            "innovation_cov": d.innovation_cov.tolist(),
        },
    }


def cmd_calibrate(args) -> int:
    if args.from_tables:
        report = report_from_estimates(reference_estimates(), persistence_map=args.persistence_map)
        inputs = []
    else:
        if args.csv is None:
            raise UsageError("give a CSV path or --from-tables")
        report = calibrate(read_timeseries_csv(args.csv), persistence_map=args.persistence_map)
        inputs = [args.csv]
    files = {
        "model.json": _json_text(model_to_dict(report.model)),
        "report.json": _json_text(_report_doc(report)),
    }
    _emit(args, "calibrate", files, inputs)
    print(f"calibrated model written to {Path(args.out) / 'model.json'}")
    return 0


def _strategy_from_flags(model: FactorModel, args) -> Strategy:
    h = _parse_vector(args.h, model.m, "--h")
    H = _parse_matrix(args.H, model.m, model.n, "--H")
    return Strategy(h=h, H=H)


def cmd_moments(args) -> int:
    model = _load(args)
    strategy = _strategy_from_flags(model, args)
    mom = moments(model, strategy)
    doc = {
        "growth_rate": mom.growth_rate,
        "variance_rate": mom.variance_rate,
        "wealth_factor_cov": mom.wealth_factor_cov.tolist(),
        "factor_cov": mom.factor_cov.tolist(),
        "shock_loading": mom.shock_loading.tolist(),
        "second_moment_offset": mom.second_moment_offset.tolist(),
        "second_moment_slope": mom.second_moment_slope.tolist(),
        "strategy": {"h": strategy.h.tolist(), "H": strategy.H.tolist()},
    }
    for key in ("growth_rate", "variance_rate", "wealth_factor_cov", "factor_cov",
                "shock_loading", "second_moment_offset", "second_moment_slope"):
        print(f"{key} {json.dumps(doc[key])}")

    if args.check:
        cfg = SimConfig(dt=args.dt, horizon=args.horizon, paths=args.paths, seed=args.seed)
        stats = simulate(model, strategy, cfg, threads=args.threads)
        T = stats.horizon
        checks = {
            "growth_rate": (mom.growth_rate, stats.mean_u / T, stats.mean_u_se / T,
                            (stats.mean_u - mom.growth_rate * T) / stats.mean_u_se),
            "variance_rate": (mom.variance_rate, stats.var_u / T, stats.var_u_se / T,
                              (stats.var_u - mom.variance_rate * T) / stats.var_u_se),
        }
        for j in range(model.n):
            checks[f"wealth_factor_cov_{j + 1}"] = (
                float(mom.wealth_factor_cov[j]), float(stats.cov_ux[j]),
                float(stats.cov_ux_se[j]),
                float((stats.cov_ux[j] - mom.wealth_factor_cov[j]) / stats.cov_ux_se[j]),
            )
        doc["check"] = {
            name: {"closed_form": c, "monte_carlo": est, "se": se, "z": z}
            for name, (c, est, se, z) in checks.items()
        }
        doc["check_config"] = {"dt": args.dt, "horizon": args.horizon,
                               "paths": args.paths, "seed": args.seed}
        for name, (c, est, se, z) in checks.items():
            print(f"check {name}: closed={_fmt(c)} mc={_fmt(est)} se={_fmt(se)} z={_fmt(z)}")

    if args.out:
        _emit(args, "moments", {"moments.json": _json_text(doc)}, [args.model])
    return 0


def _sweep_csv_strategy(res, params, m: int, n: int):
    scalar = m == 1 and n == 1
    lines = []
    if scalar:
        lines.append("parameter,h,H,W,ratio")
        ratio = res.ratio()
        for i, p in enumerate(params):
            lines.append(",".join([
                _fmt(p), _fmt(res.h_star[i, 0]), _fmt(res.H_star[i, 0, 0]),
                _fmt(res.values[i]), _fmt(ratio[i]),
            ]))
    else:
        header = (["parameter"] + [f"h_{i + 1}" for i in range(m)]
                  + [f"H_{i + 1}_{j + 1}" for i in range(m) for j in range(n)] + ["W"])
        lines.append(",".join(header))
        for i, p in enumerate(params):
            row = [_fmt(p)] + [_fmt(v) for v in res.h_star[i]] \
                + [_fmt(v) for v in res.H_star[i].ravel()] + [_fmt(res.values[i])]
            lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def cmd_sweep(args) -> int:
    from .svg import line_plot

    model = _load(args)
    config = OptimizerConfig(seed=args.seed)
    warn_rows = []

    if args.mode == "H":
        if model.m != 1 or model.n != 1:
            raise CalibrationDataError(
                "sweep mode H needs a one-asset, one-factor model; "
                f"this one has m={model.m}, n={model.n}"
            )
        grid = _parse_grid(args.range or "-3:3:121", args.log, "--range")
        h = _parse_vector(args.h, 1, "--h")
        rows = ["H,K,P,varRate"]
        table = []
        for v in grid:
            mom = moments(model, Strategy(h=h, H=np.array([[v]])))
            table.append((v, mom.growth_rate, float(mom.wealth_factor_cov[0]), mom.variance_rate))
            rows.append(",".join(_fmt(x) for x in table[-1]))
        csv_text = "\n".join(rows) + "\n"
        svg_series = ([t[1] for t in table], [t[2] for t in table], [t[3] for t in table])
        svg_text = line_plot(grid, svg_series,
                             labels=("K", "P", "varRate"), title="moments vs H",
                             xlabel="H", ylabel="value")
    else:
        if args.mode == "theta":
            grid = _parse_grid(args.range or "0.25:64:13", args.log or args.range is None, "--range")
            gamma = _parse_vector(args.gamma, model.n, "--gamma")
            res = sweep_theta(model, grid, gamma=gamma, config=config)
            xlabel = "theta"
        else:
            grid = _parse_grid(args.range or "0:0.01:11", args.log, "--range")
            res = sweep_gamma(model, args.theta, grid, config=config)
            xlabel = "gamma"
        csv_text = _sweep_csv_strategy(res, grid, model.m, model.n)
        for i in np.nonzero(res.failed)[0]:
            warn_rows.append(f"sweep point {xlabel}={_fmt(grid[i])}: {res.messages[i]}")
        for i in np.nonzero(~res.failed & ~res.stationary)[0]:
            warn_rows.append(
                f"sweep point {xlabel}={_fmt(grid[i])}: optimum not stationary "
                f"({res.messages[i]})"
            )
        h_first = res.h_star[:, 0]
        H_first = res.H_star[:, 0, 0]
        svg_text = line_plot(grid, (h_first, H_first), labels=("h*", "H*"),
                             title=f"optimal strategy vs {xlabel}", xlabel=xlabel,
                             ylabel="coefficient")

    files = {"sweep.csv": csv_text}
    if args.svg:
        files["sweep.svg"] = svg_text
    _emit(args, "sweep", files, [args.model])
    for line in warn_rows:
        print(f"warning: {line}", file=sys.stderr)
    if warn_rows and args.strict:
        return 3
    return 0


def cmd_simulate(args) -> int:
    model = _load(args)
    if args.discrete is not None:
        if args.discrete < 24:
            raise UsageError("--discrete needs at least 24 months")
        if args.out is None:
            args.out = "."
        data = simulate_discrete(model, args.discrete, seed=args.seed)
        files = {"series.csv": timeseries_to_csv(data)}
        _emit(args, "simulate", files, [args.model])
        print(f"synthetic series written to {Path(args.out) / 'series.csv'}")
        return 0

    if args.dump_paths and not args.out:
        raise UsageError("--dump-paths needs --out")
    strategy = _strategy_from_flags(model, args)
    cfg = SimConfig(
        dt=args.dt, horizon=args.horizon, paths=args.paths, seed=args.seed,
        factor_scheme=args.scheme, antithetic=args.antithetic,
        stationary_start=not args.zero_start, keep_paths=args.dump_paths,
    )
    stats = simulate(model, strategy, cfg, threads=args.threads)
    doc = {
        "config": {
            "dt": cfg.dt, "horizon": cfg.horizon, "paths": cfg.paths, "seed": cfg.seed,
            "factor_scheme": cfg.factor_scheme, "antithetic": cfg.antithetic,
            "stationary_start": cfg.stationary_start,
        },
        "effective_horizon": stats.horizon,
        "mean_u": stats.mean_u, "mean_u_se": stats.mean_u_se,
        "var_u": stats.var_u, "var_u_se": stats.var_u_se,
        "cov_ux": stats.cov_ux.tolist(), "cov_ux_se": stats.cov_ux_se.tolist(),
        "mean_uxx": stats.mean_uxx.tolist(), "mean_uxx_se": stats.mean_uxx_se.tolist(),
        "strategy": {"h": strategy.h.tolist(), "H": strategy.H.tolist()},
    }
    text = _json_text(doc)
    print(text, end="")
    if args.out:
        files = {"stats.json": text}
        if args.dump_paths:
            buf = io.StringIO()
            buf.write("path,T,u," + ",".join(f"x_{j + 1}" for j in range(model.n)) + "\n")
            for i in range(stats.paths):
                buf.write(",".join(
                    [str(i), _fmt(stats.horizon), _fmt(stats.final_u[i])]
                    + [_fmt(v) for v in stats.final_x[i]]
                ) + "\n")
            files["paths.csv"] = buf.getvalue()
        _emit(args, "simulate", files, [args.model])
    return 0


def cmd_optimize(args) -> int:
    model = _load(args)
    gamma = _parse_vector(args.gamma, model.n, "--gamma")
    params = CriterionParams(theta=args.theta, gamma=gamma)
    parts = args.grid_bounds.split(":")
    if len(parts) != 2:
        raise UsageError(f"--grid-bounds: expected lo:hi, got {args.grid_bounds!r}")
    try:
        lo, hi = float(parts[0]), float(parts[1])
    except ValueError:
        raise UsageError(f"--grid-bounds: expected lo:hi, got {args.grid_bounds!r}") from None
    try:
        config = OptimizerConfig(
            grid_bounds=(lo, hi), grid_points=args.grid_points,
            local_restarts=args.restarts, seed=args.seed,
        )
    except ValueError as err:
        raise UsageError(str(err)) from None
    res = optimize(model, params, config)
    doc = {
        "theta": args.theta,
        "gamma": gamma.tolist(),
        "h": res.strategy.h.tolist(),
        "H": res.strategy.H.tolist(),
        "value": res.value,
        "stationary": res.stationary,
        "gradient_norm": res.gradient_norm,
        "evaluations": res.evaluations,
        "message": res.message,
    }
    text = _json_text(doc)
    print(text, end="")
    if args.out:
        _emit(args, "optimize", {"optimum.json": text}, [args.model])
    return 0


def _add_common(sub, model_required=True):
    sub.add_argument("--model", help="model JSON path", required=False)
    sub.add_argument("--out", help="output directory (writes files + manifest.json)")
    sub.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    sub.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    sub.add_argument("--strict", action="store_true",
                     help="exit 3 on any flagged numeric problem")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="longrun",
        description="Long-run moments, criterion optimization, and calibration "
                    "for linear-factor asset dynamics.",
    )
    parser.add_argument("--version", action="version", version=f"longrun {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("calibrate", help="estimate a model from a monthly CSV")
    p.add_argument("csv", nargs="?", help="CSV with columns date,excess_return_1..m,factor_1..n")
    p.add_argument("--from-tables", action="store_true",
                   help="use the bundled published estimates instead of a CSV")
    p.add_argument("--persistence-map", choices=("euler", "log"), default="euler",
                   help="monthly persistence to drift map (default euler)")
    _add_common(p)
    p.set_defaults(func=cmd_calibrate, out=".")

    p = subs.add_parser("moments", help="closed-form long-run moments for one strategy")
    p.add_argument("--h", default="1", help="constant holdings, comma-separated (default 1)")
    p.add_argument("--H", default="0", help="factor loadings, rows ';'-separated (default 0)")
    p.add_argument("--check", action="store_true",
                   help="also run the Monte Carlo oracle and print z-scores")
    p.add_argument("--dt", type=float, default=0.1, help="oracle step (default 0.1)")
    p.add_argument("--horizon", type=float, default=10000.0, help="oracle horizon (default 1e4)")
    p.add_argument("--paths", type=int, default=10000, help="oracle paths (default 1e4)")
    _add_common(p)
    p.set_defaults(func=cmd_moments)

    p = subs.add_parser("sweep", help="sweep a strategy coefficient or criterion parameter")
    p.add_argument("--mode", choices=("H", "theta", "gamma"), required=True)
    p.add_argument("--range", help="lo:hi:count or explicit comma list "
                                   "(defaults: H -3:3:121, theta 0.25:64:13 log, gamma 0:0.01:11)")
    p.add_argument("--log", action="store_true", help="log-spaced range")
    p.add_argument("--h", default="1", help="fixed holdings for mode H (default 1)")
    p.add_argument("--theta", type=float, default=1.0, help="fixed theta for mode gamma (default 1)")
    p.add_argument("--gamma", default="0", help="fixed gamma for mode theta (default 0)")
    p.add_argument("--svg", action="store_true", help="also write sweep.svg")
    _add_common(p)
    p.set_defaults(func=cmd_sweep, out=".")

    p = subs.add_parser("simulate", help="run the Monte Carlo oracle or emit a monthly series")
    p.add_argument("--h", default="1", help="constant holdings (default 1)")
    p.add_argument("--H", default="0", help="factor loadings (default 0)")
    p.add_argument("--dt", type=float, default=0.1, help="time step in months (default 0.1)")
    p.add_argument("--horizon", type=float, default=10000.0, help="total months (default 1e4)")
    p.add_argument("--paths", type=int, default=10000, help="path count (default 1e4)")
    p.add_argument("--scheme", choices=("exact", "euler"), default="exact",
                   help="factor transition scheme (default exact)")
    p.add_argument("--antithetic", action="store_true", help="pair sign-flipped paths")
    p.add_argument("--zero-start", action="store_true",
                   help="start factors at zero instead of the stationary draw")
    p.add_argument("--dump-paths", action="store_true",
                   help="write per-path terminal values to paths.csv (needs --out)")
    p.add_argument("--discrete", type=int, metavar="MONTHS",
                   help="emit a monthly synthetic series (series.csv) instead of path stats")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = subs.add_parser("optimize", help="maximize the criterion over strategies")
    p.add_argument("--theta", type=float, default=1.0, help="risk sensitivity (default 1)")
    p.add_argument("--gamma", default="0", help="factor sensitivity vector (default 0)")
    p.add_argument("--grid-bounds", default="-3:3", help="scan box lo:hi (default -3:3)")
    p.add_argument("--grid-points", type=int, default=61, help="scan points per axis (default 61)")
    p.add_argument("--restarts", type=int, default=5, help="local refinements (default 5)")
    _add_common(p)
    p.set_defaults(func=cmd_optimize)

    return parser


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.raw_argv = list(argv)
    try:
        return args.func(args)
    except UsageError as err:
        print(f"longrun: error: {err}", file=sys.stderr)
        return 1
    except (CalibrationNumericError, NumericError, StabilityError,
            SimulationError, UnboundedCriterionError) as err:
        print(f"longrun: numeric failure: {err}", file=sys.stderr)
        return 3
    except (CalibrationDataError, ModelValidationError) as err:
        print(f"longrun: input error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"longrun: input error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
