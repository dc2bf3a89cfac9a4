"""Command-line entry point: simulate, equilibria, fit, sweep, preset dump.

Every option can also be given in a JSON config file (``--config``) under
its option name with dashes replaced by underscores, either at top level or
inside a section named after the subcommand.  Explicit flags win.

Exit codes: 0 success, 2 usage/config error, 3 numerical failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import presets
from .equilibria import classify, disease_free_point
from .fitting import (DEFAULT_BOUNDS, FITTABLE, FitConfig, FitError, fit_isolation_polynomial, fit_model,
                      moving_average, read_cases_csv, read_isolation_csv, transform_cases)
from .model import PARAM_NAMES, Params, ParameterError, State3
from .odeint import IntegrationError, IntegratorConfig, ThetaSchedule, integrate
from .sweep import DEFAULT_HORIZON, run_sweep

log = logging.getLogger("sirsi")

OUTPUT_ENV = "SIRSI_OUTPUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class ConfigError(Exception):
    pass


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _add_model_options(p: argparse.ArgumentParser):
    g = p.add_argument_group("model")
    g.add_argument("--preset", help=f"city parameters: {', '.join(presets.names())}")
    for name in PARAM_NAMES:
        g.add_argument(f"--{name}", type=float)
    g.add_argument("--population", type=float, help="population N for count outputs")
    g.add_argument("--out", help=f"output directory (default: ${OUTPUT_ENV} or .)")


def _add_integrator_options(p: argparse.ArgumentParser):
    g = p.add_argument_group("integrator")
    g.add_argument("--rel-tol", type=float)
    g.add_argument("--abs-tol", type=float)
    g.add_argument("--max-steps", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sirsi", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="integrate one scenario")
    _add_model_options(sim)
    _add_integrator_options(sim)
    sim.add_argument("--s0", type=float, help="initial susceptible fraction")
    sim.add_argument("--i0", type=float, help="initial infected fraction (default 1 - s0)")
    sim.add_argument("--sick0", type=float, help="initial sick fraction (default 0)")
    sim.add_argument("--initial", choices=["preset", "disease-free"],
                     help="start from preset (s0, i0, 0) or from the disease-free point")
    sim.add_argument("--theta-poly", type=_floats, help="time-varying theta coefficients c0,c1,...")
    sim.add_argument("--t0", type=float)
    sim.add_argument("--t1", type=float, help="horizon in days (default 365)")
    sim.add_argument("--sample-step", type=float)
    sim.add_argument("--start-date", help="calendar date of t0 (ISO), for the peak date")

    eq = sub.add_parser("equilibria", help="equilibrium points and their stability")
    _add_model_options(eq)

    fit = sub.add_parser("fit", help="fit model parameters to confirmed cases")
    _add_model_options(fit)
    _add_integrator_options(fit)
    fit.add_argument("--cases", help="CSV with header date,confirmed")
    fit.add_argument("--cases-transform", choices=["none", "diff", "active"])
    fit.add_argument("--active-window", type=int)
    fit.add_argument("--isolation", help="CSV with header date,index")
    fit.add_argument("--isolation-percent", action="store_true", default=None,
                     help="isolation index given in percent")
    fit.add_argument("--theta-mode", choices=["constant", "polynomial"])
    fit.add_argument("--ma-window", type=int, help="moving average window for the index (1 = raw)")
    fit.add_argument("--poly-degree", type=int)
    fit.add_argument("--free", help=f"comma list of free parameters from {','.join(FITTABLE)}")
    fit.add_argument("--bound", action="append", metavar="NAME=LO:HI")
    fit.add_argument("--s0", type=float, help="fixed s0 when s0 is not free")
    fit.add_argument("--max-iterations", type=int)

    sw = sub.add_parser("sweep", help="steady states over a (theta, omega) grid")
    _add_model_options(sw)
    _add_integrator_options(sw)
    sw.add_argument("--s0", type=float)
    sw.add_argument("--i0", type=float)
    for axis in ("theta", "omega"):
        sw.add_argument(f"--{axis}-min", type=float)
        sw.add_argument(f"--{axis}-max", type=float)
        sw.add_argument(f"--{axis}-n", type=int)
    sw.add_argument("--horizon", type=float)
    sw.add_argument("--settle-tol", type=float)
    sw.add_argument("--workers", type=int)

    pre = sub.add_parser("preset", help="inspect city presets")
    pre_sub = pre.add_subparsers(dest="preset_command", required=True)
    dump = pre_sub.add_parser("dump", help="print a preset's published values")
    dump.add_argument("city", choices=presets.names())
    return parser


def _merge_config(args: argparse.Namespace) -> dict:
    opts = {}
    if args.config:
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {args.config}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
        opts.update({k: v for k, v in doc.items() if not isinstance(v, dict) or k == "bounds"})
        section = doc.get(args.command)
        if isinstance(section, dict):
            opts.update(section)
    for key, value in vars(args).items():
        if value is not None:
            opts[key] = value
    return opts


def _base_params(opts: dict) -> tuple[Params, presets.CityPreset | None]:
    preset = presets.get(opts["preset"]) if opts.get("preset") else None
    values = preset.params.to_dict() if preset else {"omega": 0.0}
    for name in PARAM_NAMES:
        if opts.get(name) is not None:
            values[name] = float(opts[name])
    missing = [n for n in PARAM_NAMES if n not in values]
    if missing:
        raise ConfigError(f"missing model parameters {missing}; give --preset or explicit values")
    return Params(**values), preset


def _population(opts, preset):
    if opts.get("population") is not None:
        return float(opts["population"])
    return float(preset.population) if preset else None


def _out_dir(opts) -> Path:
    path = Path(opts.get("out") or os.environ.get(OUTPUT_ENV) or ".")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path: Path, doc):
    text = json.dumps(doc, indent=2) + "\n"
    path.write_text(text)
    return text


def _integrator(opts, **defaults) -> IntegratorConfig:
    kwargs = dict(defaults)
    for key in ("rel_tol", "abs_tol", "max_steps", "t0", "t1", "sample_step"):
        if opts.get(key) is not None:
            kwargs[key] = opts[key]
    return IntegratorConfig(**kwargs)


def cmd_simulate(opts: dict) -> int:
    params, preset = _base_params(opts)
    cfg = _integrator(opts)
    if opts.get("initial") == "disease-free":
        x0 = disease_free_point(params)
    else:
        if opts.get("s0") is not None:
            s0 = float(opts["s0"])
            i0 = float(opts["i0"]) if opts.get("i0") is not None else 1.0 - s0
        elif preset is not None:
            s0, i0 = preset.s0, preset.i0
        else:
            raise ConfigError("initial state needed: --s0 (and optionally --i0) or --preset")
        x0 = State3(s0, i0, float(opts.get("sick0") or 0.0))
    sched = ThetaSchedule.polynomial(opts["theta_poly"]) if opts.get("theta_poly") else None
    series = integrate(params, x0, sched, cfg)

    out = _out_dir(opts)
    series.to_csv(out / "trajectory.csv")
    sick = series["sick"]
    k = int(np.argmax(sick))
    final = series.values[-1]
    summary = {
        "params": params.to_dict(),
        "initial_state": dict(zip(("s", "i", "sick"), map(float, x0))),
        "final_state": {"s": float(final[0]), "i": float(final[1]), "sick": float(final[2]),
                        "r": float(1.0 - final.sum())},
        "peak_sick": float(sick[k]),
        "peak_day": float(series.times[k]),
    }
    if opts.get("start_date"):
        start = dt.date.fromisoformat(opts["start_date"])
        summary["peak_date"] = (start + dt.timedelta(days=float(series.times[k]) - cfg.t0)).isoformat()
    population = _population(opts, preset)
    if population:
        summary["population"] = population
        summary["peak_cases"] = float(sick[k]) * population
    _write_json(out / "summary.json", summary)
    log.info("wrote %s and %s", out / "trajectory.csv", out / "summary.json")
    return EXIT_OK


def cmd_equilibria(opts: dict) -> int:
    params, _ = _base_params(opts)
    df, en = classify(params)
    doc = {"params": params.to_dict(), "disease_free": df.to_dict(), "endemic": en.to_dict()}
    text = _write_json(_out_dir(opts) / "equilibria.json", doc)
    sys.stdout.write(text)
    return EXIT_OK


def _parse_bounds(opts) -> dict:
    bounds = dict(DEFAULT_BOUNDS)
    cfg_bounds = opts.get("bounds") or {}
    for name, pair in cfg_bounds.items():
        bounds[name] = (float(pair[0]), float(pair[1]))
    for item in opts.get("bound") or []:
        try:
            name, rng = item.split("=")
            lo, hi = rng.split(":")
            bounds[name.strip()] = (float(lo), float(hi))
        except ValueError as exc:
            raise ConfigError(f"bad --bound {item!r}; expected NAME=LO:HI") from exc
    return bounds


def cmd_fit(opts: dict) -> int:
    params, preset = _base_params(opts)
    population = _population(opts, preset)
    if not opts.get("cases"):
        raise ConfigError("fit needs --cases")
    if not population:
        raise ConfigError("fit needs --population (or a preset)")
    polynomial = (opts.get("theta_mode") or "constant") == "polynomial"
    if polynomial and not opts.get("isolation"):
        raise ConfigError("polynomial theta needs --isolation")

    free = opts.get("free") or FITTABLE
    if isinstance(free, str):
        free = [v.strip() for v in free.split(",") if v.strip()]
    kwargs = {}
    if opts.get("max_iterations") is not None:
        kwargs["max_iterations"] = int(opts["max_iterations"])
    for key in ("rel_tol", "abs_tol"):
        if opts.get(key) is not None:
            kwargs[key] = float(opts[key])
    s0 = opts.get("s0")
    if s0 is None:
        s0 = preset.s0 if preset else 1.0
    cfg = FitConfig(base=params, s0=float(s0), free_params=tuple(free), bounds=_parse_bounds(opts), **kwargs)

    cases = read_cases_csv(opts["cases"], population)
    cases = transform_cases(cases, opts.get("cases_transform") or "none", int(opts.get("active_window") or 14))
    theta = None
    if polynomial:
        iso = read_isolation_csv(opts["isolation"], percent=bool(opts.get("isolation_percent")))
        window = int(opts.get("ma_window") or 21)
        if window > 1:
            iso = moving_average(iso, window)
        theta = fit_isolation_polynomial(iso, int(opts.get("poly_degree") or 6), origin=cases.dates[0])
    result = fit_model(cases, theta, cfg)

    out = _out_dir(opts)
    doc = result.to_dict()
    if theta is not None:
        doc["theta_schedule"] = theta.to_dict()
    _write_json(out / "fit_result.json", doc)
    result.curve_csv(out / "fitted_curve.csv")
    log.info("fit %s after %d iterations, residual norm %.6g", result.status, result.iterations,
             result.residual_norm)
    return EXIT_OK


def cmd_sweep(opts: dict) -> int:
    params, preset = _base_params(opts)
    if opts.get("s0") is not None:
        s0 = float(opts["s0"])
        i0 = float(opts["i0"]) if opts.get("i0") is not None else 1.0 - s0
    elif preset is not None:
        s0, i0 = preset.s0, preset.i0
    else:
        raise ConfigError("initial state needed: --s0 or --preset")

    def axis(name):
        lo, hi, n = (opts.get(f"{name}_{k}") for k in ("min", "max", "n"))
        return np.linspace(0.0 if lo is None else float(lo), 0.7 if hi is None else float(hi),
                           71 if n is None else int(n))

    grid = run_sweep(params, State3(s0, i0, 0.0), axis("theta"), axis("omega"),
                     horizon=float(opts.get("horizon") or DEFAULT_HORIZON),
                     settle_tol=float(opts.get("settle_tol") or 1e-9),
                     cfg=_integrator(opts), workers=int(opts.get("workers") or 1))
    out = _out_dir(opts)
    grid.to_csv(out / "sweep_grid.csv")
    grid.to_json(out / "sweep_grid.json", population=_population(opts, preset))
    log.info("sweep: %d cells, %d settled, %d failed", grid.settled.size, int(grid.settled.sum()),
             len(grid.failures))
    return EXIT_OK


def cmd_preset(opts: dict) -> int:
    sys.stdout.write(presets.dump(opts["city"]))
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "equilibria": cmd_equilibria, "fit": cmd_fit,
            "sweep": cmd_sweep, "preset": cmd_preset}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        opts = _merge_config(args)
        return COMMANDS[args.command](opts)
    except (ConfigError, ParameterError, KeyError) as exc:
        print(f"sirsi: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, FitError, FloatingPointError) as exc:
        print(f"sirsi: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"sirsi: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"sirsi: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
