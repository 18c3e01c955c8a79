"""Command-line front end.

Every command writes plain data (CSV or JSON) for external plotting.
Exit codes: 0 success, 2 usage/config/data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import analytic
from .budget import compute_budget, frequency_grid
from .exceptions import NumericalError, OptodipError
from .fit import (
    fit_dip,
    fit_ratio,
    read_ratio_csv,
    read_spectrum_csv,
    synthesize_dip_spectrum,
    synthesize_ratio_data,
    write_ratio_csv,
    write_spectrum_csv,
)
from .params import PRESETS, load_config, preset

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

TWO_PI = 2 * math.pi

SWEEP_COLUMNS = {
    "detuning": "detuning_over_kappa",
    "kappa_in": "kappa_in_over_kappa",
    "power": "intracavity_power_w",
    "eta": "mode_matching",
}


class UsageError(OptodipError, ValueError):
    pass


def _params(args, required=True):
    if args.config and args.preset:
        raise UsageError("--config and --preset are mutually exclusive")
    if args.config:
        return load_config(args.config)
    if args.preset:
        return preset(args.preset)
    if required:
        raise UsageError("a parameter source is required: --config PATH or --preset NAME")
    return None


def _fmt(value):
    return repr(float(value))


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv_text(header, rows):
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _json_text(obj):
    return json.dumps(obj, indent=2) + "\n"


# -- commands ----------------------------------------------------------------


def cmd_budget(args):
    params = _params(args)
    if args.points < 2:
        raise UsageError("--points must be at least 2")
    if not 0 < args.fmin < args.fmax:
        raise UsageError("need 0 < --fmin < --fmax")
    freq = frequency_grid(args.fmin, args.fmax, args.points, log=args.log)
    budget = compute_budget(params, freq, args.port, args.engine, amplitude=not args.power)
    if args.format == "json":
        payload = {
            "summary": budget.summary(),
            "columns": {name: col.tolist() for name, col in zip(budget.header(), budget.rows().T)},
        }
        _emit(_json_text(payload), args.out)
        return EXIT_OK
    _emit(_csv_text(budget.header(), budget.rows()), args.out)
    if args.engine == "both":
        summary = _json_text(budget.summary())
        if args.out:
            out = Path(args.out)
            out.with_name(out.stem + ".summary.json").write_text(summary)
        else:
            sys.stderr.write(summary)
    return EXIT_OK


def _frequencies_record(params, eta):
    return analytic.characteristic_frequencies(params, eta).as_hz()


def cmd_frequencies(args):
    params = _params(args)
    _emit(_json_text(_frequencies_record(params, args.eta)), args.out)
    return EXIT_OK


def _swept(params, variable, value):
    kappa = params.total_decay
    if variable == "detuning":
        return params.replace(detuning=value * kappa)
    if variable == "kappa_in":
        return params.replace(input_coupling=value * kappa)
    if variable == "power":
        return params.replace(intracavity_power=value)
    return params.replace(mode_matching=value)


def cmd_sweep(args):
    params = _params(args)
    if args.points < 1:
        raise UsageError("--points must be at least 1")
    if args.points == 1:
        values = np.array([args.start])
    elif args.log:
        values = frequency_grid(args.start, args.stop, args.points, log=True)
    else:
        values = np.linspace(args.start, args.stop, args.points)
    header = [SWEEP_COLUMNS[args.var], "omega_opt_hz", "omega_dip_hz", "omega_dip_measured_hz", "ratio_opt_over_dip_m"]
    rows = []
    for value in values:
        point = _swept(params, args.var, float(value))
        eta = None if args.var == "eta" else args.eta
        record = _frequencies_record(point, eta)
        rows.append([value] + [record[k] for k in header[1:]])
    _emit(_csv_text(header, rows), args.out)
    return EXIT_OK


def cmd_fit_dip(args):
    data = read_spectrum_csv(args.data, column=args.column)
    params = _params(args, required=False)
    guess = [
        None if args.dip_guess_hz is None else TWO_PI * args.dip_guess_hz,
        None if args.width_guess_hz is None else TWO_PI * args.width_guess_hz,
        None,
    ]
    if guess[0] is None and params is not None:
        guess[0] = analytic.omega_dip_measured(params, args.eta)
    band = None
    if args.fmin is not None or args.fmax is not None:
        band = (
            args.fmin if args.fmin is not None else data.freq_hz[0],
            args.fmax if args.fmax is not None else data.freq_hz[-1],
        )
    result = fit_dip(
        data,
        initial_guess=None if guess == [None, None, None] else guess,
        band=band,
        max_iter=args.max_iter,
    )
    _emit(_json_text(result.to_dict()), args.out)
    return EXIT_OK


def cmd_fit_ratio(args):
    data = read_ratio_csv(args.data)
    params = _params(args)
    eta = params.mode_matching if args.eta is None else args.eta
    result = fit_ratio(data, params.total_decay, eta, branch=args.branch)
    record = result.to_dict()
    record["eta"] = eta
    record["kappa_hz"] = params.total_decay / TWO_PI
    _emit(_json_text(record), args.out)
    return EXIT_OK


def cmd_synth_dip(args):
    if args.points < 2:
        raise UsageError("--points must be at least 2")
    freq = frequency_grid(args.fmin, args.fmax, args.points, log=args.log)
    spectrum = synthesize_dip_spectrum(
        TWO_PI * args.dip_hz, TWO_PI * args.width_hz, args.overall, freq, args.noise, args.seed
    )
    write_spectrum_csv(spectrum, args.out or sys.stdout)
    return EXIT_OK


def cmd_synth_ratio(args):
    params = _params(args)
    kappa = params.total_decay
    detuning = np.array([float(v) for v in args.detuning_over_kappa.split(",")]) * kappa
    eta = params.mode_matching if args.eta is None else args.eta
    data = synthesize_ratio_data(detuning, kappa, args.kappa_in_over_kappa, eta, args.noise, args.seed)
    write_ratio_csv(data, args.out or sys.stdout)
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def _add_source(p):
    p.add_argument("--config", metavar="PATH", help="JSON parameter document")
    p.add_argument("--preset", choices=sorted(PRESETS), help="built-in parameter set")


def _add_out(p):
    p.add_argument("--out", metavar="PATH", help="output file (default: stdout)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="optodip",
        description="Noise budgets and fits for amplitude readout of a detuned optomechanical cavity.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("budget", help="SQL-normalised noise budget on a frequency grid")
    _add_source(p)
    p.add_argument("--port", choices=["ref", "tra"], default="ref")
    p.add_argument("--engine", choices=["closed", "exact", "both"], default="closed")
    p.add_argument("--fmin", type=float, default=10.0, help="Hz")
    p.add_argument("--fmax", type=float, default=1e5, help="Hz")
    p.add_argument("--points", type=int, default=500)
    p.add_argument("--log", action="store_true", help="logarithmic frequency grid")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--power", action="store_true", help="emit power ratios instead of amplitude ratios")
    _add_out(p)
    p.set_defaults(func=cmd_budget)

    p = sub.add_parser("frequencies", help="optical-spring and dip frequencies")
    _add_source(p)
    p.add_argument("--eta", type=float, help="mode-matching override")
    _add_out(p)
    p.set_defaults(func=cmd_frequencies)

    p = sub.add_parser("sweep", help="characteristic frequencies against one parameter")
    _add_source(p)
    p.add_argument("--var", choices=sorted(SWEEP_COLUMNS), required=True)
    p.add_argument("--start", type=float, required=True)
    p.add_argument("--stop", type=float, required=True)
    p.add_argument("--points", type=int, default=50)
    p.add_argument("--log", action="store_true")
    p.add_argument("--eta", type=float, help="mode-matching override")
    _add_out(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fit-dip", help="fit the jittered dip model to a spectrum CSV")
    p.add_argument("data", help="CSV with freq_hz,asd[,sigma]")
    _add_source(p)
    p.add_argument("--column", default="asd", help="value column to fit")
    p.add_argument("--fmin", type=float, help="band low edge, Hz")
    p.add_argument("--fmax", type=float, help="band high edge, Hz")
    p.add_argument("--dip-guess-hz", type=float)
    p.add_argument("--width-guess-hz", type=float)
    p.add_argument("--eta", type=float, help="mode matching used for the model-based guess")
    p.add_argument("--max-iter", type=int, default=500)
    _add_out(p)
    p.set_defaults(func=cmd_fit_dip)

    p = sub.add_parser("fit-ratio", help="fit kappa_in/kappa to spring/dip ratios")
    p.add_argument("data", help="CSV with detuning_hz,ratio,sigma")
    _add_source(p)
    p.add_argument("--eta", type=float, help="mode matching (default: from parameters)")
    p.add_argument("--branch", choices=["over", "under"], default="over")
    _add_out(p)
    p.set_defaults(func=cmd_fit_ratio)

    p = sub.add_parser("synth-dip", help="synthetic dip spectrum for testing fits")
    p.add_argument("--dip-hz", type=float, default=1180.0)
    p.add_argument("--width-hz", type=float, default=70.0)
    p.add_argument("--overall", type=float, default=1.0)
    p.add_argument("--fmin", type=float, default=300.0)
    p.add_argument("--fmax", type=float, default=3000.0)
    p.add_argument("--points", type=int, default=400)
    p.add_argument("--log", action="store_true")
    p.add_argument("--noise", type=float, default=0.01, help="relative noise")
    p.add_argument("--seed", type=int, default=0)
    _add_out(p)
    p.set_defaults(func=cmd_synth_dip)

    p = sub.add_parser("synth-ratio", help="synthetic ratio data for testing fits")
    _add_source(p)
    p.add_argument("--kappa-in-over-kappa", type=float, default=0.81)
    p.add_argument("--eta", type=float)
    p.add_argument("--detuning-over-kappa", default="0.25,0.5,0.75,1.0")
    p.add_argument("--noise", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=0)
    _add_out(p)
    p.set_defaults(func=cmd_synth_ratio)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"optodip: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OptodipError, ValueError, OSError) as exc:
        print(f"optodip: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
