"""Command-line front end: ``reicoh <subcommand> [options]``.

Every run writes a params record (``<cmd>_params.txt``, also echoed to
stdout), a CSV table and an SVG figure into ``--output-dir``. Diagnostics go
to stderr. Exit status: 0 on success or a converged fit, 2 when a fit did
not converge, 1 on any usage, schema or domain error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, afc, fitting, io, plotting, selftest
from .models import MODELS, TOOTH_SHAPES, afc_efficiency_analytic
from .quantities import DomainError

FIT_COMMANDS = {
    # subcommand -> (model, fit function, x column name, y column name, x label, y label, log x)
    "fit-decay": ("mims", fitting.fit_decay, "tau", "amp", "τ (µs)", "echo amplitude", False),
    "fit-temperature": ("gamma_t", fitting.fit_temperature, "T", "gamma", "T (K)", "Γh (kHz)", True),
    "fit-field": ("gamma_b", fitting.fit_field, "B", "gamma", "B (T)", "Γh (kHz)", False),
    "fit-hole": ("double_exp", fitting.fit_hole, "t", "area", "t (h)", "hole area", False),
    "fit-line": ("lorentzian", fitting.fit_line, "nu", "signal", "ν - ν0 (GHz)", "absorption", False),
}

# keys that may appear in a config file but never reach provenance
_LOCAL_KEYS = {"output_dir", "config"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _assignment(text):
    name, sep, val = text.partition("=")
    if not sep or not name.strip():
        raise argparse.ArgumentTypeError(f"expected name=value, got {text!r}")
    try:
        return name.strip(), float(val)
    except ValueError:
        raise argparse.ArgumentTypeError(f"value for {name!r} is not a number: {val!r}") from None


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--output-dir", default=".", help="directory for records, tables and plots")
    common.add_argument("--seed", type=int, default=0, help="64-bit seed recorded with every artifact")
    common.add_argument("--config", help="JSON file of option values; command-line flags take precedence")

    fit_opts = _Parser(add_help=False)
    fit_opts.add_argument("--input", help="CSV with x, y[, sigma] columns and unit-suffixed header")
    fit_opts.add_argument("--fix", action="append", type=_assignment, default=[], metavar="NAME=VAL")
    fit_opts.add_argument("--init", action="append", type=_assignment, default=[], metavar="NAME=VAL")

    parser = _Parser(prog="reicoh", description="Coherence-spectroscopy fits and AFC storage simulation.")
    parser.add_argument("--version", action="version", version=f"reicoh {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    for cmd, (model, *_rest) in FIT_COMMANDS.items():
        p = sub.add_parser(cmd, parents=[common, fit_opts], help=f"fit the {model} model")
        if cmd == "fit-field":
            p.add_argument("--temperature-k", type=float, help="sample temperature (K), held fixed")

    p = sub.add_parser("simulate-afc", parents=[common], help="simulate one AFC storage run")
    p.add_argument("--delta-mhz", type=float, default=1.0, help="tooth spacing (MHz)")
    p.add_argument("--finesse", type=float, default=4.0)
    p.add_argument("--d", type=float, default=1.0, help="peak optical depth at a tooth centre")
    p.add_argument("--d0", type=float, default=0.0, help="background optical depth")
    p.add_argument("--span-mhz", type=float, default=12.0, help="comb span (MHz)")
    p.add_argument("--tooth-shape", choices=TOOTH_SHAPES, default="square")
    p.add_argument("--grid-points", type=int, default=afc.DEFAULT_GRID_POINTS)
    p.add_argument("--pulse-fwhm-us", type=float, help="input intensity FWHM (default 0.15/Δ)")

    p = sub.add_parser("efficiency-curve", parents=[common], help="numeric vs closed-form efficiency")
    p.add_argument("--finesse", type=float, default=4.0)
    p.add_argument("--d0", type=float, default=0.0)
    p.add_argument("--tooth-shape", choices=TOOTH_SHAPES, default="square")
    p.add_argument(
        "--d-list", type=_float_list, default=[0.25, 0.5, 1.0, 2.0, 4.0, 8.0],
        help="tooth heights above d0, comma separated",
    )
    p.add_argument("--delta-mhz", type=float, default=1.0)
    p.add_argument("--span-mhz", type=float, help="comb span (default 40 tooth spacings)")
    p.add_argument("--grid-points", type=int, default=2**18)

    sub.add_parser("selftest", parents=[common], help="run the built-in invariant checks")
    return parser


def _subparser(parser, command):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise KeyError(command)


def _load_config(path, sub):
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    known = {a.dest for a in sub._actions if a.dest != "help"}
    out = {}
    for key, val in cfg.items():
        dest = key.replace("-", "_")
        if dest not in known or dest == "config":
            raise UsageError(f"unknown config key {key!r} for {sub.prog}")
        if dest in ("fix", "init"):
            if not isinstance(val, dict):
                raise UsageError(f"config key {key!r} must map parameter names to numbers")
            val = [(str(k), float(v)) for k, v in val.items()]
        out[dest] = val
    return out


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("reicoh: a subcommand is required (see --help)")
    if args.config:
        sub = _subparser(parser, args.command)
        sub.set_defaults(**_load_config(args.config, sub))
        args = parser.parse_args(argv)
    return args


def _run_config(args):
    """Resolved options that define a run, minus local paths."""
    cfg = {}
    for key, val in sorted(vars(args).items()):
        if key in _LOCAL_KEYS:
            continue
        if key in ("fix", "init"):
            val = {k: v for k, v in val}
        if key == "input" and val is not None:
            val = Path(val).name
        cfg[key] = val
    return cfg


def _provenance(args, extra=None):
    cfg = _run_config(args)
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    prov = {
        "tool": f"reicoh {__version__}",
        "command": args.command,
        "seed": args.seed,
        "config_sha256": hashlib.sha256(canon.encode()).hexdigest(),
    }
    prov.update(extra or {})
    return prov


def _stem(args):
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out / args.command.replace("-", "_")


def _emit(path, text):
    path.write_text(text)
    sys.stdout.write(text)


def _comment_lines(prov):
    return [f"{k}: {prov[k]}" for k in sorted(prov)]


def _named(pairs, model, what):
    out = {}
    for name, val in pairs:
        if name not in model.param_names:
            raise UsageError(f"{what}: unknown parameter {name!r}; expected one of {list(model.param_names)}")
        out[name] = val
    return out


def run_fit(args):
    model_name, fit, x_name, y_name, xlabel, ylabel, logx = FIT_COMMANDS[args.command]
    model = MODELS[model_name]
    if not args.input:
        raise UsageError(f"{args.command}: --input is required")
    loaded = io.load_dataset(args.input, args.command)
    data = loaded.dataset
    if data.duplicates:
        print(f"warning: {args.input} contains repeated x values", file=sys.stderr)
    fix = _named(args.fix, model, "--fix")
    init = _named(args.init, model, "--init")
    if args.command == "fit-field":
        t_fixed = args.temperature_k if args.temperature_k is not None else fix.get("T_fixed")
        if t_fixed is None:
            raise UsageError("fit-field: --temperature-k (or --fix T_fixed=...) is required")
        res = fit(data, temperature_k=t_fixed, fix=fix, init=init)
    else:
        res = fit(data, fix=fix, init=init)

    prov = _provenance(args, {"input_sha256": loaded.sha256})
    stem = _stem(args)
    _emit(Path(f"{stem}_params.txt"), io.fit_record(res, model.units, prov))

    y_fit, _ = model.evaluate(data.x, res.params)
    cols = [data.x, data.y, y_fit, data.y - y_fit]
    header = [f"{x_name}_{data.x_unit}", f"{y_name}_{data.y_unit}", "fit", "residual"]
    io.write_table(Path(f"{stem}_residuals.csv"), header, cols, _comment_lines(prov))

    if logx and np.all(data.x > 0):
        x_fine = np.geomspace(data.x.min(), data.x.max(), 400)
    else:
        x_fine = np.linspace(data.x.min(), data.x.max(), 400)
    y_fine, _ = model.evaluate(x_fine, res.params)
    title = ", ".join(f"{n}={v:.4g}" for n, v in zip(model.param_names, res.params))
    plotting.plot_fit(
        Path(f"{stem}.svg"), data.x, data.y, data.sigma, x_fine, y_fine, xlabel, ylabel, title, prov, logx=logx
    )
    if not res.converged:
        print(f"{args.command}: fit did not converge ({res.message})", file=sys.stderr)
        return 2
    if res.condition_warning:
        print(f"{args.command}: ill-conditioned normal matrix", file=sys.stderr)
    return 0


def run_simulate(args):
    spec = afc.CombSpec(args.span_mhz, args.delta_mhz, args.finesse, args.d, args.d0, args.tooth_shape)
    sim = afc.simulate(spec, pulse_fwhm_us=args.pulse_fwhm_us, n_grid=args.grid_points)
    ts = afc.storage_time(spec.delta)
    eta_closed = afc_efficiency_analytic(spec.tooth_height, spec.finesse, spec.d0, spec.tooth_shape)
    prov = _provenance(args)
    entries = [
        ("storage_time_us", ts, None, "us"),
        ("arrival_time_us", sim.echo.arrival_time, None, "us"),
        ("efficiency", sim.echo.efficiency, None, ""),
        ("efficiency_closed_form", eta_closed, None, ""),
        ("time_step_us", sim.input.dt, None, "us"),
        ("n_teeth", spec.n_teeth, None, ""),
        ("max_abs_H", float(np.max(np.abs(sim.H))), None, ""),
        ("acausal_energy_fraction", afc.acausal_energy_fraction(sim.H), None, ""),
    ]
    structured = {
        "kind": "afc",
        "comb": {
            "span": spec.span, "delta": spec.delta, "finesse": spec.finesse,
            "d_peak": spec.d_peak, "d0": spec.d0, "tooth_shape": spec.tooth_shape,
        },
        "grid_points": int(args.grid_points),
        "echo": {
            "arrival_time": sim.echo.arrival_time,
            "efficiency": sim.echo.efficiency,
            "window": list(sim.echo.window),
        },
    }
    stem = _stem(args)
    _emit(Path(f"{stem}_params.txt"), io.format_record(entries, structured, prov))

    # decimated waveforms over [-0.5, 2]·ts, about 2000 rows
    t = sim.input.times
    sel = np.nonzero((t >= -0.5 * ts) & (t <= 2.0 * ts))[0]
    step = max(1, sel.size // 2000)
    sel = sel[::step]
    peak = sim.input.intensity.max()
    i_in = sim.input.intensity / peak
    i_out = sim.output.intensity / peak
    io.write_table(
        Path(f"{stem}_waveforms.csv"),
        ["t_us", "input_intensity", "output_intensity"],
        [t[sel], i_in[sel], i_out[sel]],
        _comment_lines(prov),
    )
    plotting.plot_echo(Path(f"{stem}.svg"), t[sel], i_in[sel], t[sel], i_out[sel], ts, sim.echo.window, prov)
    print(
        f"echo at {sim.echo.arrival_time:.4f} µs (1/Δ = {ts:.4f}), efficiency {sim.echo.efficiency:.4%}",
        file=sys.stderr,
    )
    return 0


def run_efficiency(args):
    if not args.d_list:
        raise UsageError("efficiency-curve: --d-list is empty")
    rows = afc.efficiency_curve(
        args.finesse, args.d0, args.tooth_shape, args.d_list,
        delta=args.delta_mhz, span=args.span_mhz, n_grid=args.grid_points,
    )
    prov = _provenance(args)
    entries = []
    for d, num, ana in rows:
        entries.append((f"eta_numeric[d={d:g}]", num, None, ""))
        entries.append((f"eta_closed_form[d={d:g}]", ana, None, ""))
    structured = {
        "kind": "efficiency_curve",
        "finesse": args.finesse, "d0": args.d0, "tooth_shape": args.tooth_shape,
        "rows": [list(r) for r in rows],
    }
    stem = _stem(args)
    _emit(Path(f"{stem}_params.txt"), io.format_record(entries, structured, prov))
    d, num, ana = (list(c) for c in zip(*rows))
    io.write_table(Path(f"{stem}.csv"), ["d", "eta_numeric", "eta_closed_form"], [d, num, ana], _comment_lines(prov))
    title = f"F={args.finesse:g}, d0={args.d0:g}, {args.tooth_shape} teeth"
    plotting.plot_efficiency(Path(f"{stem}.svg"), d, num, ana, title, prov)
    return 0


def run_selftest(args):
    rows, entries = selftest.run(args.seed)
    prov = _provenance(args)
    structured = {"kind": "selftest", "checks": [[name, bool(ok)] for name, ok, _ in rows]}
    stem = _stem(args)
    Path(f"{stem}_params.txt").write_text(io.format_record(entries, structured, prov))
    print(selftest.format_table(rows))
    return 0 if all(ok for _, ok, _ in rows) else 2


RUNNERS = {"simulate-afc": run_simulate, "efficiency-curve": run_efficiency, "selftest": run_selftest}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
        runner = run_fit if args.command in FIT_COMMANDS else RUNNERS[args.command]
        return runner(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (io.SchemaError, DomainError, fitting.FitArgumentError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
