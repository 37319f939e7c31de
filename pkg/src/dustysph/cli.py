"""Command-line front end.

    dustysph run --preset DS1 --out ds1/ [--snapshots K] [--compare-reference]
                 [--probe x=0] [--method idic|mk]
    dustysph run --config run.ini --out out/
    dustysph oracle dustywave --preset DW2 --table
    dustysph oracle dustyshock --preset DS1 --time 0.2 --out shock.csv
    dustysph bench-drag --n 8,16,32,64,128

Exit codes: 0 success, 1 usage, 2 simulation failure, 3 oracle failure.
"""
from __future__ import annotations

import argparse
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import core, output
from .core import ConfigError, RunPreset
from .drag import EmptyFractionCell
from .metrics import error_metrics, reference_fields, shock_reference_for
from .reference import OracleError, solve_dustywave, wave_solution_at

EXIT_OK, EXIT_USAGE, EXIT_SIM, EXIT_ORACLE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _probe(text):
    key, sep, val = text.partition("=")
    if key.strip() != "x" or not sep:
        raise argparse.ArgumentTypeError(f"probe must look like x=VALUE, got {text!r}")
    try:
        return float(val)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad probe position {val!r}") from None


def _int_list(text):
    try:
        out = [int(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError("sizes must be positive")
    return out


def _float_list(text):
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser():
    p = _Parser(prog="dustysph", description="1D two-fluid SPH for gas with dust fractions")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run a preset or a config file")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", help=f"one of {', '.join(core.PRESETS)}")
    src.add_argument("--config", type=Path, help="INI config file")
    r.add_argument("--out", type=Path, default=Path("out"))
    r.add_argument("--snapshots", type=int, default=10, help="uniformly spaced snapshots (plus final)")
    r.add_argument("--compare-reference", action="store_true")
    r.add_argument("--probe", type=_probe, action="append", default=[], metavar="x=VAL")
    r.add_argument("--method", choices=core.METHODS)

    o = sub.add_parser("oracle", help="reference solutions")
    osub = o.add_subparsers(dest="problem", required=True, parser_class=_Parser)
    w = osub.add_parser("dustywave")
    w.add_argument("--preset", default="DW2")
    w.add_argument("--eps", type=_float_list)
    w.add_argument("--t", type=_float_list, dest="t_stop", help="stopping times")
    w.add_argument("--table", action="store_true", help="coefficient table (default)")
    w.add_argument("--time", type=float, help="sample the profile at this time instead")
    w.add_argument("--points", type=int, default=201)
    w.add_argument("--out", type=Path)
    s = osub.add_parser("dustyshock")
    s.add_argument("--preset", default="DS1")
    s.add_argument("--time", type=float, default=0.2)
    s.add_argument("--points", type=int, default=1001)
    s.add_argument("--out", type=Path)

    b = sub.add_parser("bench-drag", help="timing of the cell solve against N")
    b.add_argument("--n", type=_int_list, default=[8, 16, 32, 64, 128])
    b.add_argument("--cells", type=int, default=2000)
    b.add_argument("--repeats", type=int, default=5)
    b.add_argument("--out", type=Path)
    return p


def _emit(text, path):
    if path is None:
        sys.stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)


def _load_run(args):
    if args.preset:
        try:
            p = core.preset(args.preset)
        except KeyError as exc:
            raise UsageError(exc.args[0]) from None
    else:
        try:
            cfg = core.load_config(args.config)
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        p = RunPreset(args.config.stem, cfg, core.initial_for(cfg))
    if args.method:
        p = RunPreset(p.name, core.with_overrides(p.config, method=args.method), p.initial)
    core.validate_config(p.config)
    if args.snapshots < 0:
        raise UsageError("--snapshots must be non-negative")
    return p


def cmd_run(args):
    from .sim import run

    p = _load_run(args)
    result = run(p, n_snapshots=args.snapshots, probes=args.probe)
    state = result.state
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    for i, snap in enumerate(result.snapshots):
        output.write_snapshot(snap, out, i)

    metrics = {"preset": p.name, "method": p.config.method, "steps": result.steps,
               "time": state.time, "wall_time_s": result.wall_time,
               "wall_per_step_s": result.wall_time / max(result.steps, 1),
               "max_cell_momentum_imbalance": state.max_momentum_imbalance,
               "courant_limit": state.courant_limit, "courant_violations": state.courant_violations,
               "snapshots": [{"index": i, "time": s.time, "step": s.step,
                              "total_mass": s.total_mass} for i, s in enumerate(result.snapshots)]}
    if args.compare_reference:
        shock = None
        if p.config.problem == "dustyshock":
            shock = shock_reference_for(p.config, p.initial)
        for entry, snap in zip(metrics["snapshots"], result.snapshots):
            num, ref = reference_fields(snap, p.config, wave=state.wave, shock=shock)
            rep = error_metrics(num, ref, state.max_momentum_imbalance)
            entry["errors"] = {k: v.as_dict() for k, v in rep.fields.items()}

    for x, series in result.probes.items():
        cols = ["t", "v", "rho"]
        data = [series["t"], series["v"], series["rho"]]
        if state.wave is not None:
            ref = np.array([wave_solution_at(state.wave, np.array([x]), t)[1][0] for t in series["t"]])
            cols.append("v_reference")
            data.append(ref)
        output.write_series_csv(out / f"probe_x={x!r}.csv", cols, zip(*data),
                                header=f"preset={p.name}, x={x!r}, columns={','.join(cols)}")
    (out / "metrics.json").write_text(json.dumps(metrics, indent=2, default=float) + "\n")
    print(f"{p.name}: {result.steps} steps to t={state.time!r}, {len(result.snapshots)} snapshots "
          f"in {out}, max cell momentum imbalance {state.max_momentum_imbalance:.3e}")
    return EXIT_OK


def _wave_params(args):
    p = core.preset(args.preset)
    eps = args.eps if args.eps is not None else list(p.config.epsilon)
    t = args.t_stop if args.t_stop is not None else list(p.config.stopping_times)
    if len(eps) == 1 and len(t) > 1:
        eps = eps * len(t)
    if len(eps) != len(t):
        raise UsageError("--eps and --t must have the same length")
    ic = p.initial if isinstance(p.initial, core.DustyWaveIC) else core.DustyWaveIC()
    return p, eps, t, ic


def cmd_oracle(args):
    if args.problem == "dustywave":
        try:
            p, eps, t, ic = _wave_params(args)
        except KeyError as exc:
            raise UsageError(exc.args[0]) from None
        sol = solve_dustywave(eps, t, p.config.sound_speed, ic.wavenumber, ic.amplitude, ic.rho_gas)
        buf = io.StringIO()
        if args.time is None:
            buf.write(f"# omega={sol.omega!r}, eps={list(map(float, eps))}, t_stop={list(map(float, t))}\n")
            buf.write("field,cos,sin\n")
            for name, (c, s) in sol.coefficients().items():
                buf.write(f"{name},{float(c)!r},{float(s)!r}\n")
        else:
            x = np.linspace(0.0, 1.0, args.points)
            rg, v, rd, u = wave_solution_at(sol, x, args.time)
            cols = ["x", "rho_g", "v"] + [f"rho_{j + 1}" for j in range(len(t))] + \
                   [f"u_{j + 1}" for j in range(len(t))]
            buf.write(f"# time={args.time!r}, preset={p.name}, columns={','.join(cols)}\n")
            buf.write(",".join(cols) + "\n")
            for row in np.column_stack([x, rg, v, *rd, *u]):
                buf.write(",".join(repr(float(val)) for val in row) + "\n")
        _emit(buf.getvalue(), args.out)
        return EXIT_OK

    try:
        p = core.preset(args.preset)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None
    if p.config.problem != "dustyshock":
        raise UsageError(f"{p.name} is not a shock-tube preset")
    if args.time < 0:
        raise UsageError("--time must be non-negative")
    ref = shock_reference_for(p.config, p.initial)
    x = np.linspace(0.0, 1.0, args.points)
    rho, v, pr, e = ref.sample(x, args.time)
    buf = io.StringIO()
    buf.write(f"# time={args.time!r}, preset={p.name}, p_star={ref.p_star!r}, v_star={ref.v_star!r}, "
              f"columns=x,rho_g,v,p,e\n")
    buf.write("x,rho_g,v,p,e\n")
    for row in np.column_stack([x, rho, v, pr, e]):
        buf.write(",".join(repr(float(val)) for val in row) + "\n")
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_bench(args):
    from .bench import bench_drag

    res = bench_drag(args.n, args.cells, args.repeats)
    lines = [f"# cells per batch={res['cells']}", "N,closed_form_s,dense_s"]
    lines += [f"{r['N']},{r['closed_form_s']:.6e},{r['dense_s']:.6e}" for r in res["rows"]]
    lines.append(f"# fitted exponent: closed form {res['closed_form_exponent']:.3f}, "
                 f"dense elimination {res['dense_exponent']:.3f}")
    print("\n".join(lines))
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(json.dumps(res, indent=2) + "\n")
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"run": cmd_run, "oracle": cmd_oracle, "bench-drag": cmd_bench}
    try:
        return handlers[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"dustysph: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OracleError as exc:
        print(f"dustysph: oracle failure: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except ValueError as exc:
        kind, code = ("oracle failure", EXIT_ORACLE) if args.command == "oracle" else \
            ("simulation failure", EXIT_SIM)
        print(f"dustysph: {kind}: {exc}", file=sys.stderr)
        return code
    except (EmptyFractionCell, FloatingPointError, OSError) as exc:
        print(f"dustysph: simulation failure: {exc}", file=sys.stderr)
        return EXIT_SIM


if __name__ == "__main__":
    sys.exit(main())
