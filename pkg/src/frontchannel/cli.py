"""Command-line entry point: ``frontchannel {front,simulate,decay,sweep,verify}``."""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import diagnostics as dg
from . import output
from .errors import ConfigError, NumericalFailure
from .laminar import laminar_front, ode_residual
from .reaction import IgnitionNonlinearity

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
log = logging.getLogger("frontchannel")


def _threads(args):
    if args.threads is not None:
        return args.threads
    env = os.environ.get("FRONTCHANNEL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"FRONTCHANNEL_THREADS must be an integer, got {env!r}") from None
    return 1


def _config_text(args):
    if args.config is None:
        return ""
    try:
        return Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None


def _base_dir(args):
    return str(Path(args.config).resolve().parent) if args.config else None


def _out(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_front(args):
    text = _config_text(args)
    vals = cfgmod.resolved_values(cfgmod.parse_pairs(text))
    kind = args.kind or vals["reaction.kind"]
    theta0 = args.theta0 if args.theta0 is not None else vals["reaction.theta0"]
    amp = args.amplitude if args.amplitude is not None else vals["reaction.amplitude"]
    if kind == "tabulated":
        f = cfgmod.build_config(vals, _base_dir(args)).reaction
    else:
        f = IgnitionNonlinearity(kind, theta0, amp)
    prof = laminar_front(f, tol=args.tol)
    res = ode_residual(prof, f)
    out = _out(args)
    payload = {"c0": prof.c0, "residual_norm": res, "kind": f.kind, "theta0": f.theta0,
               "amplitude": f.amplitude}
    output.write_json(out / "front.json", payload)
    output.write_profile(prof, out / "profile.dat")
    print(json.dumps(payload, sort_keys=True))
    return EXIT_OK


def _load(args):
    text = _config_text(args)
    return text, cfgmod.parse_config(text, _base_dir(args), args.seed)


def cmd_simulate(args):
    from .sweep import analyse_run_dir, execute_run

    text, cfg = _load(args)
    if cfg.mode != "front":
        raise ConfigError("simulate needs init.mode = front (use the decay subcommand)")
    out = _out(args)
    rec = execute_run(text, out, args.seed, _base_dir(args))
    series = output.read_series(out / "series.csv")
    output.plot_series(series, out)
    report = analyse_run_dir(out, base_dir=_base_dir(args))
    output.write_json(out / "report.json", report.to_dict())
    sys.stdout.write(report.table())
    print(f"Bbar={rec.final['Bbar']:.10g} Nbar={rec.final['Nbar']:.10g} Ubar={rec.final['Ubar']:.10g}")
    return EXIT_OK if report.passed else EXIT_CHECK


def cmd_decay(args):
    from .coupled import run_decay

    text, cfg = _load(args)
    out = _out(args)
    series = run_decay(cfg)
    (out / "config.txt").write_text(text)
    output.write_csv(out / "decay.csv", ["t", "l1", "l2", "linf", "grad_l2"],
                     zip(series.times, series.l1, series.l2, series.linf, series.grad_l2))
    fit = dg.decay_analysis(series)
    l1 = np.asarray(series.l1)
    payload = {
        "alpha": fit.alpha, "c_hat": fit.c_hat, "prefactor": fit.prefactor,
        "fit_window": list(fit.window),
        "l1_initial": series.l1_initial,
        "l1_max_relative_change": float(np.max(np.abs(l1 / series.l1_initial - 1.0))),
        "max_dissipation_excess": series.max_dissipation_excess,
    }
    output.write_json(out / "decay_fit.json", payload)
    output.plot_decay(series, out)
    print(json.dumps(payload, sort_keys=True))
    return EXIT_OK


def cmd_sweep(args):
    from .sweep import make_spec, run_sweep

    text = _config_text(args)
    spec = make_spec(text, _out(args), _threads(args), args.seed, _base_dir(args))
    result = run_sweep(spec, refine=args.refine, flow_check=not args.no_flow_check)
    sys.stdout.write(result.report.table())
    return EXIT_OK if result.report.passed else EXIT_CHECK


def cmd_verify(args):
    from .sweep import analyse_run_dir

    run_dir = Path(args.run_dir)
    if (run_dir / "sweep_report.json").exists():
        report = json.loads((run_dir / "sweep_report.json").read_text())
        failed = [r["name"] for r in report["records"] if r["explicit"] and not r["passed"]]
        print(f"sweep report: {len(report['records'])} records, {len(failed)} hard failures")
        for name in failed:
            print(f"  FAIL {name}")
        return EXIT_OK if not failed else EXIT_CHECK
    if not (run_dir / "config.txt").exists():
        raise ConfigError(f"{run_dir} is not a run directory (no config.txt)")
    report = analyse_run_dir(run_dir, speed=args.speed)
    out = Path(args.out) if args.out != "." else run_dir
    out.mkdir(parents=True, exist_ok=True)
    output.write_json(out / "verify_report.json", report.to_dict())
    sys.stdout.write(report.table())
    return EXIT_OK if report.passed else EXIT_CHECK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value configuration file")
    common.add_argument("--out", metavar="DIR", default=".", help="output directory")
    common.add_argument("--threads", type=int, default=None,
                        help="worker processes (fallback: FRONTCHANNEL_THREADS, then 1)")
    common.add_argument("--seed", type=int, default=0, help="seed for perturbation noise")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(
        prog="frontchannel",
        description="Reactive fronts under Stokes-Boussinesq flow in a 2D channel.",
        epilog="configuration keys:\n" + cfgmod.help_text(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("front", parents=[common], help="laminar speed and profile")
    f.add_argument("--kind", choices=["quadratic-ignition", "linear-ignition", "tabulated"])
    f.add_argument("--theta0", type=float)
    f.add_argument("--amplitude", type=float)
    f.add_argument("--tol", type=float, default=1e-8)
    f.set_defaults(func=cmd_front)

    s = sub.add_parser("simulate", parents=[common], help="coupled front run")
    s.set_defaults(func=cmd_simulate)

    d = sub.add_parser("decay", parents=[common], help="advection-diffusion decay run")
    d.set_defaults(func=cmd_decay)

    w = sub.add_parser("sweep", parents=[common], help="(rho, nu) sweep")
    w.add_argument("--refine", action="store_true", help="repeat the sweep on the doubled grid")
    w.add_argument("--no-flow-check", action="store_true",
                   help="skip the stationary Stokes gradient check per run")
    w.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", parents=[common], help="re-check a run or sweep directory")
    v.add_argument("run_dir")
    v.add_argument("--speed", type=float, default=None,
                   help="reference front speed for the sandwich (default: c0)")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
