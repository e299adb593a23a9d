"""Command-line interface: ``lowmach {simulate,sweep,energy-audit,print-model}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .diagnostics import energy_audit, trajectory_rows
from .errors import ConfigError, LowMachError
from .initdata import make_well_prepared
from .io import (format_config, parse_config, write_snapshot_csv, write_sweep_json,
                 write_trajectory_csv)
from .kernels import BACKEND
from .models import ModelId, active_fields
from .scheme import simulate
from .sweep import mach_sweep

EXIT_OK, EXIT_USAGE, EXIT_FAILED = 0, 1, 2

_COMMON = """\
  R+ = a+ rho+,  R- = a- rho-,  a+ + a- = 1,  p_k = rho_k^gamma_k exp(S_k)"""

MODEL_TEXT = {
    ModelId.M1: ("one-phase isentropic Navier-Stokes", """\
  d_t rho + d_x(rho u) = 0
  d_t(rho u) + d_x(rho u^2 + p/eps^2) = (2 mu + lambda) d_xx u
  p = rho^gamma_plus"""),
    ModelId.M2: ("two-phase, one velocity, algebraic pressure closure", """\
  d_t R+ + d_x(R+ u) = 0
  d_t R- + d_x(R- u) = 0
  d_t m + d_x(m u + (a+ p+ + a- p-)/eps^2) = (2 mu + lambda) d_xx u,   m = (R+ + R-) u
  p+(R+/a+) = p-(R-/a-)                      (S+ = S- = 0)"""),
    ModelId.M3: ("two-phase, one velocity, relaxation (PDE) closure", """\
  d_t R+ + d_x(R+ u) = 0
  d_t R- + d_x(R- u) = 0
  d_t m + d_x(m u + (a+ p+ + a- p-)/eps^2) = (2 mu + lambda) d_xx u
  d_t a+ + u d_x a+ = a+ a- (p+ - p-) / (eps^2 tau_relax)"""),
    ModelId.M4: ("two-phase, one velocity, non-isentropic, algebraic closure", """\
  d_t R+ + d_x(R+ u) = 0
  d_t R- + d_x(R- u) = 0
  d_t m + d_x(m u + (a+ p+ + a- p-)/eps^2) = (2 mu + lambda) d_xx u
  d_t S+ + u d_x S+ = 0,   d_t S- + u d_x S- = 0
  p+(R+/a+, S+) = p-(R-/a-, S-)"""),
    ModelId.M5: ("two-phase, two velocities, isentropic, algebraic closure", """\
  d_t R+ + d_x(R+ u+) = 0
  d_t R- + d_x(R- u-) = 0
  d_t m+ + d_x(m+ u+) + a+ d_x p+ / eps^2 + p_int d_x a+ = F+
  d_t m- + d_x(m- u-) + a- d_x p- / eps^2 + p_int d_x a- = F-
  p+(R+/a+) = p-(R-/a-)
  F+ = -F- = |u+ - u-| (u- - u+) / eta   (only when eta_drag > 0)"""),
    ModelId.M6: ("two-phase, two velocities, non-isentropic, algebraic closure", """\
  d_t R+ + d_x(R+ u+) = 0
  d_t R- + d_x(R- u-) = 0
  d_t m+ + d_x(m+ u+) + a+ d_x p+ / eps^2 + p_int d_x a+ = F+
  d_t m- + d_x(m- u-) + a- d_x p- / eps^2 + p_int d_x a- = F-
  d_t S+ + u+ d_x S+ = 0,   d_t S- + u- d_x S- = 0
  p+(R+/a+, S+) = p-(R-/a-, S-)"""),
    ModelId.M7: ("two-phase, two velocities, non-isentropic, relaxation closure", """\
  d_t R+ + d_x(R+ u+) = 0
  d_t R- + d_x(R- u-) = 0
  d_t m+ + d_x(m+ u+) + a+ d_x p+ / eps^2 + p_int d_x a+ = F+
  d_t m- + d_x(m- u-) + a- d_x p- / eps^2 + p_int d_x a- = F-
  d_t S+ + u+ d_x S+ = 0,   d_t S- + u- d_x S- = 0
  d_t a+ + u+ d_x a+ = a+ a- (p+ - p-) / (eps^2 tau_relax)"""),
}


def describe_model(model: ModelId) -> str:
    model = ModelId(model)
    title, eqs = MODEL_TEXT[model]
    lines = [f"{model.value}: {title}", "", eqs, _COMMON, "",
             "active fields: " + ", ".join(sorted(active_fields(model)))]
    if model.two_velocity:
        lines.append("p_int: pint_rule (equilibrium-pressure, or constant(value))")
    if model.pde_closure:
        lines.append("requires: tau_relax > 0")
    return "\n".join(lines) + "\n"


class _Parser(argparse.ArgumentParser):
    """argparse with exit code 1 and the flag table on usage errors."""

    def error(self, message):
        self.print_help(sys.stderr)
        sys.stderr.write(f"\nerror: {message}\n")
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lowmach", description="Low-Mach limit experiments for two-phase flow models.")
    parser.add_argument("--version", action="version", version=f"lowmach {__version__} ({BACKEND})")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, metavar="PATH", help="run configuration file")
        p.add_argument("--quiet", action="store_true", help="print nothing on success")

    p = sub.add_parser("simulate", help="run one simulation, write trajectory and snapshot CSVs")
    common(p)
    p.add_argument("--out", default=".", metavar="DIR", help="output directory (default: .)")
    p = sub.add_parser("sweep", help="run an epsilon ladder and write the sweep report")
    common(p)
    p.add_argument("--out", default=".", metavar="DIR", help="output directory (default: .)")
    p.add_argument("--workers", type=int, default=1, metavar="N", help="parallel runs (default: 1)")
    p = sub.add_parser("energy-audit", help="simulate and check the discrete energy inequality")
    common(p)
    p.add_argument("--out", default=None, metavar="DIR", help="also write the trajectory CSV here")
    p = sub.add_parser("print-model", help="list a model's equations and active fields")
    common(p, config_required=False)
    p.add_argument("model", nargs="?", help="M1 ... M7 (default: the model named in --config)")
    return parser


def _tag(config) -> str:
    return f"{ModelId(config.model).value}_eps{config.epsilon:g}"


def _simulate(args) -> int:
    config = parse_config(args.config)
    traj = simulate(config, make_well_prepared(config))
    out = Path(args.out)
    write_trajectory_csv(out / f"{_tag(config)}_trajectory.csv", trajectory_rows(traj, config))
    write_snapshot_csv(out / f"{_tag(config)}_snapshots.csv", traj, config)
    if not args.quiet:
        print(f"{_tag(config)}: {traj.n_steps} steps to t={traj.final.time:.6g}; wrote {out}/")
    return EXIT_OK


def _sweep(args) -> int:
    config = parse_config(args.config)
    if args.workers < 1:
        raise ConfigError("--workers must be >= 1")
    report = mach_sweep(config, workers=args.workers, keep_rows=True)
    out = Path(args.out)
    for run in report.runs:
        if run.rows:
            write_trajectory_csv(out / f"{ModelId(config.model).value}_eps{run.epsilon:g}_trajectory.csv",
                                 run.rows)
    write_sweep_json(out / f"{ModelId(config.model).value}_sweep.json", report)
    if not args.quiet:
        for run in report.runs:
            status = run.error or f"{run.n_steps} steps"
            print(f"eps={run.epsilon:g}: {status} ({run.wall_time:.1f} s)")
        for name, o in report.orders.items():
            print(f"order {name}: " + ("vanished" if o is None else f"{o[0]:.3f} (residual {o[1]:.2e})"))
        for c in report.checks:
            print(f"[{'pass' if c.passed else 'FAIL'}] {c.name}: {c.detail}")
    return EXIT_OK if report.passed else EXIT_FAILED


def _energy_audit(args) -> int:
    config = parse_config(args.config)
    traj = simulate(config, make_well_prepared(config))
    report = energy_audit(traj, config)
    if args.out is not None:
        write_trajectory_csv(Path(args.out) / f"{_tag(config)}_trajectory.csv",
                             trajectory_rows(traj, config))
    if not args.quiet or not report.passed:
        print(report.summary())
    return EXIT_OK if report.passed else EXIT_FAILED


def _print_model(args) -> int:
    if args.model is not None:
        try:
            model = ModelId(args.model)
        except ValueError:
            raise ConfigError(f"unknown model {args.model!r}") from None
    elif args.config is not None:
        model = parse_config(args.config).model
    else:
        raise ConfigError("print-model needs a model name or --config")
    sys.stdout.write(describe_model(model))
    if args.config is not None and not args.quiet:
        sys.stdout.write("\nconfiguration:\n" + format_config(parse_config(args.config)))
    return EXIT_OK


COMMANDS = {"simulate": _simulate, "sweep": _sweep, "energy-audit": _energy_audit,
            "print-model": _print_model}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) if exc.code in (0, None) else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        sys.stderr.write(f"lowmach: {exc}\n")
        return EXIT_USAGE
    except LowMachError as exc:
        sys.stderr.write(f"lowmach: run failed: {exc}\n")
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
