"""Run configuration files, trajectory CSVs and sweep JSON."""

from __future__ import annotations

import json
import math
from dataclasses import fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .diagnostics import TRAJECTORY_COLUMNS, trajectory_rows
from .eos import closure_project
from .errors import ConfigError
from .models import (Grid1D, InitSpec, ModelId, PerturbationProfile, PhysParams, PintRule,
                     RunConfig, default_params, validate)

SWEEP_SCHEMA = "lowmach.sweep/1"

_FLOAT_KEYS = ("gamma_plus", "gamma_minus", "mu_visc", "lambda_visc", "tau_relax", "eta_drag",
               "epsilon", "cfl", "length", "t_end", "u_mean", "c0")
_INT_KEYS = ("n_cells", "output_stride", "seed")
_PROFILE_PREFIXES = {
    "alpha_profile": "alpha_profile",
    "velocity_profile": "velocity_profile",
    "entropy_profile.plus": "entropy_plus",
    "entropy_profile.minus": "entropy_minus",
}
_PROFILE_FIELDS = {"kind": str, "k": int, "amplitude": float, "offset": float, "center": float,
                   "width": float, "modes": int, "seed": int}
_TOP_KEYS = ("model", "pint_rule", "sweep.epsilons") + _FLOAT_KEYS + _INT_KEYS


def _known(key: str) -> bool:
    if key in _TOP_KEYS:
        return True
    prefix, _, leaf = key.rpartition(".")
    return prefix in _PROFILE_PREFIXES and leaf in _PROFILE_FIELDS


def _number(text: str, kind, key: str, lineno: int):
    try:
        if kind is int:
            value = float(text)
            if not value.is_integer():
                raise ValueError
            return int(value)
        return float(text)
    except ValueError:
        raise ConfigError(f"line {lineno}: malformed number {text!r} for key {key!r}") from None


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    raw: dict[str, tuple[str, int]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source} line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not _known(key):
            raise ConfigError(f"{source} line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"{source} line {lineno}: duplicate key {key!r}")
        raw[key] = (value, lineno)

    if "model" not in raw:
        raise ConfigError(f"{source}: missing required key 'model'")
    try:
        model = ModelId(raw["model"][0])
    except ValueError:
        raise ConfigError(f"{source} line {raw['model'][1]}: unknown model {raw['model'][0]!r}") from None

    vals = {}
    for key in _FLOAT_KEYS:
        if key in raw:
            vals[key] = _number(raw[key][0], float, key, raw[key][1])
    for key in _INT_KEYS:
        if key in raw:
            vals[key] = _number(raw[key][0], int, key, raw[key][1])

    pkw = {k: vals[k] for k in ("gamma_plus", "gamma_minus", "mu_visc", "lambda_visc",
                                "tau_relax", "eta_drag") if k in vals}
    if "pint_rule" in raw:
        try:
            pkw["pint_rule"] = PintRule.parse(raw["pint_rule"][0])
        except ValueError as exc:
            raise ConfigError(f"{source} line {raw['pint_rule'][1]}: {exc}") from None
    params = default_params(model, **pkw)

    grid = Grid1D(**{k: vals[k] for k in ("n_cells", "length") if k in vals})
    seed = vals.get("seed", 0)
    init = InitSpec()
    for prefix, attr in _PROFILE_PREFIXES.items():
        sub = {leaf: raw[f"{prefix}.{leaf}"] for leaf in _PROFILE_FIELDS if f"{prefix}.{leaf}" in raw}
        if not sub:
            continue
        prof = getattr(init, attr)
        kw = {}
        for leaf, (value, lineno) in sub.items():
            kind = _PROFILE_FIELDS[leaf]
            kw[leaf] = value if kind is str else _number(value, kind, f"{prefix}.{leaf}", lineno)
        if kw.get("kind", prof.kind) == "random-smooth" and "seed" not in kw:
            kw["seed"] = seed
        setattr_kw = replace(prof, **kw)
        init = replace(init, **{attr: setattr_kw})
    ikw = {k: vals[k] for k in ("u_mean", "c0") if k in vals}
    if ikw:
        init = replace(init, **ikw)

    ladder = None
    if "sweep.epsilons" in raw:
        text_l, lineno = raw["sweep.epsilons"]
        items = [s.strip() for s in text_l.split(",") if s.strip()]
        ladder = tuple(_number(s, float, "sweep.epsilons", lineno) for s in items)
        if not ladder:
            raise ConfigError(f"{source} line {lineno}: empty sweep.epsilons")

    ckw = {k: vals[k] for k in ("epsilon", "cfl", "t_end", "output_stride") if k in vals}
    config = RunConfig(model, params, grid, seed=seed, init=init, sweep_epsilons=ladder, **ckw)
    errs = validate(config)
    if errs:
        raise ConfigError(f"{source}: " + "; ".join(errs))
    return config


def parse_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, str(path))


def _fmt_num(v) -> str:
    return repr(int(v)) if isinstance(v, (int, np.integer)) else repr(float(v))


def config_items(config: RunConfig) -> list[tuple[str, str]]:
    """Every key of ``config`` as (key, text) in canonical order."""
    p = config.params
    items = [("model", ModelId(config.model).value)]
    for key in ("gamma_plus", "gamma_minus", "mu_visc", "lambda_visc"):
        items.append((key, _fmt_num(getattr(p, key))))
    if p.tau_relax is not None:
        items.append(("tau_relax", _fmt_num(p.tau_relax)))
    items.append(("eta_drag", _fmt_num(p.eta_drag)))
    items.append(("pint_rule", str(p.pint_rule)))
    items += [("epsilon", _fmt_num(config.epsilon)), ("cfl", _fmt_num(config.cfl)),
              ("n_cells", _fmt_num(config.grid.n_cells)), ("length", _fmt_num(config.grid.length)),
              ("t_end", _fmt_num(config.t_end)), ("output_stride", _fmt_num(config.output_stride)),
              ("seed", _fmt_num(config.seed)), ("u_mean", _fmt_num(config.init.u_mean)),
              ("c0", _fmt_num(config.init.c0))]
    for prefix, attr in _PROFILE_PREFIXES.items():
        prof = getattr(config.init, attr)
        for f in fields(PerturbationProfile):
            v = getattr(prof, f.name)
            items.append((f"{prefix}.{f.name}", v if isinstance(v, str) else _fmt_num(v)))
    if config.sweep_epsilons is not None:
        items.append(("sweep.epsilons", ",".join(_fmt_num(e) for e in config.sweep_epsilons)))
    return items


def format_config(config: RunConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in config_items(config))


# -- CSV ------------------------------------------------------------------------

def _cell(v) -> str:
    if v is None:
        return "nan"
    return format(float(v), ".17g")


def _write_rows(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")


def write_trajectory_csv(path, rows) -> None:
    """``rows`` from diagnostics.trajectory_rows, or a trajectory."""
    if hasattr(rows, "records"):
        rows = trajectory_rows(rows)
    _write_rows(path, TRAJECTORY_COLUMNS, rows)


def snapshot_columns(model: ModelId) -> tuple[str, ...]:
    vel = ("u_plus", "u_minus") if ModelId(model).two_velocity else ("u",)
    return ("time", "x", "R_plus", "R_minus", "alpha") + vel + ("S_plus", "S_minus", "p_plus", "p_minus")


def snapshot_rows(trajectory, config: Optional[RunConfig] = None) -> list[list[float]]:
    config = config or trajectory.config
    x = config.grid.centers
    rows = []
    for rec in trajectory.records:
        s = rec.state
        clos = closure_project(s, config.params)
        n = s.n_cells
        nan = np.full(n, np.nan)
        zero = np.zeros(n)
        if s.model.two_velocity:
            vel = [s.m_plus / s.R_plus, s.m_minus / s.R_minus]
        else:
            rho = s.R_plus if s.R_minus is None else s.R_plus + s.R_minus
            vel = [s.m / rho]
        cols = [np.full(n, rec.time), x, s.R_plus, nan if s.R_minus is None else s.R_minus,
                clos.alpha] + vel + [zero if s.S_plus is None else s.S_plus,
                                     zero if s.S_minus is None else s.S_minus,
                                     clos.p_plus, nan if s.model is ModelId.M1 else clos.p_minus]
        rows.extend(np.column_stack(cols).tolist())
    return rows


def write_snapshot_csv(path, trajectory, config: Optional[RunConfig] = None) -> None:
    config = config or trajectory.config
    _write_rows(path, snapshot_columns(config.model), snapshot_rows(trajectory, config))


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


# -- sweep JSON -------------------------------------------------------------------

def _jnum(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else str(v)


def sweep_to_dict(report) -> dict:
    """Schema-stable dictionary of a SweepReport (wall times are left out so reruns match byte for byte)."""
    from .diagnostics import INDICATOR_COLUMNS
    runs = []
    for r in report.runs:
        runs.append({
            "epsilon": r.epsilon,
            "n_steps": r.n_steps,
            "error": r.error,
            "indicators": None if r.indicators is None else
            {k: _jnum(getattr(r.indicators, k)) for k in INDICATOR_COLUMNS},
            "max_pressure_gap": _jnum(r.max_pressure_gap),
            "entropy_excursion": _jnum(r.entropy_excursion),
            "mass_drift": _jnum(r.mass_drift),
        })
    return {
        "schema": SWEEP_SCHEMA,
        "tool_version": __version__,
        "model": ModelId(report.model).value,
        "epsilons": list(report.epsilons),
        "runs": runs,
        "orders": {k: None if v is None else {"slope": v[0], "residual": v[1]}
                   for k, v in report.orders.items()},
        "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in report.checks],
        "passed": report.passed,
        "config": dict(config_items(report.config)),
    }


def dumps_sweep(data: dict) -> str:
    return json.dumps(data, indent=2, sort_keys=False) + "\n"


def write_sweep_json(path, report) -> None:
    data = report if isinstance(report, dict) else sweep_to_dict(report)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_sweep(data))


def read_sweep_json(path) -> dict:
    data = json.loads(Path(path).read_text())
    if data.get("schema") != SWEEP_SCHEMA:
        raise ConfigError(f"{path}: not a {SWEEP_SCHEMA} document")
    return data
