"""Mach-number sweeps: run a model down an epsilon ladder and fit decay orders."""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .diagnostics import INDICATOR_COLUMNS, LimitIndicators, indicators, trajectory_rows
from .eos import closure_project
from .errors import ConfigError, LowMachError
from .initdata import make_well_prepared
from .models import ModelId, PerturbationProfile, RunConfig, validate
from .scheme import simulate

ALGEBRAIC_GAP_TOL = 1e-10
ENTROPY_TOL = 1e-12
MASS_TOL = 1e-13


def fit_order(points: Sequence[tuple[float, float]]) -> Optional[tuple[float, float]]:
    """Least-squares slope of log(value) against log(epsilon).

    Returns ``(slope, residual)`` with ``residual`` the root-mean-square of the
    log-space residuals, or ``None`` when some value is <= 0 (the indicator
    vanished, so no order is defined).
    """
    pts = list(points)
    if len(pts) < 2:
        raise ValueError("fit_order needs at least two points")
    eps = np.array([p[0] for p in pts], dtype=float)
    val = np.array([p[1] for p in pts], dtype=float)
    if np.any(eps <= 0) or len(set(eps.tolist())) < 2:
        raise ValueError("epsilons must be positive and distinct")
    if not np.all(val > 0):
        return None
    x = np.log(eps)
    y = np.log(val)
    xm, ym = x.mean(), y.mean()
    slope = float(np.sum((x - xm) * (y - ym)) / np.sum((x - xm) ** 2))
    res = y - (ym + slope * (x - xm))
    return slope, float(np.sqrt(np.mean(res ** 2)))


@dataclass
class RunResult:
    epsilon: float
    indicators: Optional[LimitIndicators]
    wall_time: float
    n_steps: int = 0
    error: Optional[str] = None
    # extrema over every step, for criteria that speak about "all times"
    max_pressure_gap: Optional[float] = None
    entropy_excursion: Optional[float] = None
    mass_drift: Optional[float] = None
    rows: list = field(default_factory=list)
    # final-time fields (state arrays plus the volume fraction)
    snapshot: Optional[dict] = None


@dataclass
class Check:
    name: str
    passed: bool
    detail: str


@dataclass
class SweepReport:
    model: ModelId
    epsilons: list[float]
    runs: list[RunResult]
    orders: dict[str, Optional[tuple[float, float]]]
    checks: list[Check]
    config: RunConfig

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def series(self, name: str) -> list[Optional[float]]:
        return [None if r.indicators is None else getattr(r.indicators, name) for r in self.runs]


def _run_one(config: RunConfig, keep_rows: bool) -> RunResult:
    t0 = time.perf_counter()
    model = config.model
    try:
        init = make_well_prepared(config)
        mass0 = [float(np.sum(getattr(init, k))) for k in ("R_plus", "R_minus")
                 if getattr(init, k) is not None]
        s_lo = s_hi = None
        if model.entropic:
            s_lo = [float(init.S_plus.min()), float(init.S_minus.min())]
            s_hi = [float(init.S_plus.max()), float(init.S_minus.max())]
        track = {"gap": 0.0, "ent": 0.0}

        def observe(step, state, stats):
            if model.algebraic_closure:
                ind = indicators(state, config)
                track["gap"] = max(track["gap"], ind.pressure_gap)
            if model.entropic:
                for j, S in enumerate((state.S_plus, state.S_minus)):
                    track["ent"] = max(track["ent"], s_lo[j] - float(S.min()),
                                       float(S.max()) - s_hi[j])

        traj = simulate(config, init, observer=observe)
        final = traj.final.state
        ind = indicators(final, config)
        mass1 = [float(np.sum(getattr(final, k))) for k in ("R_plus", "R_minus")
                 if getattr(final, k) is not None]
        drift = max(abs(b - a) / abs(a) for a, b in zip(mass0, mass1))
        res = RunResult(config.epsilon, ind, time.perf_counter() - t0, traj.n_steps,
                        max_pressure_gap=max(track["gap"], ind.pressure_gap or 0.0)
                        if model.algebraic_closure else None,
                        entropy_excursion=track["ent"] if model.entropic else None,
                        mass_drift=drift)
        if keep_rows:
            res.rows = trajectory_rows(traj, config)
        res.snapshot = dict(final.arrays(), alpha=closure_project(final, config.params).alpha)
        return res
    except LowMachError as exc:
        return RunResult(config.epsilon, None, time.perf_counter() - t0, error=f"{type(exc).__name__}: {exc}")


def _strictly_decreasing(vals) -> bool:
    return all(b < a for a, b in zip(vals, vals[1:]))


def _fmt(vals) -> str:
    return ", ".join("n/a" if v is None else f"{v:.3e}" for v in vals)


def _verdicts(model: ModelId, runs: list[RunResult], orders) -> list[Check]:
    checks: list[Check] = []
    failed = [r for r in runs if r.error]
    if failed:
        return [Check("runs", False, "; ".join(f"eps={r.epsilon}: {r.error}" for r in failed))]

    def series(name):
        return [getattr(r.indicators, name) for r in runs]

    def decreasing(name, label=None):
        v = series(name)
        checks.append(Check(f"{label or name} strictly decreasing", _strictly_decreasing(v), _fmt(v)))

    def order_at_least(name, bound):
        o = orders.get(name)
        if o is None:
            checks.append(Check(f"{name} order >= {bound}", True, "indicator vanished"))
        else:
            checks.append(Check(f"{name} order >= {bound}", o[0] >= bound,
                                f"slope {o[0]:.3f}, residual {o[1]:.3e}"))

    if model in (ModelId.M2, ModelId.M3):
        decreasing("alpha_oracle_err")
        decreasing("u_variance")
        order_at_least("u_variance", 1.0)
        if model is ModelId.M3:
            order_at_least("pressure_gap", 1.5)
        else:
            worst = max(r.max_pressure_gap for r in runs)
            checks.append(Check(f"pressure_gap <= {ALGEBRAIC_GAP_TOL:g} at all steps",
                                worst <= ALGEBRAIC_GAP_TOL, f"max {worst:.3e}"))
    elif model is ModelId.M4:
        decreasing("pressure_dev")
        order_at_least("pressure_dev", 1.0)
        worst = max(r.entropy_excursion for r in runs)
        checks.append(Check(f"entropy extrema non-expanding (tol {ENTROPY_TOL:g})",
                            worst <= ENTROPY_TOL, f"max excursion {worst:.3e}"))
    elif model in (ModelId.M5, ModelId.M6):
        decreasing("u_variance", "volume-flux variance")
        worst = max(r.mass_drift for r in runs)
        checks.append(Check(f"per-phase mass conserved to {MASS_TOL:g}", worst <= MASS_TOL,
                            f"max relative drift {worst:.3e}"))
    elif model is ModelId.M7:
        v = [r.indicators.m7_constraint_relative for r in runs]
        checks.append(Check("normalized M7 constraint residual strictly decreasing",
                            _strictly_decreasing(v), _fmt(v)))
    else:
        decreasing("u_variance")
    return checks


def mach_sweep(base_config: RunConfig, epsilons: Optional[Sequence[float]] = None,
               shared_init_profile: Optional[PerturbationProfile] = None,
               workers: int = 1, keep_rows: bool = False) -> SweepReport:
    """Run ``base_config`` at each epsilon (largest first) and assemble the report.

    Runs are independent; with ``workers > 1`` they go to a process pool, and
    the report is still assembled in ladder order.
    """
    if epsilons is None:
        epsilons = base_config.sweep_epsilons
    if epsilons is None or len(epsilons) < 3:
        raise ConfigError("a sweep needs at least 3 epsilons")
    ladder = sorted((float(e) for e in epsilons), reverse=True)
    if len(set(ladder)) != len(ladder):
        raise ConfigError("sweep epsilons must be distinct")
    cfg = base_config
    if shared_init_profile is not None:
        cfg = replace(cfg, init=replace(cfg.init, alpha_profile=shared_init_profile))
    configs = [cfg.with_epsilon(e) for e in ladder]
    for c in configs:
        errs = validate(c)
        if errs:
            raise ConfigError("; ".join(errs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_run_one, configs, [keep_rows] * len(configs)))
    else:
        runs = [_run_one(c, keep_rows) for c in configs]

    orders: dict[str, Optional[tuple[float, float]]] = {}
    if not any(r.error for r in runs):
        for name in INDICATOR_COLUMNS:
            vals = [getattr(r.indicators, name) for r in runs]
            if any(v is None for v in vals):
                continue
            if not all(math.isfinite(v) for v in vals):
                continue
            orders[name] = fit_order(list(zip(ladder, vals)))
    checks = _verdicts(ModelId(cfg.model), runs, orders)
    return SweepReport(ModelId(cfg.model), ladder, runs, orders, checks, cfg)
