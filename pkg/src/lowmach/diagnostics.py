"""Discrete energy budget and distances to the low-Mach limit."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np

from .eos import closure_project
from .initdata import exact_limit_state
from .models import ModelId, PhaseState, RunConfig

AUDIT_TOL = 1e-8


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    internal: float
    dissipated_viscous: float = 0.0
    dissipated_relaxation: float = 0.0

    @property
    def total(self) -> float:
        return self.kinetic + self.internal + self.dissipated_viscous + self.dissipated_relaxation

    def as_row(self) -> list[float]:
        return [self.kinetic, self.internal, self.dissipated_viscous,
                self.dissipated_relaxation, self.total]


ENERGY_COLUMNS = ("kinetic", "internal", "dissipated_viscous", "dissipated_relaxation", "total")


def energy_total(state: PhaseState, config: RunConfig, dissipated_viscous: float = 0.0,
                 dissipated_relaxation: float = 0.0) -> EnergyBreakdown:
    """Midpoint-rule kinetic and internal energies (the latter scaled by 1/eps^2)."""
    p = config.params
    dx = config.grid.dx
    eps2 = config.epsilon ** 2
    model = state.model
    if model.two_velocity:
        ke = 0.5 * (state.m_plus ** 2 / state.R_plus + state.m_minus ** 2 / state.R_minus)
    else:
        rho = state.R_plus if state.R_minus is None else state.R_plus + state.R_minus
        ke = 0.5 * state.m ** 2 / rho
    if model is ModelId.M1:
        ie = state.R_plus ** p.gamma_plus / (p.gamma_plus - 1.0)
    else:
        clos = closure_project(state, p)
        a = clos.alpha
        ie = (a * clos.p_plus / (p.gamma_plus - 1.0)
              + (1.0 - a) * clos.p_minus / (p.gamma_minus - 1.0))
    return EnergyBreakdown(float(np.sum(ke)) * dx, float(np.sum(ie)) * dx / eps2,
                           float(dissipated_viscous), float(dissipated_relaxation))


def energy_series(trajectory, config: Optional[RunConfig] = None) -> list[tuple[float, EnergyBreakdown]]:
    """(time, EnergyBreakdown) for every record of a trajectory."""
    config = config or trajectory.config
    return [(r.time, energy_total(r.state, config, r.dissipated_viscous, r.dissipated_relaxation))
            for r in trajectory.records]


@dataclass(frozen=True)
class AuditReport:
    passed: bool
    worst_violation: float
    worst_time: Optional[float]
    tol: float
    n_records: int

    def summary(self) -> str:
        verdict = "pass" if self.passed else "FAIL"
        where = "" if self.worst_time is None else f" at t={self.worst_time:.6g}"
        return (f"energy audit {verdict}: worst relative violation "
                f"{self.worst_violation:.3e}{where} (tol {self.tol:g}, {self.n_records} records)")


def energy_audit(trajectory, config: Optional[RunConfig] = None, tol: float = AUDIT_TOL) -> AuditReport:
    """Check ``total(t) <= total(0) (1 + tol)`` and that totals never grow between records.

    ``trajectory`` is a simulate() result or a sequence of (time, EnergyBreakdown).
    Violations are relative to ``|total(0)|``; the report keeps the largest one.
    """
    if hasattr(trajectory, "records"):
        series = energy_series(trajectory, config)
    else:
        series = list(trajectory)
    if not series:
        return AuditReport(True, 0.0, None, tol, 0)
    e0 = series[0][1].total
    scale = abs(e0) if e0 != 0 else 1.0
    worst, worst_t = 0.0, None
    prev = e0
    for t, e in series[1:]:
        tot = e.total
        v = max((tot - e0) / scale, (tot - prev) / scale)
        if not math.isfinite(tot):
            v = math.inf
        if v > worst:
            worst, worst_t = v, t
        prev = tot
    return AuditReport(worst <= tol, worst, worst_t, tol, len(series))


@dataclass(frozen=True)
class LimitIndicators:
    """Distances to the limit; ``None`` where an indicator does not apply to the model."""

    pressure_gap: Optional[float]
    density_dev_plus: float
    density_dev_minus: Optional[float]
    pressure_dev: float
    u_variance: float
    div_norm: float
    alpha_oracle_err: Optional[float]
    m7_constraint_residual: Optional[float]
    m7_constraint_scale: Optional[float]

    def as_dict(self) -> dict:
        return asdict(self)

    @property
    def m7_constraint_relative(self) -> Optional[float]:
        if self.m7_constraint_residual is None:
            return None
        if not self.m7_constraint_scale:
            return math.inf
        return self.m7_constraint_residual / self.m7_constraint_scale


INDICATOR_COLUMNS = tuple(f.name for f in fields(LimitIndicators))


def transport_velocity(state: PhaseState, config: RunConfig, clos=None) -> np.ndarray:
    """Mixture velocity, or the volume flux ``a+ u+ + a- u-`` for two-velocity models."""
    if state.model.two_velocity:
        clos = clos or closure_project(state, config.params)
        a = clos.alpha
        return a * state.m_plus / state.R_plus + (1.0 - a) * state.m_minus / state.R_minus
    rho = state.R_plus if state.R_minus is None else state.R_plus + state.R_minus
    return state.m / rho


def _l2(v: np.ndarray, dx: float) -> float:
    return float(np.sqrt(np.sum(v * v) * dx))


def _ddx(v: np.ndarray, dx: float) -> np.ndarray:
    return (np.roll(v, -1) - np.roll(v, 1)) / (2.0 * dx)


def indicators(state: PhaseState, config: RunConfig) -> LimitIndicators:
    """Limit indicators of one state; the fraction oracle is the translated initial profile."""
    p = config.params
    dx = config.grid.dx
    c0 = config.init.c0
    model = state.model
    clos = closure_project(state, p)
    Sp = state.S_plus if state.S_plus is not None else 0.0
    Sm = state.S_minus if state.S_minus is not None else 0.0

    dev_p = float(np.max(np.abs(clos.rho_plus * np.exp(Sp / p.gamma_plus)
                                - c0 ** (1.0 / p.gamma_plus))))
    if model is ModelId.M1:
        gap, dev_m = None, None
        pdev = float(np.max(np.abs(clos.p_plus - c0)))
    else:
        gap = float(np.max(np.abs(clos.p_plus - clos.p_minus)))
        dev_m = float(np.max(np.abs(clos.rho_minus * np.exp(Sm / p.gamma_minus)
                                    - c0 ** (1.0 / p.gamma_minus))))
        pdev = float(max(np.max(np.abs(clos.p_plus - c0)), np.max(np.abs(clos.p_minus - c0))))

    u = transport_velocity(state, config, clos)
    u_var = _l2(u - np.mean(u), dx)
    div = _l2(_ddx(u, dx), dx)

    alpha_err = None
    if model.two_phase and not model.two_velocity:
        ex = exact_limit_state(config.init.alpha_profile, config.init.u_mean, state.time,
                               config.grid, p.gamma_plus, p.gamma_minus, c0)
        alpha_err = float(np.sum(np.abs(clos.alpha - ex.alpha)) * dx)

    m7_res = m7_scale = None
    if model is ModelId.M7:
        a = clos.alpha
        stretch = a * _ddx(state.m_plus / state.R_plus, dx)
        relax = a * (1.0 - a) * (clos.p_plus - clos.p_minus) / (config.epsilon ** 2 * p.tau_relax)
        m7_res = _l2(stretch + relax, dx)
        m7_scale = _l2(stretch, dx)

    return LimitIndicators(gap, dev_p, dev_m, pdev, u_var, div, alpha_err, m7_res, m7_scale)


TRAJECTORY_COLUMNS = ("time",) + ENERGY_COLUMNS + INDICATOR_COLUMNS


def trajectory_rows(trajectory, config: Optional[RunConfig] = None) -> list[list[Optional[float]]]:
    """One row per record, in TRAJECTORY_COLUMNS order; ``None`` marks n/a indicators."""
    config = config or trajectory.config
    rows = []
    for r in trajectory.records:
        e = energy_total(r.state, config, r.dissipated_viscous, r.dissipated_relaxation)
        ind = indicators(r.state, config)
        rows.append([r.time] + e.as_row() + [getattr(ind, c) for c in INDICATOR_COLUMNS])
    return rows
