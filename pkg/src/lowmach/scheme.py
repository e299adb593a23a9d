"""Finite-volume time stepper for the model catalog.

One step is Strang-split: half a source step (pressure relaxation for the
PDE-closure models, drag for two-velocity models), a forward-Euler
finite-volume update (Rusanov-type fluxes whose contact diffusion runs at the
material speed, central non-conservative products, viscous terms, upwinded
volume-fraction transport), then the second half of the source step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .eos import ClosureFields, closure_project, solve_alpha
from .errors import (ConfigError, DomainError, LowMachError, PositivityError, SolverFailure,
                     StepError)
from .models import ModelId, PhaseState, PhysParams, RunConfig, validate


@dataclass
class StepStats:
    dt: float
    max_wave_speed: float
    relax_iters: int = 0
    closure_iters: int = 0
    dissipated_viscous: float = 0.0
    dissipated_relaxation: float = 0.0


@dataclass
class Prim:
    """Derived per-cell quantities of a state."""

    clos: ClosureFields
    u: Optional[np.ndarray]  # mixture velocity, single-velocity models
    u_plus: Optional[np.ndarray]
    u_minus: Optional[np.ndarray]
    c_plus: np.ndarray
    c_minus: np.ndarray
    speed: np.ndarray  # max over phases of |u_k| + c_k / eps
    # single-velocity models: fluxed pressure and the (unscaled) squared
    # sound speed linking its jumps to mixture density jumps
    P: Optional[np.ndarray] = None
    c2: Optional[np.ndarray] = None

    @property
    def rho(self) -> np.ndarray:
        return self.clos.alpha * self.clos.rho_plus + (1 - self.clos.alpha) * self.clos.rho_minus


def primitives(state: PhaseState, params: PhysParams, epsilon: float,
               clos: Optional[ClosureFields] = None) -> Prim:
    model = state.model
    if clos is None:
        clos = closure_project(state, params)
    gp, gm = params.gamma_plus, params.gamma_minus
    c_plus = np.sqrt(gp * clos.p_plus / clos.rho_plus)
    if model is ModelId.M1:
        c_minus = c_plus
    else:
        c_minus = np.sqrt(gm * clos.p_minus / clos.rho_minus)
    if model.two_velocity:
        u_plus = state.m_plus / state.R_plus
        u_minus = state.m_minus / state.R_minus
        speed = np.maximum(np.abs(u_plus) + c_plus / epsilon, np.abs(u_minus) + c_minus / epsilon)
        return Prim(clos, None, u_plus, u_minus, c_plus, c_minus, speed)
    if model is ModelId.M1:
        rho = state.R_plus
        P = clos.p_plus
        c2 = c_plus ** 2
    else:
        rho = state.R_plus + state.R_minus
        a = clos.alpha
        P = a * clos.p_plus + (1.0 - a) * clos.p_minus
        if model.pde_closure:
            # frozen-fraction compressibility
            c2 = (a * gp * clos.p_plus + (1.0 - a) * gm * clos.p_minus) / rho
        else:
            # pressure-equilibrium (Wood) compressibility
            c2 = 1.0 / (rho * (a / (gp * clos.p_plus) + (1.0 - a) / (gm * clos.p_minus)))
    u = state.m / rho
    speed = np.abs(u) + np.maximum(c_plus, c_minus) / epsilon
    return Prim(clos, u, None, None, c_plus, c_minus, speed, P, c2)


def _viscosity(params: PhysParams) -> float:
    return 2.0 * params.mu_visc + params.lambda_visc


def cfl_dt(state: PhaseState, config: RunConfig, prim: Optional[Prim] = None) -> float:
    """Stable step ``cfl / (max_speed/dx + 2 nu/dx^2)``, truncated at ``t_end``.

    ``nu = (2 mu + lambda) / min(rho)`` is zero for inviscid models, in which
    case this is exactly ``cfl * dx / max(|u| + c/eps)``.
    """
    if prim is None:
        prim = primitives(state, config.params, config.epsilon)
    dx = config.grid.dx
    smax = float(np.max(prim.speed))
    if not math.isfinite(smax):
        raise LowMachError("non-finite wave speed")
    nu = 0.0
    if state.model.viscous:
        nu = _viscosity(config.params) / float(np.min(prim.rho))
    rate = smax / dx + 2.0 * nu / dx ** 2
    if not rate > 0:
        raise LowMachError("zero wave speed: time step undefined")
    dt = config.cfl / rate
    remaining = config.t_end - state.time
    return min(dt, remaining)


# -- fluxes -----------------------------------------------------------------

def entropy_weight(S, gamma):
    """``exp(S / gamma)``: at fixed pressure the phase density is proportional to its inverse."""
    return np.exp(S / gamma)


def conserved(state: PhaseState, params: PhysParams) -> dict[str, np.ndarray]:
    """Conservative variables.

    Entropies ride along as ``Q = R exp(S / gamma)``, which is the phase
    volume (times a pressure factor) and therefore mixes linearly across
    contacts in pressure equilibrium.
    """
    q = {"R_plus": state.R_plus}
    if state.R_minus is not None:
        q["R_minus"] = state.R_minus
    if state.model.two_velocity:
        q["m_plus"] = state.m_plus
        q["m_minus"] = state.m_minus
    else:
        q["m"] = state.m
    if state.model.entropic:
        q["Q_plus"] = state.R_plus * entropy_weight(state.S_plus, params.gamma_plus)
        q["Q_minus"] = state.R_minus * entropy_weight(state.S_minus, params.gamma_minus)
    return q


def physical_flux(state: PhaseState, prim: Prim, params: PhysParams,
                  epsilon: float) -> dict[str, np.ndarray]:
    model = state.model
    f = {}
    if model.two_velocity:
        f["R_plus"] = state.R_plus * prim.u_plus
        f["R_minus"] = state.R_minus * prim.u_minus
        f["m_plus"] = state.m_plus * prim.u_plus
        f["m_minus"] = state.m_minus * prim.u_minus
    else:
        u = prim.u
        f["R_plus"] = state.R_plus * u
        if model is not ModelId.M1:
            f["R_minus"] = state.R_minus * u
        f["m"] = state.m * u + prim.P / epsilon ** 2
    if model.entropic:
        f["Q_plus"] = f["R_plus"] * entropy_weight(state.S_plus, params.gamma_plus)
        f["Q_minus"] = f["R_minus"] * entropy_weight(state.S_minus, params.gamma_minus)
    return f


def _rusanov(qL, qR, fL, fR, s):
    return {k: 0.5 * (fL[k] + fR[k]) - 0.5 * s * (qR[k] - qL[k]) for k in qL}


def _contact_diffusion(sL: PhaseState, sR: PhaseState, pL: Prim, pR: Prim, s, params):
    """Numerical diffusion split into an acoustic part (speed ``s``) and a material part.

    Density jumps explained by the pressure jump (``dp / c^2``) get the
    acoustic speed; the remainder (a contact) gets ``|u|``, and velocity
    jumps get ``s``.  Returns the mass and momentum diffusion per mass flux key.
    """
    D = {}
    if sL.model.two_velocity:
        clL, clR = pL.clos, pR.clos
        for ph, g in (("plus", params.gamma_plus), ("minus", params.gamma_minus)):
            RL, RR = getattr(sL, f"R_{ph}"), getattr(sR, f"R_{ph}")
            uL, uR = getattr(pL, f"u_{ph}"), getattr(pR, f"u_{ph}")
            aL = clL.alpha if ph == "plus" else 1.0 - clL.alpha
            aR = clR.alpha if ph == "plus" else 1.0 - clR.alpha
            pkL, pkR = getattr(clL, f"p_{ph}"), getattr(clR, f"p_{ph}")
            rkL, rkR = getattr(clL, f"rho_{ph}"), getattr(clR, f"rho_{ph}")
            c2 = 0.5 * (g * pkL / rkL + g * pkR / rkR)
            ub = 0.5 * (uL + uR)
            acoustic = 0.5 * (aL + aR) * (pkR - pkL) / c2
            DR = 0.5 * (np.abs(ub) * (RR - RL - acoustic) + s * acoustic)
            D[f"R_{ph}"] = DR
            D[f"m_{ph}"] = ub * DR + 0.5 * s * 0.5 * (RL + RR) * (uR - uL)
        return D
    rhoL, rhoR = pL.rho, pR.rho
    ub = 0.5 * (pL.u + pR.u)
    acoustic = (pR.P - pL.P) / (0.5 * (pL.c2 + pR.c2))
    Drho = 0.5 * (np.abs(ub) * (rhoR - rhoL - acoustic) + s * acoustic)
    D["rho"] = Drho
    D["m"] = ub * Drho + 0.5 * s * 0.5 * (rhoL + rhoR) * (pR.u - pL.u)
    return D


def _contact_flux(left: PhaseState, right: PhaseState, pL: Prim, pR: Prim, s, params, epsilon):
    model = left.model
    fL = physical_flux(left, pL, params, epsilon)
    fR = physical_flux(right, pR, params, epsilon)
    D = _contact_diffusion(left, right, pL, pR, s, params)
    F = {}
    if model.two_velocity:
        for k in ("R_plus", "R_minus", "m_plus", "m_minus"):
            F[k] = 0.5 * (fL[k] + fR[k]) - D[k]
        phases = (("plus", F["R_plus"]), ("minus", F["R_minus"]))
    else:
        F["m"] = 0.5 * (fL["m"] + fR["m"]) - D["m"]
        if model is ModelId.M1:
            F["R_plus"] = 0.5 * (fL["R_plus"] + fR["R_plus"]) - D["rho"]
            return F
        rhoL, rhoR = left.R_plus + left.R_minus, right.R_plus + right.R_minus
        F_rho = 0.5 * (rhoL * pL.u + rhoR * pR.u) - D["rho"]
        # partial masses ride on the mixture mass flux, upwinded
        fwd = F_rho >= 0
        F["R_plus"] = F_rho * np.where(fwd, left.R_plus / rhoL, right.R_plus / rhoR)
        F["R_minus"] = F_rho * np.where(fwd, left.R_minus / rhoL, right.R_minus / rhoR)
        phases = (("plus", F["R_plus"]), ("minus", F["R_minus"]))
    if model.entropic:
        for ph, FR in phases:
            g = params.gamma_plus if ph == "plus" else params.gamma_minus
            w = np.where(FR >= 0, getattr(left, f"S_{ph}"), getattr(right, f"S_{ph}"))
            F[f"Q_{ph}"] = FR * entropy_weight(w, g)
    return F


def rusanov_flux(left: PhaseState, right: PhaseState, params: PhysParams, epsilon: float,
                 kind: str = "rusanov") -> dict[str, np.ndarray]:
    """Numerical flux between (arrays of) left and right states.

    ``kind="rusanov"`` is the local Lax-Friedrichs flux
    ``(f(uL) + f(uR))/2 - s (uR - uL)/2`` with ``s`` the larger local
    ``|u| + c/eps``.  ``kind="contact"`` keeps that acoustic diffusion but
    diffuses contacts (density jumps at fixed pressure) at the material
    speed only; this is the flux the time stepper uses, since the plain
    flux smears the volume fraction at a rate ``dx/eps``.
    """
    if kind not in ("rusanov", "contact"):
        raise ValueError(f"unknown flux kind {kind!r}")
    for st in (left, right):
        for name, arr in st.arrays().items():
            if not np.all(np.isfinite(arr)):
                raise DomainError(f"non-finite {name} in flux input")
    pL = primitives(left, params, epsilon)
    pR = primitives(right, params, epsilon)
    s = np.maximum(pL.speed, pR.speed)
    if kind == "contact":
        return _contact_flux(left, right, pL, pR, s, params, epsilon)
    qL, qR = conserved(left, params), conserved(right, params)
    return _rusanov(qL, qR, physical_flux(left, pL, params, epsilon),
                    physical_flux(right, pR, params, epsilon), s)


def _shift(obj):
    """Periodic neighbour to the right of every cell."""
    if isinstance(obj, PhaseState):
        return obj.replace(**{k: np.roll(v, -1) for k, v in obj.arrays().items()})
    clos = obj.clos
    rc = ClosureFields(*(np.roll(getattr(clos, n), -1)
                         for n in ("alpha", "rho_plus", "rho_minus", "p_plus", "p_minus")),
                       clos.newton_iters)
    roll = lambda a: None if a is None else np.roll(a, -1)
    return Prim(rc, roll(obj.u), roll(obj.u_plus), roll(obj.u_minus), roll(obj.c_plus),
                roll(obj.c_minus), roll(obj.speed), roll(obj.P), roll(obj.c2))


def _face_fluxes(state: PhaseState, prim: Prim, params: PhysParams,
                 epsilon: float) -> dict[str, np.ndarray]:
    """Flux at face i+1/2 between cell i and its periodic right neighbour, index i."""
    pR = _shift(prim)
    s = np.maximum(prim.speed, pR.speed)
    return _contact_flux(state, _shift(state), prim, pR, s, params, epsilon)


def _central_diff(a: np.ndarray, dx: float) -> np.ndarray:
    return (np.roll(a, -1) - np.roll(a, 1)) / (2.0 * dx)


def interfacial_pressure(state: PhaseState, params: PhysParams, clos: ClosureFields) -> np.ndarray:
    if params.pint_rule.kind == "constant":
        return np.full(state.n_cells, params.pint_rule.value)
    if state.model.pde_closure:
        return clos.p_plus
    return clos.pressure


def nonconservative_rhs(state: PhaseState, params: PhysParams, epsilon: float, dx: float,
                        clos: Optional[ClosureFields] = None) -> dict[str, np.ndarray]:
    """Rates ``-(alpha_k grad p_k / eps^2 + p_int grad alpha_k)`` for both phase momenta.

    Returns zeros for single-velocity models, whose pressure term is fluxed.
    """
    n = state.n_cells
    if not state.model.two_velocity:
        return {"m_plus": np.zeros(n), "m_minus": np.zeros(n)}
    if clos is None:
        clos = closure_project(state, params)
    a = clos.alpha
    pint = interfacial_pressure(state, params, clos)
    da = _central_diff(a, dx)
    return {
        "m_plus": -(a * _central_diff(clos.p_plus, dx) / epsilon ** 2 + pint * da),
        "m_minus": -((1.0 - a) * _central_diff(clos.p_minus, dx) / epsilon ** 2 - pint * da),
    }


def viscous_rhs(state: PhaseState, params: PhysParams, dx: float,
                u: Optional[np.ndarray] = None) -> tuple[np.ndarray, float]:
    """Momentum rate ``(2 mu + lambda) u_xx`` and the dissipation rate it implies.

    The rate ``(2 mu + lambda) sum((u_{i+1} - u_i)/dx)^2 dx`` equals minus the
    discrete work ``sum(u * rate) dx`` exactly (summation by parts).
    """
    if not state.model.viscous:
        return np.zeros(state.n_cells), 0.0
    if u is None:
        rho = state.R_plus if state.R_minus is None else state.R_plus + state.R_minus
        u = state.m / rho
    nu = _viscosity(params)
    du = np.roll(u, -1) - u
    rate = nu * (du - np.roll(du, 1)) / dx ** 2
    dissipation = nu * float(np.sum(du * du)) / dx
    return rate, dissipation


def _upwind_advect(a: np.ndarray, u: np.ndarray, dt: float, dx: float) -> np.ndarray:
    back = a - np.roll(a, 1)
    fwd = np.roll(a, -1) - a
    return a - dt / dx * (np.maximum(u, 0.0) * back + np.minimum(u, 0.0) * fwd)


def fv_update(state: PhaseState, dt: float, config: RunConfig,
              prim: Optional[Prim] = None) -> tuple[PhaseState, float]:
    """Forward-Euler finite-volume update; returns (new state, viscous dissipation)."""
    params, eps, dx = config.params, config.epsilon, config.grid.dx
    model = state.model
    if prim is None:
        prim = primitives(state, params, eps)
    F = _face_fluxes(state, prim, params, eps)
    q = conserved(state, params)
    lam = dt / dx
    new = {k: q[k] - lam * (F[k] - np.roll(F[k], 1)) for k in q}
    visc = 0.0
    if model.viscous:
        rate, diss = viscous_rhs(state, params, dx, prim.u)
        new["m"] = new["m"] + dt * rate
        visc = dt * diss
    if model.two_velocity:
        nc = nonconservative_rhs(state, params, eps, dx, prim.clos)
        new["m_plus"] = new["m_plus"] + dt * nc["m_plus"]
        new["m_minus"] = new["m_minus"] + dt * nc["m_minus"]

    for name in ("R_plus", "R_minus"):
        if name in new and not np.all(new[name] > 0):
            i = int(np.flatnonzero(~(new[name] > 0))[0])
            raise PositivityError(f"positivity failure in {name} at cell {i}, reduce cfl")
    fields = {k: v for k, v in new.items() if not k.startswith("Q_")}
    if model.entropic:
        fields["S_plus"] = params.gamma_plus * np.log(new["Q_plus"] / new["R_plus"])
        fields["S_minus"] = params.gamma_minus * np.log(new["Q_minus"] / new["R_minus"])
    if model.pde_closure:
        carrier = prim.u if model is ModelId.M3 else prim.u_plus
        alpha = _upwind_advect(state.alpha_plus, carrier, dt, dx)
        if not np.all((alpha > 0) & (alpha < 1)):
            raise PositivityError("volume fraction left (0, 1) in transport, reduce cfl")
        fields["alpha_plus"] = alpha
    return state.replace(time=state.time + dt, **fields), visc


# -- sources -------------------------------------------------------------------

def _internal_energy_density(alpha, R_plus, R_minus, S_plus, S_minus, params, epsilon):
    gp, gm = params.gamma_plus, params.gamma_minus
    ep = R_plus ** gp * np.exp(S_plus) * alpha ** (1.0 - gp) / (gp - 1.0)
    em = R_minus ** gm * np.exp(S_minus) * (1.0 - alpha) ** (1.0 - gm) / (gm - 1.0)
    return (ep + em) / epsilon ** 2


@dataclass
class RelaxationResult:
    state: PhaseState
    dissipation: float
    newton_iters: int


def relaxation_step(state: PhaseState, dt: float, params: PhysParams, epsilon: float,
                    dx: float = 1.0) -> RelaxationResult:
    """Relax the volume fraction toward pressure equilibrium over ``dt``.

    Masses, momenta and entropies are frozen; the ODE
    ``dalpha/dt = alpha (1-alpha) (p+ - p-) / (eps^2 tau)`` is integrated by
    extrapolated implicit Euler.  The returned dissipation is the drop of the
    internal energy, i.e. the time integral of
    ``alpha+ alpha- (p+ - p-)^2 / (eps^4 tau)`` over the substep, times ``dx``.
    """
    if not state.model.pde_closure:
        raise DomainError("relaxation applies to PDE-closure models only")
    Sp = state.S_plus if state.S_plus is not None else np.zeros(state.n_cells)
    Sm = state.S_minus if state.S_minus is not None else np.zeros(state.n_cells)
    alpha_star, _ = solve_alpha(state.R_plus, state.R_minus, Sp, Sm, params)
    h = dt / (epsilon ** 2 * params.tau_relax)
    alpha, iters, status = kernels.relax_solve(
        state.R_plus, state.R_minus, Sp, Sm, state.alpha_plus, alpha_star, h,
        params.gamma_plus, params.gamma_minus)
    if np.any(status != kernels.STATUS_OK):
        i = int(np.flatnonzero(status != kernels.STATUS_OK)[0])
        raise SolverFailure("relaxation Newton failure",
                            bracket=(float(state.alpha_plus[i]), float(alpha_star[i])), cell=i)
    if not np.all((alpha > 0) & (alpha < 1)):
        raise SolverFailure("relaxation left (0, 1)")
    e_old = _internal_energy_density(state.alpha_plus, state.R_plus, state.R_minus, Sp, Sm,
                                     params, epsilon)
    e_new = _internal_energy_density(alpha, state.R_plus, state.R_minus, Sp, Sm, params, epsilon)
    # convexity of the energy in alpha makes each drop >= 0 up to rounding
    dissipation = float(np.sum(np.maximum(e_old - e_new, 0.0))) * dx
    return RelaxationResult(state.replace(alpha_plus=alpha), dissipation, int(iters))


def drag_step(state: PhaseState, dt: float, params: PhysParams) -> PhaseState:
    """Implicit pointwise drag ``(1/eta)|u+ - u-|(u-/+ - u+/-)``; conserves total momentum."""
    if not state.model.two_velocity or params.eta_drag <= 0:
        return state
    Rp, Rm = state.R_plus, state.R_minus
    w0 = state.m_plus / Rp - state.m_minus / Rm
    k = dt * (1.0 / Rp + 1.0 / Rm) / params.eta_drag
    # |w| + k |w|^2 = |w0|
    aw0 = np.abs(w0)
    aw = np.where(k * aw0 > 1e-12, (np.sqrt(1.0 + 4.0 * k * aw0) - 1.0) / (2.0 * k), aw0)
    w = np.sign(w0) * aw
    mom = state.m_plus + state.m_minus
    # velocities with given total momentum and relative velocity w
    u_minus = (mom - Rp * w) / (Rp + Rm)
    u_plus = u_minus + w
    return state.replace(m_plus=Rp * u_plus, m_minus=Rm * u_minus)


def _source_half(state, dt, config):
    params, eps = config.params, config.epsilon
    diss, iters = 0.0, 0
    if state.model.pde_closure:
        res = relaxation_step(state, dt, params, eps, config.grid.dx)
        state, diss, iters = res.state, res.dissipation, res.newton_iters
    if state.model.two_velocity and params.eta_drag > 0:
        state = drag_step(state, dt, params)
    return state, diss, iters


def strang_step(state: PhaseState, config: RunConfig) -> tuple[PhaseState, StepStats]:
    params, eps = config.params, config.epsilon
    prim = primitives(state, params, eps)
    dt = cfl_dt(state, config, prim)
    if not dt > 0:
        raise LowMachError("non-positive time step")
    stats = StepStats(dt=dt, max_wave_speed=float(np.max(prim.speed)),
                      closure_iters=prim.clos.newton_iters)
    has_source = state.model.pde_closure or (state.model.two_velocity and params.eta_drag > 0)
    t0 = state.time
    if has_source:
        state, d1, i1 = _source_half(state, 0.5 * dt, config)
        prim = primitives(state, params, eps)
        stats.dissipated_relaxation += d1
        stats.relax_iters = max(stats.relax_iters, i1)
    state, visc = fv_update(state, dt, config, prim)
    stats.dissipated_viscous = visc
    if has_source:
        state, d2, i2 = _source_half(state, 0.5 * dt, config)
        stats.dissipated_relaxation += d2
        stats.relax_iters = max(stats.relax_iters, i2)
    # the truncated last step lands on t_end exactly, not t0 + (t_end - t0)
    state = state.replace(time=config.t_end if dt == config.t_end - t0 else t0 + dt)
    return state, stats


@dataclass
class Record:
    step: int
    time: float
    state: PhaseState
    stats: Optional[StepStats]
    dissipated_viscous: float
    dissipated_relaxation: float


@dataclass
class Trajectory:
    config: RunConfig
    records: list[Record] = field(default_factory=list)
    n_steps: int = 0
    increments_relaxation: list[float] = field(default_factory=list)

    @property
    def final(self) -> Record:
        return self.records[-1]


def simulate(config: RunConfig, init: PhaseState, max_steps: int = 10_000_000,
             keep_increments: bool = False, observer=None) -> Trajectory:
    """Advance ``init`` to ``config.t_end``; records every ``output_stride`` steps and the end.

    ``observer(step, state, stats)`` is called after every step when given.
    """
    errs = validate(config)
    if errs:
        raise ConfigError("; ".join(errs))
    if init.model != config.model:
        raise ConfigError(f"initial state is for {init.model.value}, config for {config.model.value}")
    bad = init.check()
    if bad:
        raise ConfigError("; ".join(bad))
    traj = Trajectory(config)
    state = init
    dv = dr = 0.0
    traj.records.append(Record(0, state.time, state, None, 0.0, 0.0))
    step = 0
    while state.time < config.t_end:
        if step >= max_steps:
            raise StepError(step, "maximum number of steps reached")
        try:
            state, stats = strang_step(state, config)
        except LowMachError as exc:
            raise StepError(step + 1, exc) from exc
        step += 1
        dv += stats.dissipated_viscous
        dr += stats.dissipated_relaxation
        if keep_increments:
            traj.increments_relaxation.append(stats.dissipated_relaxation)
        if observer is not None:
            observer(step, state, stats)
        if step % config.output_stride == 0 or state.time >= config.t_end:
            traj.records.append(Record(step, state.time, state, stats, dv, dr))
    traj.n_steps = step
    return traj
