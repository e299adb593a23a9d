"""Power-law state laws and the pressure-equality closure."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError, SolverFailure, VanishingPhaseError
from .models import ModelId, PhaseState, PhysParams

DELTA = 1e-14
CLOSURE_RTOL = 1e-12


def pressure_barotropic(rho, gamma):
    """``rho**gamma``; rejects negative densities."""
    rho_a = np.asarray(rho, dtype=float)
    if np.any(rho_a < 0):
        raise DomainError("negative density")
    out = rho_a ** gamma
    return float(out) if np.ndim(out) == 0 else out


def pressure_entropic(rho, s, gamma):
    """``rho**gamma * exp(s)``; identical to the barotropic law at s = 0."""
    rho_a = np.asarray(rho, dtype=float)
    if np.any(rho_a < 0):
        raise DomainError("negative density")
    out = rho_a ** gamma * np.exp(s)
    return float(out) if np.ndim(out) == 0 else out


def sound_speed(rho, s, gamma):
    rho_a = np.asarray(rho, dtype=float)
    if np.any(rho_a <= 0):
        raise DomainError("sound speed needs a positive density")
    out = np.sqrt(gamma * rho_a ** (gamma - 1.0) * np.exp(s))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class ClosureSolution:
    alpha_plus: float
    rho_plus: float
    rho_minus: float
    pressure: float
    newton_iters: int
    residual: float


def equilibrium_closure(R_plus, R_minus, s_plus, s_minus, gamma_plus, gamma_minus,
                        tol=None) -> ClosureSolution:
    """Volume fraction for which both phase pressures agree.

    ``tol`` bounds ``|p+ - p-|``; by default ``1e-12 * max(p+, p-)``.
    """
    if not (R_plus > 0 and R_minus > 0):
        raise VanishingPhaseError(f"vanishing phase: R+={R_plus!r}, R-={R_minus!r}")
    alpha, iters, status = kernels.closure_solve(
        np.array([R_plus], dtype=float), np.array([R_minus], dtype=float),
        float(s_plus), float(s_minus), gamma_plus, gamma_minus)
    if status[0] != kernels.STATUS_OK:
        raise SolverFailure("closure solve did not converge", bracket=(DELTA, 1 - DELTA))
    a = float(alpha[0])
    rho_p = R_plus / a
    rho_m = R_minus / (1.0 - a)
    pp = rho_p ** gamma_plus * math.exp(s_plus)
    pm = rho_m ** gamma_minus * math.exp(s_minus)
    res = abs(pp - pm)
    limit = CLOSURE_RTOL * max(pp, pm) if tol is None else tol
    if res > limit:
        raise SolverFailure(f"closure residual {res:.3e} above tolerance {limit:.3e}",
                            bracket=(a, a))
    return ClosureSolution(a, rho_p, rho_m, 0.5 * (pp + pm), int(iters[0]), res)


@dataclass
class ClosureFields:
    alpha: np.ndarray
    rho_plus: np.ndarray
    rho_minus: np.ndarray
    p_plus: np.ndarray
    p_minus: np.ndarray
    newton_iters: int = 0

    @property
    def pressure(self) -> np.ndarray:
        # algebraic closures: p+ == p- up to the solver tolerance
        return 0.5 * (self.p_plus + self.p_minus)


def solve_alpha(R_plus, R_minus, S_plus, S_minus, params: PhysParams):
    """Vectorized equilibrium fraction with cell-indexed errors."""
    alpha, iters, status = kernels.closure_solve(
        R_plus, R_minus, S_plus, S_minus, params.gamma_plus, params.gamma_minus)
    if np.any(status != kernels.STATUS_OK):
        i = int(np.flatnonzero(status != kernels.STATUS_OK)[0])
        if status[i] == kernels.STATUS_VANISHING:
            raise VanishingPhaseError("vanishing phase in closure", cell=i)
        raise SolverFailure("closure solve did not converge", bracket=(DELTA, 1 - DELTA), cell=i)
    return alpha, int(iters.max()) if iters.size else 0


def closure_project(state: PhaseState, params: PhysParams, tol=None) -> ClosureFields:
    """Per-cell (alpha, rho+, rho-, p+, p-) of a state.

    Algebraic models solve the closure in every cell; PDE-closure models keep
    the stored volume fraction and just evaluate both pressures; the one-phase
    model reports alpha = 1 and copies the single pressure into both slots.
    """
    model = state.model
    Sp = state.S_plus if state.S_plus is not None else 0.0
    Sm = state.S_minus if state.S_minus is not None else 0.0
    if model is ModelId.M1:
        rho = state.R_plus
        if np.any(rho <= 0):
            raise VanishingPhaseError("non-positive density", cell=int(np.argmax(rho <= 0)))
        p = rho ** params.gamma_plus
        return ClosureFields(np.ones_like(rho), rho, rho, p, p.copy())
    if model.pde_closure:
        alpha = state.alpha_plus
        iters = 0
    else:
        alpha, iters = solve_alpha(state.R_plus, state.R_minus, Sp, Sm, params)
    rho_p = state.R_plus / alpha
    rho_m = state.R_minus / (1.0 - alpha)
    pp = rho_p ** params.gamma_plus * np.exp(Sp)
    pm = rho_m ** params.gamma_minus * np.exp(Sm)
    if model.algebraic_closure:
        gap = np.abs(pp - pm)
        limit = CLOSURE_RTOL * np.maximum(pp, pm) if tol is None else tol
        bad = gap > limit
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise SolverFailure(f"closure residual {gap[i]:.3e} above tolerance", cell=i)
    return ClosureFields(alpha, rho_p, rho_m, pp, pm, iters)
