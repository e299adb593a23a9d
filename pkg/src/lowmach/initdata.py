"""Well-prepared initial data and the exact 1-D periodic limit solution."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError
from .models import Grid1D, ModelId, PerturbationProfile, PhaseState, RunConfig

ALPHA_MARGIN = 0.05


def equilibrium_densities(c0, s_plus, s_minus, gamma_plus, gamma_minus):
    """Densities at which both pressures equal ``c0``."""
    rho_p = c0 ** (1.0 / gamma_plus) * np.exp(-np.asarray(s_plus, dtype=float) / gamma_plus)
    rho_m = c0 ** (1.0 / gamma_minus) * np.exp(-np.asarray(s_minus, dtype=float) / gamma_minus)
    return rho_p, rho_m


def make_well_prepared(config: RunConfig,
                       alpha_profile: Optional[PerturbationProfile] = None,
                       u_mean: Optional[float] = None,
                       entropy_profiles: Optional[tuple[PerturbationProfile, PerturbationProfile]] = None,
                       velocity_profile: Optional[PerturbationProfile] = None,
                       c0: Optional[float] = None) -> PhaseState:
    """Build well-prepared data: equilibrium densities, velocity ``u_mean + eps * profile``.

    Arguments left as ``None`` are taken from ``config.init``.
    """
    init = config.init
    alpha_profile = alpha_profile or init.alpha_profile
    u_mean = init.u_mean if u_mean is None else u_mean
    velocity_profile = velocity_profile or init.velocity_profile
    if entropy_profiles is None:
        entropy_profiles = (init.entropy_plus, init.entropy_minus)
    c0 = init.c0 if c0 is None else c0

    model = ModelId(config.model)
    grid = config.grid
    x = grid.centers
    p = config.params
    u = u_mean + config.epsilon * velocity_profile(x, grid.length)

    if model is ModelId.M1:
        rho = np.full(grid.n_cells, c0 ** (1.0 / p.gamma_plus))
        return PhaseState(model, R_plus=rho, m=rho * u)

    alpha = alpha_profile(x, grid.length)
    if np.any(alpha <= ALPHA_MARGIN) or np.any(alpha >= 1.0 - ALPHA_MARGIN):
        raise DomainError(f"alpha profile leaves ({ALPHA_MARGIN}, {1 - ALPHA_MARGIN})")
    if model.entropic:
        s_plus = entropy_profiles[0](x, grid.length)
        s_minus = entropy_profiles[1](x, grid.length)
    else:
        s_plus = np.zeros_like(x)
        s_minus = np.zeros_like(x)
    rho_p, rho_m = equilibrium_densities(c0, s_plus, s_minus, p.gamma_plus, p.gamma_minus)
    R_plus = alpha * rho_p
    R_minus = (1.0 - alpha) * rho_m
    fields = dict(R_plus=R_plus, R_minus=R_minus)
    if model.pde_closure:
        fields["alpha_plus"] = alpha.copy()
    if model.two_velocity:
        fields["m_plus"] = R_plus * u
        fields["m_minus"] = R_minus * u
    else:
        fields["m"] = (R_plus + R_minus) * u
    if model.entropic:
        fields["S_plus"] = s_plus
        fields["S_minus"] = s_minus
    return PhaseState(model, **fields)


@dataclass(frozen=True)
class LimitState:
    x: np.ndarray
    alpha: np.ndarray
    u: float
    rho_plus: float
    rho_minus: float


def exact_limit_state(alpha_profile: PerturbationProfile, u_mean: float, t: float,
                      grid: Grid1D, gamma_plus: float = 1.4, gamma_minus: float = 2.0,
                      c0: float = 1.0) -> LimitState:
    """Limit solution in 1-D periodic: constant velocity translating the initial fraction."""
    x = grid.centers
    shifted = (x - u_mean * t) % grid.length
    return LimitState(x, alpha_profile(shifted, grid.length), float(u_mean),
                      c0 ** (1.0 / gamma_plus), c0 ** (1.0 / gamma_minus))
