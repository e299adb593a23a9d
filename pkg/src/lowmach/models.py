"""Model catalog, parameter sets and the state container shared by the solver."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np


class ModelId(str, enum.Enum):
    M1 = "M1"  # one-phase isentropic Navier-Stokes
    M2 = "M2"  # two-phase, one velocity, algebraic pressure closure
    M3 = "M3"  # two-phase, one velocity, PDE (relaxation) closure
    M4 = "M4"  # two-phase, one velocity, non-isentropic, algebraic closure
    M5 = "M5"  # two-phase, two velocities, isentropic, algebraic closure
    M6 = "M6"  # two-phase, two velocities, non-isentropic, algebraic closure
    M7 = "M7"  # two-phase, two velocities, non-isentropic, PDE closure

    @property
    def two_phase(self) -> bool:
        return self is not ModelId.M1

    @property
    def two_velocity(self) -> bool:
        return self in (ModelId.M5, ModelId.M6, ModelId.M7)

    @property
    def pde_closure(self) -> bool:
        return self in (ModelId.M3, ModelId.M7)

    @property
    def algebraic_closure(self) -> bool:
        return self in (ModelId.M2, ModelId.M4, ModelId.M5, ModelId.M6)

    @property
    def entropic(self) -> bool:
        return self in (ModelId.M4, ModelId.M6, ModelId.M7)

    @property
    def viscous(self) -> bool:
        return not self.two_velocity


STATE_FIELDS = ("R_plus", "R_minus", "alpha_plus", "m", "m_plus", "m_minus", "S_plus", "S_minus")


def active_fields(model: ModelId) -> frozenset[str]:
    """Return the PhaseState fields evolved by ``model``."""
    model = ModelId(model)
    if model is ModelId.M1:
        return frozenset({"R_plus", "m"})
    fields = {"R_plus", "R_minus"}
    if model.pde_closure:
        fields.add("alpha_plus")
    if model.two_velocity:
        fields |= {"m_plus", "m_minus"}
    else:
        fields.add("m")
    if model.entropic:
        fields |= {"S_plus", "S_minus"}
    return frozenset(fields)


@dataclass(frozen=True)
class PintRule:
    """Interfacial pressure rule: the cell's equilibrium pressure, or a constant."""

    kind: str = "equilibrium-pressure"
    value: float = 0.0

    def __str__(self) -> str:
        if self.kind == "constant":
            return f"constant({self.value!r})"
        return self.kind

    @classmethod
    def parse(cls, text: str) -> "PintRule":
        text = text.strip()
        if text == "equilibrium-pressure":
            return cls()
        if text.startswith("constant(") and text.endswith(")"):
            return cls("constant", float(text[len("constant("):-1]))
        raise ValueError(f"unknown pint_rule {text!r}")


@dataclass(frozen=True)
class PhysParams:
    gamma_plus: float = 1.4
    gamma_minus: float = 2.0
    mu_visc: float = 0.0
    lambda_visc: float = 0.0
    # relaxation coefficient of the PDE closure (rate 1 / (eps^2 * tau_relax))
    tau_relax: Optional[float] = None
    eta_drag: float = 0.0
    pint_rule: PintRule = field(default_factory=PintRule)
    body_force: float = 0.0


@dataclass(frozen=True)
class Grid1D:
    n_cells: int = 256
    length: float = 1.0

    @property
    def dx(self) -> float:
        return self.length / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.dx


@dataclass(frozen=True)
class PerturbationProfile:
    """Smooth periodic profile ``offset + amplitude * shape(x)``.

    ``kind`` is one of ``sine``, ``bump``, ``random-smooth`` or ``zero``.
    """

    kind: str = "sine"
    amplitude: float = 0.0
    k: int = 1
    offset: float = 0.0
    center: float = 0.5
    width: float = 0.1
    modes: int = 4
    seed: int = 0

    def __call__(self, x: np.ndarray, length: float = 1.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            shape = np.zeros_like(x)
        elif self.kind == "sine":
            shape = np.sin(2.0 * np.pi * self.k * x / length)
        elif self.kind == "bump":
            # periodic Gaussian: distance measured on the circle
            d = (x - self.center + 0.5 * length) % length - 0.5 * length
            shape = np.exp(-0.5 * (d / self.width) ** 2)
        elif self.kind == "random-smooth":
            rng = np.random.default_rng(self.seed)
            coef = rng.standard_normal((self.modes, 2))
            shape = np.zeros_like(x)
            for j in range(self.modes):
                kx = 2.0 * np.pi * (j + 1) * x / length
                shape += (coef[j, 0] * np.cos(kx) + coef[j, 1] * np.sin(kx)) / (j + 1) ** 2
            shape /= np.max(np.abs(shape))
        else:
            raise ValueError(f"unknown profile kind {self.kind!r}")
        return self.offset + self.amplitude * shape

    def derivative(self, x: np.ndarray, length: float = 1.0) -> np.ndarray:
        if self.kind != "sine":
            raise NotImplementedError("analytic derivative only for sine profiles")
        w = 2.0 * np.pi * self.k / length
        return self.amplitude * w * np.cos(w * np.asarray(x, dtype=float))

    def problems(self) -> list[str]:
        out = []
        if self.kind not in ("sine", "bump", "random-smooth", "zero"):
            out.append(f"profile kind {self.kind!r} unknown")
        if not math.isfinite(self.amplitude) or not math.isfinite(self.offset):
            out.append("profile amplitude must be finite")
        if self.k < 1:
            out.append("profile wavenumber k must be >= 1")
        if self.kind == "bump" and not self.width > 0:
            out.append("bump width must be positive")
        if self.kind == "random-smooth" and self.modes < 1:
            out.append("random-smooth needs modes >= 1")
        return out


def _default_alpha() -> PerturbationProfile:
    return PerturbationProfile("sine", amplitude=0.2, offset=0.5)


def _default_velocity() -> PerturbationProfile:
    return PerturbationProfile("sine", amplitude=1.0)


def _zero() -> PerturbationProfile:
    return PerturbationProfile("zero")


@dataclass(frozen=True)
class InitSpec:
    """Description of the well-prepared initial data attached to a run."""

    alpha_profile: PerturbationProfile = field(default_factory=_default_alpha)
    u_mean: float = 0.3
    velocity_profile: PerturbationProfile = field(default_factory=_default_velocity)
    entropy_plus: PerturbationProfile = field(default_factory=_zero)
    entropy_minus: PerturbationProfile = field(default_factory=_zero)
    c0: float = 1.0


@dataclass(frozen=True)
class RunConfig:
    model: ModelId
    params: PhysParams = field(default_factory=PhysParams)
    grid: Grid1D = field(default_factory=Grid1D)
    epsilon: float = 0.1
    cfl: float = 0.4
    t_end: float = 0.2
    output_stride: int = 50
    seed: int = 0
    init: InitSpec = field(default_factory=InitSpec)
    sweep_epsilons: Optional[tuple[float, ...]] = None

    def with_epsilon(self, epsilon: float) -> "RunConfig":
        return replace(self, epsilon=epsilon)


@dataclass(frozen=True)
class PhaseState:
    """Cell averages of one simulation; inactive fields are ``None``."""

    model: ModelId
    R_plus: np.ndarray
    R_minus: Optional[np.ndarray] = None
    alpha_plus: Optional[np.ndarray] = None
    m: Optional[np.ndarray] = None
    m_plus: Optional[np.ndarray] = None
    m_minus: Optional[np.ndarray] = None
    S_plus: Optional[np.ndarray] = None
    S_minus: Optional[np.ndarray] = None
    time: float = 0.0

    @property
    def n_cells(self) -> int:
        return self.R_plus.shape[0]

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in STATE_FIELDS if getattr(self, name) is not None}

    def replace(self, **changes) -> "PhaseState":
        return replace(self, **changes)

    def check(self) -> list[str]:
        """Return violated PhaseState invariants (empty when valid)."""
        errs = []
        have = {k for k, v in self.arrays().items()}
        want = active_fields(self.model)
        if have != want:
            errs.append(f"fields {sorted(have)} do not match model {self.model.value} ({sorted(want)})")
        n = self.n_cells
        for name, arr in self.arrays().items():
            if arr.shape != (n,):
                errs.append(f"{name} has shape {arr.shape}, expected ({n},)")
            elif not np.all(np.isfinite(arr)):
                errs.append(f"{name} has non-finite entries")
        for name in ("R_plus", "R_minus"):
            arr = getattr(self, name)
            if arr is not None and np.any(arr < 0):
                errs.append(f"{name} has negative entries")
        if self.alpha_plus is not None and np.any((self.alpha_plus <= 0) | (self.alpha_plus >= 1)):
            errs.append("alpha_plus leaves (0, 1)")
        return errs


def validate(config: RunConfig) -> list[str]:
    """Collect every violated configuration invariant; an empty list means ok."""
    errs: list[str] = []
    try:
        model = ModelId(config.model)
    except ValueError:
        return [f"unknown model {config.model!r}"]
    p = config.params

    def finite(*vals):
        return all(v is not None and isinstance(v, (int, float)) and math.isfinite(v) for v in vals)

    if not finite(p.gamma_plus) or p.gamma_plus <= 1:
        errs.append("gamma_plus must be > 1")
    if model.two_phase and (not finite(p.gamma_minus) or p.gamma_minus <= 1):
        errs.append("gamma_minus must be > 1")
    if not finite(p.mu_visc, p.lambda_visc):
        errs.append("viscosity coefficients must be finite")
    elif model.viscous:
        if p.mu_visc <= 0:
            errs.append("mu_visc must be > 0 for viscous models")
        if p.lambda_visc + 2 * p.mu_visc <= 0:
            errs.append("lambda_visc + 2 mu_visc must be > 0")
    elif p.mu_visc != 0 or p.lambda_visc != 0:
        errs.append("two-velocity models are inviscid here: mu_visc and lambda_visc must be 0")
    if model.pde_closure:
        if p.tau_relax is None or not finite(p.tau_relax) or p.tau_relax <= 0:
            errs.append("relaxation coefficient required: tau_relax must be > 0")
    elif p.tau_relax is not None and (not finite(p.tau_relax) or p.tau_relax <= 0):
        errs.append("tau_relax must be > 0 when given")
    if not finite(p.eta_drag) or p.eta_drag < 0:
        errs.append("eta_drag must be >= 0")
    elif p.eta_drag > 0 and not model.two_velocity:
        errs.append("drag applies to two-velocity models only")
    if p.pint_rule.kind not in ("equilibrium-pressure", "constant"):
        errs.append(f"unknown pint_rule {p.pint_rule.kind!r}")
    elif p.pint_rule.kind == "constant" and not finite(p.pint_rule.value):
        errs.append("constant pint_rule value must be finite")
    if p.body_force != 0:
        errs.append("body_force is fixed at 0")
    g = config.grid
    if not isinstance(g.n_cells, (int, np.integer)) or g.n_cells < 8:
        errs.append("n_cells must be an integer >= 8")
    if not finite(g.length) or g.length <= 0:
        errs.append("length must be > 0")
    if not finite(config.epsilon) or not 0 < config.epsilon <= 1:
        errs.append("epsilon must lie in (0, 1]")
    if not finite(config.cfl) or not 0 < config.cfl < 1:
        errs.append("cfl must lie in (0, 1)")
    if not finite(config.t_end) or config.t_end < 0:
        errs.append("t_end must be >= 0")
    if not isinstance(config.output_stride, (int, np.integer)) or config.output_stride < 1:
        errs.append("output_stride must be a positive integer")
    init = config.init
    for name in ("alpha_profile", "velocity_profile", "entropy_plus", "entropy_minus"):
        errs.extend(f"{name}: {msg}" for msg in getattr(init, name).problems())
    if not finite(init.u_mean):
        errs.append("u_mean must be finite")
    if not finite(init.c0) or init.c0 <= 0:
        errs.append("c0 must be > 0")
    if config.sweep_epsilons is not None:
        eps = list(config.sweep_epsilons)
        if any(not finite(e) or not 0 < e <= 1 for e in eps):
            errs.append("sweep.epsilons must lie in (0, 1]")
    return errs


def default_params(model: ModelId, **overrides) -> PhysParams:
    """Documented defaults: viscosity 0.01 for M1-M4, inviscid otherwise."""
    model = ModelId(model)
    base = dict(mu_visc=0.01 if model.viscous else 0.0)
    base.update(overrides)
    return PhysParams(**base)
