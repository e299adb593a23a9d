import numpy as np
import pytest

from lowmach.models import Grid1D, ModelId, PhaseState, RunConfig, default_params

ALL_MODELS = list(ModelId)


def small_config(model, n=32, eps=0.5, t_end=0.02, **params):
    model = ModelId(model)
    if model.pde_closure:
        params.setdefault("tau_relax", 1.0)
    return RunConfig(model, default_params(model, **params), Grid1D(n), epsilon=eps, t_end=t_end,
                     output_stride=1)


def uniform_state(model, n=16, alpha=0.5, u=0.0, rho_plus=1.0, rho_minus=1.0):
    model = ModelId(model)
    one = np.ones(n)
    if model is ModelId.M1:
        return PhaseState(model, R_plus=rho_plus * one, m=rho_plus * u * one)
    Rp, Rm = alpha * rho_plus * one, (1 - alpha) * rho_minus * one
    kw = dict(R_plus=Rp, R_minus=Rm)
    if model.pde_closure:
        kw["alpha_plus"] = alpha * one
    if model.two_velocity:
        kw["m_plus"], kw["m_minus"] = Rp * u, Rm * u
    else:
        kw["m"] = (Rp + Rm) * u
    if model.entropic:
        kw["S_plus"], kw["S_minus"] = 0 * one, 0 * one
    return PhaseState(model, **kw)


@pytest.fixture(params=ALL_MODELS, ids=lambda m: m.value)
def model(request):
    return request.param


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_line():
    """Record (and print) one acceptance verdict line."""
    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
