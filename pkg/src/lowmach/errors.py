class LowMachError(Exception):
    """Base class for solver errors."""


class DomainError(LowMachError, ValueError):
    pass


class VanishingPhaseError(LowMachError, ValueError):
    """A partial mass is zero or negative; the closure is undefined there."""

    def __init__(self, msg, cell=None):
        super().__init__(msg if cell is None else f"{msg} (cell {cell})")
        self.cell = cell


class SolverFailure(LowMachError, RuntimeError):
    """Newton/bisection did not converge; ``bracket`` holds the last interval."""

    def __init__(self, msg, bracket=None, cell=None):
        if cell is not None:
            msg = f"{msg} (cell {cell})"
        if bracket is not None:
            msg = f"{msg}; last bracket {bracket}"
        super().__init__(msg)
        self.bracket = bracket
        self.cell = cell


class PositivityError(LowMachError):
    pass


class ConfigError(LowMachError, ValueError):
    pass


class StepError(LowMachError):
    def __init__(self, step, cause):
        super().__init__(f"step {step}: {cause}")
        self.step = step
        self.cause = cause
