"""Exception hierarchy shared by all modules."""


class ReplicatorError(Exception):
    """Base class for errors raised by this package."""


class SimplexError(ReplicatorError, ValueError):
    """A vector is not (close enough to) a point of the probability simplex."""


class DimensionError(ReplicatorError, ValueError):
    pass


class RegimeError(ReplicatorError, ValueError):
    """Parameters fall outside the regime an operation is valid for."""


class NoInteriorEquilibrium(ReplicatorError):
    """The bordered equilibrium system is singular."""


class EquilibriumNotInterior(ReplicatorError):
    """The equilibrium exists but has a nonpositive coordinate."""

    def __init__(self, message, alpha=None):
        super().__init__(message)
        self.alpha = alpha


class ToleranceExceeded(ReplicatorError):
    """A perturbed equilibrium left the open simplex."""


class NotContractive(ReplicatorError):
    """Fixed-point iterates kept expanding."""


class IntegratorBlowup(ReplicatorError, FloatingPointError):
    """A time step produced a non-finite state."""

    def __init__(self, step, particle=None):
        where = f"step {step}" if particle is None else f"step {step}, particle {particle}"
        super().__init__(f"non-finite state at {where}")
        self.step = step
        self.particle = particle


class ConvergenceError(ReplicatorError):
    pass


class LPInfeasible(ReplicatorError):
    pass


class LPUnbounded(ReplicatorError):
    pass


class ConfigError(ReplicatorError):
    """Invalid experiment configuration; ``field`` and ``line`` locate it."""

    def __init__(self, message, field=None, line=None):
        loc = []
        if field:
            loc.append(f"field '{field}'")
        if line is not None:
            loc.append(f"line {line}")
        text = f"{message} ({', '.join(loc)})" if loc else message
        super().__init__(text)
        self.field = field
        self.line = line
