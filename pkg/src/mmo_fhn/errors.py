"""Exception hierarchy shared by all modules."""


class FhnError(Exception):
    """Base class for every error raised by :mod:`mmo_fhn`."""


class DegenerateC(FhnError):
    """``|c| >= 1/sqrt(eps)``: the Jacobian at the bifurcation point has no imaginary pair."""


class NoRoot(FhnError):
    """The stationary-point cubic could not be solved."""


class ConvergenceFailure(FhnError):
    """A safeguarded root solve did not converge."""


class OutOfDomain(FhnError):
    """Coordinates outside the domain of an (Q, phi) map."""


class StepTooLarge(FhnError):
    """Integration step violates the stiffness guard."""


class NonFinite(FhnError):
    """State left the blow-up guard box or became non-finite."""


class StepTooCoarse(FhnError):
    """A single step changed the winding angle by more than pi/2."""


class ChartInvalid(FhnError):
    """The Poincare chart geometry is inconsistent."""


class HorizonExceeded(FhnError):
    """The time horizon was reached before the event could be classified."""


class NotConverged(FhnError):
    """Power iteration failed to converge."""


class InsufficientTail(FhnError):
    """Too few large observations to resolve the generating-function pole."""


class ConfigError(FhnError):
    """Malformed experiment configuration."""
