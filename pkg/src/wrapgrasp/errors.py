"""Exception types shared across the wrapgrasp modules."""


class WrapGraspError(Exception):
    """Base class for all package-specific errors."""


class InvalidParameterError(WrapGraspError, ValueError):
    """A constructor or operation received an out-of-domain parameter."""


class ConstructionError(WrapGraspError, ValueError):
    """A boundary curve could not be built (degenerate or self-intersecting)."""


class SingularityError(WrapGraspError, ArithmeticError):
    """The shadow-point map degenerated: 1 + rho*kappa_o <= 0."""

    def __init__(self, message, s=None):
        super().__init__(message)
        self.s = s


class AdmissibilityError(WrapGraspError, RuntimeError):
    """A trajectory left the admissible region (rho > 0, 0 < alpha < pi, nu_o > 0).

    ``s`` holds the arm arclength at which integration was aborted.
    """

    def __init__(self, message, s=None):
        super().__init__(message)
        self.s = s


class TrackingLostError(WrapGraspError, RuntimeError):
    """closest_point found no local minimizer ahead of the hint."""


class ReconstructionMismatchError(WrapGraspError, RuntimeError):
    """Reconstructed arm geometry disagreed with the integrated contact state."""


class EmptyContactError(WrapGraspError, ValueError):
    """A grasp-map computation was requested for an empty contact set."""


class InfeasibleGainsError(WrapGraspError, ValueError):
    """The equilibrium quadratic has no positive root for the given gains."""


class DomainError(WrapGraspError, ValueError):
    """A function was evaluated outside its mathematical domain."""


class OptimizationFailedError(WrapGraspError, RuntimeError):
    """All starts of a derivative-free search failed to produce a finite value."""


class ScenarioError(WrapGraspError, ValueError):
    """A scenario config file is malformed; the message names the offending key."""
