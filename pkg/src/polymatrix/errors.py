"""Exception types shared across the package.

The CLI maps these onto distinct process exit codes, so new error
conditions should reuse one of the classes below rather than raising
bare builtins.
"""


class PolymatrixError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(PolymatrixError, ValueError):
    """An argument is out of range or structurally invalid."""


class CapacityError(PolymatrixError):
    """A profile-space enumeration would exceed the configured cap."""

    def __init__(self, message: str, profile_count: int, cap: int):
        super().__init__(message)
        self.profile_count = profile_count
        self.cap = cap


class ModelUndefinedError(PolymatrixError):
    """An observation model is undefined for the given game (e.g. no equilibria)."""


class InvalidDistributionError(PolymatrixError):
    """A supplied probability table is not a distribution over the profile space."""


class DegeneratePoaError(PolymatrixError):
    """Price of anarchy is undefined because the equilibrium welfare is zero."""

    def __init__(self, message: str, max_welfare: float, min_equilibrium_welfare: float):
        super().__init__(message)
        self.max_welfare = max_welfare
        self.min_equilibrium_welfare = min_equilibrium_welfare


class ScheduleInfeasibleError(PolymatrixError):
    """The sample-size schedule has no finite solution for the given inputs."""


class ParseError(PolymatrixError):
    """A file or text payload could not be parsed."""
