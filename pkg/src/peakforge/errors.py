"""Exception hierarchy.

Every error raised on purpose by the library derives from ``PeakforgeError``.
The CLI maps the three families below onto its exit codes.
"""


class PeakforgeError(Exception):
    """Base class."""


class ConfigError(PeakforgeError, ValueError):
    """Invalid input or parameters (CLI exit code 1)."""


class VerificationError(PeakforgeError):
    """A numerical verification stage could not be completed (exit code 2)."""


class SolverError(PeakforgeError):
    """An iterative solver failed (exit code 3)."""


# configuration / precondition failures
class OddPointCount(ConfigError):
    pass


class GridMismatch(ConfigError):
    pass


class BallOutsideGrid(ConfigError):
    pass


class ResolutionTooCoarse(ConfigError):
    pass


class KernelUnderresolved(ConfigError):
    pass


# verification failures
class TailDominates(VerificationError):
    pass


class ExtrapolationUnstable(VerificationError):
    pass


class NonConvergent(VerificationError):
    pass


class EigNotConverged(VerificationError):
    pass


# solver failures
class KrylovStagnation(SolverError):
    pass


class NotContracting(SolverError):
    pass


class OuterNewtonDiverged(SolverError):
    pass
