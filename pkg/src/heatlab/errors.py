"""Exception hierarchy shared across the lab.

Exit-code mapping in the CLI relies on this split: SpecParseError and
DomainError are user errors (exit 2), NumericalFailure and TruncationError
are numerical failures (exit 3).
"""


class HeatLabError(Exception):
    """Base class for all lab errors."""


class SpecParseError(HeatLabError):
    """Malformed manifold spec, t-grid descriptor, or constants file.

    The message always names the offending token.
    """


class InvalidPointError(HeatLabError):
    """Point coordinates do not match the manifold chart arity."""


class UnsupportedManifoldError(HeatLabError):
    """Operation not defined for this manifold kind."""


class DomainError(HeatLabError):
    """Precondition violation on a bound or check (bad alpha, t2 <= t1, f > A)."""


class IncompatibleCheckError(DomainError):
    """Bound selector not applicable to the given manifold."""


class TruncationError(HeatLabError):
    """Series evaluation cannot be certified at the requested time or tolerance."""


class UnresolvedEvaluationError(TruncationError):
    """Kernel value is below the truncation/rounding noise floor."""


class NumericalFailure(HeatLabError):
    """Eigen-solver non-convergence or similar runtime numerical breakdown."""


class ProfileError(HeatLabError):
    """Profile curve is unusable (non-positive or spline construction failed)."""
