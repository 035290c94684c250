"""Exception taxonomy shared across the package.

Numerical failure modes that a driver can react to get their own types;
plain precondition violations raise ValueError subclasses so they map to
usage errors at the CLI boundary (exit 2 vs exit 3).
"""

from __future__ import annotations

__all__ = [
    "HeterokinkError",
    "DomainError",
    "NonpositiveWidth",
    "ConfigError",
    "FileFormatError",
    "NumericalFailure",
    "NotEnoughCrossings",
    "FewerThanTwoCrossings",
    "MismatchedFamilies",
    "InsufficientRows",
    "BranchLost",
    "NewtonDiverged",
    "MeshBudget",
    "ContinuationStalled",
]


class HeterokinkError(Exception):
    """Base class for package-specific exceptions."""


class DomainError(HeterokinkError, ValueError):
    """Input outside the mathematical domain of a closed-form evaluator."""


class NonpositiveWidth(DomainError):
    """Width law evaluated where the predicted width is not positive."""


class ConfigError(HeterokinkError, ValueError):
    """Bad configuration key or value."""


class FileFormatError(HeterokinkError, ValueError):
    """Malformed data file; carries the 1-based offending line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InsufficientRows(HeterokinkError, ValueError):
    """A fit was requested on fewer rows than the model needs."""


class MismatchedFamilies(HeterokinkError, ValueError):
    """Tables/predictions do not refer to one common (kind, k) family."""


class FewerThanTwoCrossings(HeterokinkError, ValueError):
    """A profile does not cross zero at least twice."""


class NumericalFailure(HeterokinkError, RuntimeError):
    """Base for runtime numerical failures (CLI exit code 3)."""


class NotEnoughCrossings(NumericalFailure):
    """Trajectory reached its stop condition with too few zero crossings."""

    def __init__(self, needed: int, found: int):
        super().__init__(f"needed {needed} zero crossings, trajectory has {found}")
        self.needed = needed
        self.found = found


class BranchLost(NumericalFailure):
    """Branch tracing failed on consecutive schedule steps.

    Carries the points accepted before the loss in ``points``.
    """

    def __init__(self, message: str, points=()):
        super().__init__(message)
        self.points = list(points)


class NewtonDiverged(NumericalFailure):
    """Damped Newton hit the damping floor or the iteration cap."""


class MeshBudget(NumericalFailure):
    """Mesh refinement exceeded the node budget."""


class ContinuationStalled(NumericalFailure):
    """Parameter continuation could not pass a schedule point.

    Carries the solutions obtained before the stall in ``solutions``.
    """

    def __init__(self, message: str, solutions=()):
        super().__init__(message)
        self.solutions = list(solutions)
