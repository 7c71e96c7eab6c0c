"""Exception hierarchy.

Every failure raised by the library derives from :class:`SwitchStabError` so the
CLI can map it onto an exit code in one place.
"""


class SwitchStabError(Exception):
    """Base class for all library errors."""


class InvalidInput(SwitchStabError, ValueError):
    """Malformed matrices, signals or files."""


class DegenerateOrdering(SwitchStabError):
    """Real eigenvalues of equal modulus: the labeling convention is ambiguous."""


class HypothesesViolated(SwitchStabError):
    """One of H1-H4 fails; carries the :class:`HypothesisReport`."""

    def __init__(self, report, message=None):
        self.report = report
        super().__init__(message or f"hypotheses violated: {report.failure_detail}")


class DomainError(SwitchStabError, ValueError):
    """A closed-form contraction formula was evaluated outside its subcase."""


class DegenerateQ(SwitchStabError):
    """Q(x) = det(Ax, Bx) vanishes identically (proportional fields)."""


class NoRotation(SwitchStabError):
    """The worst trajectory does not turn around the origin."""


class NumericalFailure(SwitchStabError):
    """Root bracketing, fixed-point or LP failure (CLI exit code 4)."""


class NoConvergence(NumericalFailure):
    pass


class RootBracketFailure(NumericalFailure):
    pass


class BracketFailure(RootBracketFailure):
    pass


class SolverCycle(NumericalFailure):
    pass


class EscalationExceeded(NumericalFailure):
    pass


class ConvexityFailure(NumericalFailure):
    pass


class NotGUES(SwitchStabError):
    """The operation needs a GUES pair."""


class SubcaseUnsupported(SwitchStabError):
    """The requested construction is not available for this subcase."""


class SignalGap(SwitchStabError, ValueError):
    """A switching signal does not cover the requested horizon."""
