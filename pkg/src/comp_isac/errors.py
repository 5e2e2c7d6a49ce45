"""Exception types shared across the library.

Every error raised by this package derives from :class:`IsacError`, so
callers can catch one base class. Where it makes sense the classes also
inherit from the matching builtin (ValueError, ArithmeticError,
RuntimeError) to stay friendly to generic handlers.
"""


class IsacError(Exception):
    """Base class for all library-specific errors."""


class DomainError(IsacError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class AccuracyError(IsacError, ArithmeticError):
    """A series hit its hard term cap before meeting the accuracy target.

    Raised instead of silently truncating, so a caller never receives a
    value that quietly missed its tolerance.
    """


class ConfigError(IsacError, ValueError):
    """A scenario or sweep configuration is invalid.

    The message always names the offending key so a user editing the
    config file knows what to fix.
    """

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"key '{key}': {message}")


class RankDeficiencyError(IsacError, ValueError):
    """The symbol matrix is numerically rank deficient.

    The GLRT projection needs a full-column-rank symbol block; below the
    rank threshold the quadratic form is not well defined.
    """


class InfeasibleError(IsacError, RuntimeError):
    """No power vector satisfies the constraint set.

    ``family`` names the constraint family ('budget', 'sinr', 'sensing',
    'positivity') with the worst slack at the analytic center, which is
    usually the binding culprit.
    """

    def __init__(self, message, family=None):
        self.family = family
        super().__init__(message)


class InfeasibleTargetError(DomainError):
    """A requested probability target cannot be met for any argument value."""


class SamplingExhaustedError(IsacError, RuntimeError):
    """Rejection sampling hit its attempt cap; the region is empirically empty."""


class SolverError(IsacError, RuntimeError):
    """The interior-point solver exceeded its Newton step budget.

    This signals conditioning trouble rather than infeasibility; the
    constraint set was verified nonempty before the solve started.
    """
