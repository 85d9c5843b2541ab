"""Exception hierarchy with stable machine-readable codes.

Every error raised by this package carries a short ``code`` string so the
CLI and tests can match failure modes without parsing messages.
"""

from __future__ import annotations


class RetrialQError(Exception):
    """Base class; ``code`` identifies the failure mode."""

    code = "error"

    def __init__(self, message: str = "", **context):
        self.context = context
        if context:
            detail = ", ".join(f"{k}={v}" for k, v in context.items())
            message = f"{message} ({detail})" if message else detail
        super().__init__(message)


class UndefinedRho(RetrialQError):
    # load factor needs thb > 0, lambda*at_0 > 0 and nu > 0
    code = "undefined-rho"


class UnsupportedK(RetrialQError):
    code = "unsupported-K"


class SingularBlock(RetrialQError):
    code = "singular-block"


class NotErgodic(RetrialQError):
    code = "not-ergodic"


class NoNullVector(RetrialQError):
    code = "no-null-vector"


class TruncationLimit(RetrialQError):
    code = "truncation-limit"


class DivergenceRisk(RetrialQError):
    code = "divergence-risk"


class UnsupportedVariant(RetrialQError):
    code = "unsupported-variant"


class SingularShift(RetrialQError):
    code = "singular-shift"


class NotPersistent(RetrialQError):
    code = "not-persistent"


class NoOrbitInflow(RetrialQError):
    code = "no-orbit-inflow"


class NotOkubo(RetrialQError):
    code = "not-okubo"


class PureOrbit(RetrialQError):
    code = "pure-orbit"


class WrongDimension(RetrialQError):
    code = "dimension"


class NotApplicable(RetrialQError):
    code = "not-applicable"


class SeriesDivergence(RetrialQError):
    code = "series-divergence"


class WindowTooSmall(RetrialQError):
    code = "window-too-small"


class TailUnderflow(RetrialQError):
    code = "tail-underflow"


class CapExceeded(RetrialQError):
    code = "cap-exceeded"
