"""Exception types with machine-readable codes and CLI exit codes.

Exit-code contract: 0 = pass/converged, 1 = completed-not-passing,
2 = input error, 3 = numerical failure.
"""

from __future__ import annotations


class ThetaLabError(Exception):
    """Base class for all package errors."""

    code = "ERROR"
    exit_code = 3

    def payload(self) -> dict:
        return {"error": self.code, "message": str(self)}


class InvalidInputError(ThetaLabError):
    code = "INVALID_INPUT"
    exit_code = 2


class TauNotSymmetricError(InvalidInputError):
    code = "TAU_NOT_SYMMETRIC"


class TauNotPositiveDefiniteError(InvalidInputError):
    code = "TAU_IM_NOT_POSITIVE_DEFINITE"


class UnsupportedGenusError(InvalidInputError):
    code = "UNSUPPORTED_GENUS"


class NotOnDivisorError(InvalidInputError):
    code = "NOT_ON_DIVISOR"


class PrecisionUnreachableError(ThetaLabError):
    code = "PRECISION_UNREACHABLE"
    exit_code = 3


class PoleError(ThetaLabError):
    code = "POLE"
    exit_code = 3


class DegenerateSampleError(ThetaLabError):
    code = "DEGENERATE_SAMPLE"
    exit_code = 3


class DegenerateJetError(ThetaLabError):
    code = "DEGENERATE_JET"
    exit_code = 2
