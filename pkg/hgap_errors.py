# hgap_errors.py - Error hierarchy shared by every toolkit module
"""
Errors raised by the H-type spectral gap toolkit.

ValidationError subclasses mean the caller asked for something invalid (exit code 1),
ComputationError subclasses mean a valid request could not be computed (exit code 2).
"""

from typing import Dict


class HGapError(Exception):
    exit_code = 2

    def to_dict(self) -> Dict:
        return {
            'error': type(self).__name__,
            'message': str(self),
            'exit_code': self.exit_code
        }


class ValidationError(HGapError, ValueError):
    exit_code = 1


class ComputationError(HGapError, RuntimeError):
    exit_code = 2


# Validation errors
class NotAdmissible(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class IndexOutOfRange(ValidationError):
    pass


class NonpositiveScale(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class InvalidStructure(ValidationError):
    pass


class StepBudgetExceeded(ValidationError):
    pass


class InsufficientSamples(ValidationError):
    pass


class MissingDerivative(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class UnknownRunId(ValidationError):
    pass


# Computation errors
class ConvergenceFailure(ComputationError):
    pass


class DegenerateDenominator(ComputationError):
    pass


class NoStableWindow(ComputationError):
    pass


class InsufficientDefinedRates(ComputationError):
    pass


class AllPathsExited(ComputationError):
    pass
