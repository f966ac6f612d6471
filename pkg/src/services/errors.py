"""
Lab Error Types
Domain errors raised by the computation services and mapped to HTTP/CLI responses
"""

from typing import Dict, Any


class LabError(Exception):
    """Base class for every domain error the lab reports to callers"""

    code = 'lab_error'

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> Dict[str, Any]:
        payload = {
            'status': 'error',
            'code': self.code,
            'message': self.message,
        }
        if self.details:
            payload['details'] = {key: str(value) for key, value in self.details.items()}
        return payload


class DimensionMismatch(LabError):
    code = 'dimension_mismatch'


class InvalidWeights(LabError):
    code = 'invalid_weights'


class InvalidShape(LabError):
    code = 'invalid_shape'


class PremiseViolation(LabError):
    code = 'premise_violation'


class PrecisionExhausted(LabError):
    code = 'precision_exhausted'


class EnumerationBudgetExceeded(LabError):
    code = 'enumeration_budget_exceeded'


class InvalidFractal(LabError):
    code = 'invalid_fractal'


class OutOfRange(LabError):
    code = 'out_of_range'


class UnsupportedFractal(LabError):
    code = 'unsupported_fractal'


class CalibrationFailure(LabError):
    code = 'calibration_failure'


class ConfigError(LabError):
    code = 'config_error'
