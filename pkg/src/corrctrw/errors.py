"""Exception types shared across the package.

Every error carries a short machine-readable ``code`` naming the violated
invariant or hypothesis; the CLI serializes it into its error JSON.
"""


class CtrwError(Exception):
    code = "error"
    exit_code = 2

    def __init__(self, message, code=None, **details):
        super().__init__(message)
        if code is not None:
            self.code = code
        self.details = details

    def to_dict(self):
        return {
            "error": type(self).__name__,
            "code": self.code,
            "message": str(self),
            "details": {k: _plain(v) for k, v in self.details.items()},
        }


class ParameterError(CtrwError, ValueError):
    code = "invalid_parameter"


class ConfigurationError(CtrwError, ValueError):
    code = "invalid_configuration"


class RangeError(CtrwError, ValueError):
    code = "out_of_range"


class NumericError(CtrwError, ArithmeticError):
    code = "numeric_failure"
    exit_code = 3


class DomainTooSmallError(NumericError):
    code = "domain_too_small"


def _plain(v):
    try:
        import numpy as np

        if isinstance(v, np.generic):
            return v.item()
        if isinstance(v, np.ndarray):
            return v.tolist()
    except ImportError:  # pragma: no cover
        pass
    return v
