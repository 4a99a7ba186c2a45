"""Exception types with machine-readable codes and CLI exit statuses."""


class GrowthGapError(Exception):
    code = "error"
    exit_status = 1

    def to_dict(self):
        return {"code": self.code, "message": str(self)}


class ValidationError(GrowthGapError, ValueError):
    code = "validation"
    exit_status = 4


class ResourceError(GrowthGapError):
    code = "resource"
    exit_status = 5


class UnsupportedSubgroupError(ValidationError):
    code = "unsupported-subgroup"


class InsufficientPrefixError(ValidationError):
    code = "insufficient-prefix"


class NoWitnessError(GrowthGapError):
    code = "no-witness"
    exit_status = 2


class NonCertifiedError(GrowthGapError):
    code = "non-certified"
    exit_status = 3

    def __init__(self, message, patch=None):
        super().__init__(message)
        self.patch = patch


class InconclusiveError(GrowthGapError):
    code = "inconclusive"
    exit_status = 3


class ConvergenceError(GrowthGapError):
    code = "non-convergence"
    exit_status = 3

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals or []


class ConsistencyError(GrowthGapError):
    code = "internal-consistency"
    exit_status = 1
