"""Process-wide knobs read from the environment."""
import os

MEMORY_ENV = "GROWTHGAP_MEMORY_MIB"
DEFAULT_MEMORY_MIB = 512
# rough cost of one stored group element (tuple + hash-table slot)
BYTES_PER_ELEMENT = 256


def memory_budget_mib():
    raw = os.environ.get(MEMORY_ENV)
    if raw is None:
        return DEFAULT_MEMORY_MIB
    try:
        value = int(raw)
    except ValueError:
        from .errors import ValidationError
        raise ValidationError(f"{MEMORY_ENV} must be an integer number of MiB, got {raw!r}")
    if value <= 0:
        from .errors import ValidationError
        raise ValidationError(f"{MEMORY_ENV} must be positive")
    return value


def element_budget():
    return memory_budget_mib() * 1024 * 1024 // BYTES_PER_ELEMENT
