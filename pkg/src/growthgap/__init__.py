"""Group extensions of subshifts, horofunction codings and transfer operators."""

__version__ = "0.1.0"
