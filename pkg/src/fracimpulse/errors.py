"""Exception types shared across the package.

Every failure mode that callers are expected to branch on gets its own
class; generic misuse (wrong types, malformed arguments) raises plain
ValueError/TypeError.
"""
from __future__ import annotations


class FracimpulseError(Exception):
    """Base class for all package-specific errors."""


class NonConvergent(FracimpulseError):
    """A series or iteration failed to meet its tail bound within the cap."""


class PoleProximity(FracimpulseError):
    """A quadrature node landed too close to an integrand pole.

    Signals that the integration contour must be rescaled (or the node
    count changed so the offending node moves).
    """


class SeriesDivergence(FracimpulseError):
    """Operator power series cannot reach its tail bound in double precision."""


class SingularTime(FracimpulseError):
    """Kernel evaluation requested at a time where it is singular (t = 0)."""


class NumericallySingular(FracimpulseError):
    """An operator inverse is unreliable: condition number or modulus out of range."""


class NonUniformGrid(FracimpulseError):
    """A uniform-grid scheme received a grid with uneven spacing."""


class ToleranceNotMet(FracimpulseError):
    """Adaptive quadrature hit its subdivision cap before the error bound."""


class MissingPieceFormula(FracimpulseError):
    """A closed-form piece formula was required but the trajectory has none."""


class NotConverged(FracimpulseError):
    """Fixed-point iteration exhausted max_iter before reaching tolerance."""


class ConfigInvalid(FracimpulseError):
    """Scenario configuration failed strict validation."""


class CheckFailed(FracimpulseError):
    """A verification run produced verdicts that contradict the declared expectations."""


class CheckUnknown(FracimpulseError):
    """An unknown check name was requested."""


class DataMalformed(FracimpulseError):
    """An input data file does not match the documented layout."""
