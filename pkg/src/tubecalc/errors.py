"""Exception types shared across the package."""


class TubecalcError(Exception):
    """Base class for all tubecalc errors."""


class NoConvergence(TubecalcError):
    """Iteration cap exceeded; the point is likely outside the tube."""


class RankDeficient(TubecalcError):
    """Constraint Jacobian does not have full rank at the iterate."""


class OnManifold(TubecalcError):
    """Point is on the submanifold; the fiber direction is undefined."""


class OrderTooHigh(TubecalcError):
    """Requested derivative or expansion order exceeds what is available."""


class CodimUnsupported(TubecalcError):
    """Operation restricted to a different codimension."""


class ShapeUnsupported(TubecalcError):
    """No quadrature rule shipped for this shape."""


class DimUnsupported(TubecalcError):
    """Fiber sphere dimension outside the supported range."""


class IllConditioned(TubecalcError):
    """Expansion fit matrix too ill-conditioned to trust."""


class NotConverged(TubecalcError):
    """Quadrature refinement check failed."""


class ExpansionUnavailable(TubecalcError):
    """Test function cannot supply expansion coefficients at the needed order."""


class SupportExceedsTube(TubecalcError):
    """Test-function support sticks out of the tubular neighborhood."""


class SchemaError(TubecalcError):
    """Scenario file is malformed; the message names the offending key."""


class IoError(TubecalcError):
    """Report could not be written."""
