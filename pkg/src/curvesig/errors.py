"""Exception types shared across the package."""


class CurveSigError(Exception):
    """Base class for all errors raised by curvesig."""


class DimensionMismatch(CurveSigError, ValueError):
    pass


class SingularMatrix(CurveSigError, ArithmeticError):
    pass


class NoConvergence(CurveSigError, ArithmeticError):
    pass


class InvalidCurve(CurveSigError, ValueError):
    pass


class SampleFailure(CurveSigError):
    pass


class IsotropicPair(CurveSigError, ValueError):
    """Two points at squared distance zero; no moving frame exists."""


class InvariantMismatch(CurveSigError, ValueError):
    pass


class IsotropicPoint(CurveSigError, ArithmeticError):
    """The curve gradient is isotropic (F_x^2 + F_y^2 = 0) at a tuple point."""


class DegenerateChord(CurveSigError, ArithmeticError):
    pass


class SingularCurvePoint(CurveSigError, ArithmeticError):
    pass


class RankDeficiency(CurveSigError, ArithmeticError):
    pass


class EmptyWitness(CurveSigError):
    pass


class ElementValidationFailure(CurveSigError):
    pass
