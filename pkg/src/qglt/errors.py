"""Exception types raised by the toolkit."""


class QGLTError(ValueError):
    """Base class for all toolkit errors."""


class SchemaError(QGLTError):
    """Malformed potential/config input. ``path`` locates the offending JSON node."""

    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path


class GammaOutOfRange(QGLTError):
    pass


class OffsetTooSmall(QGLTError):
    pass


class SupportExceedsGrid(QGLTError):
    pass


class OddEdgeCount(QGLTError):
    pass


class EvenEdgeCount(QGLTError):
    pass


class EmptySplit(QGLTError):
    pass


class ParityViolation(QGLTError):
    pass


class ZeroNorm(QGLTError):
    pass


class UncalibratedGamma(QGLTError):
    pass


class SectorOutOfRange(QGLTError):
    pass


class NonpositiveKappa(QGLTError):
    pass


class NonpositiveAlpha(QGLTError):
    pass


class PivotBreakdown(ArithmeticError):
    pass


class NoConvergence(ArithmeticError):
    pass


class DegenerateSpectrum(ArithmeticError):
    pass
