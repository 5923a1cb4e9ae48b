"""Exception hierarchy.

Every error carries a machine-readable ``name`` so the CLI can report it
verbatim and map it to an exit code.
"""


class AbVortexError(Exception):
    """Base class for all domain errors raised by the package."""

    @property
    def name(self):
        return type(self).__name__


class InvalidParameter(AbVortexError, ValueError):
    """A scalar parameter lies outside its documented range."""


class SpectralParameterOnCut(InvalidParameter):
    """The spectral parameter lies on the half-axis [0, inf)."""


class ArgumentLeftHalfPlane(InvalidParameter):
    """A Macdonald-function argument has non-positive real part."""


class ArgumentNearImaginaryAxis(ArgumentLeftHalfPlane):
    """A Macdonald-function argument is too close to the imaginary axis."""


class OrderOutOfStrip(InvalidParameter):
    """A Bessel order lies outside the supported strip."""


class NonConvergent(AbVortexError, ArithmeticError):
    """An adaptive procedure exhausted its budget."""


class GridBudgetExceeded(AbVortexError, ArithmeticError):
    """The requested spectral grid would exceed the node cap."""


class IncompatibleGrid(InvalidParameter):
    """A grid was combined with data built for other parameters."""


class AtVortex(InvalidParameter):
    """A point coincides with a vortex where the quantity is singular."""


class DegenerateSegment(InvalidParameter):
    """Segment geometry is ambiguous (collinear with a cut, through a vortex)."""


class MissingSideTag(DegenerateSegment):
    """A point on a cut was given without an upper/lower side tag."""


class CoincidentPoints(InvalidParameter):
    """Source and observation point coincide."""


class TailNotNegligible(AbVortexError, ArithmeticError):
    """A truncated-domain estimate exceeds the tolerance."""


class KreinMatrixSingular(AbVortexError, ArithmeticError):
    """The matrix to invert for the Krein correction is singular."""

    def __init__(self, message, determinant=None):
        super().__init__(message)
        self.determinant = determinant


class CoincidentSpectralParameters(InvalidParameter):
    """conj(z) and w coincide, so the closed form divides by zero."""


class RealSpectralParameter(InvalidParameter):
    """A non-real spectral parameter is required."""


class FluxSumIncompatible(InvalidParameter):
    """The flux sum does not admit the requested zero mode."""


class FitIllConditioned(AbVortexError, ArithmeticError):
    """A radial power fit cannot separate the requested powers."""


class RadiiTooCoarse(InvalidParameter):
    """The fit radii do not span enough scales."""


class UnreliableBoundaryData(InvalidParameter):
    """Boundary data whose fit residual exceeded tolerance was used."""
