"""Exception types shared across the package."""


class LightrayError(Exception):
    """Base class for all package-specific errors."""


class WrongDimension(LightrayError):
    """Input has a spatial dimension other than the supported 2 or 3."""


class NotSpaceLike(LightrayError):
    """Covector is not space-like where a space-like one is required."""


class DegenerateXi(LightrayError):
    """Spatial frequency part is too close to zero."""


class EmptyAdmissibleSet(LightrayError):
    """No unit direction satisfies the light-like orthogonality constraint."""


class SingularPerturbation(LightrayError):
    """Perturbation direction set is singular at the requested angles."""


class NoEnvelope(LightrayError):
    """Field carries no support envelope but one is required."""


class QuadratureBudgetExceeded(LightrayError):
    """Quadrature could not reach the tolerance within the evaluation budget."""


class OutOfBand(LightrayError):
    """Requested frequency lies outside the spectral lattice."""


class RankDeficient(LightrayError):
    """Slice system is rank deficient below the conditioning threshold."""


class InconsistentRows(LightrayError):
    """Slice system residual exceeds the configured noise tolerance."""


class ApertureTooSmall(LightrayError):
    """Acquisition cannot support recovery of any spectral bin."""


class NotOnSurface(LightrayError):
    """Event does not lie on the characteristic surface."""


class DegenerateGradient(LightrayError):
    """Surface gradient vanishes at the event, no conormal direction."""


class ConfigError(LightrayError):
    """Run configuration is missing keys or holds invalid values."""


class GridFormatError(LightrayError):
    """Binary grid file is malformed."""


class BadMagic(GridFormatError):
    """Binary grid file does not start with the expected magic bytes."""


class TruncatedPayload(GridFormatError):
    """Binary grid payload is shorter than the header promises."""
