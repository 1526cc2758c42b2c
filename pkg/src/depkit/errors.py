"""Exception hierarchy shared by all depkit modules."""


class DepkitError(Exception):
    """Base class for all depkit errors."""


class TieError(DepkitError):
    """Ranks requested with tie_policy='error' and the input has ties."""


class DegenerateSampleError(DepkitError):
    """A sample (or conditioned sub-sample) has zero variance."""


class LagError(DepkitError):
    """Lag or embedding dimension incompatible with the series length."""


class RegionTooSmallError(DepkitError):
    """Too few observations fall inside the requested region."""


class SubsetError(DepkitError):
    """Subset statistics require at least two coordinates."""


class AlphaError(DepkitError):
    """Distance exponent outside (0, 2)."""


class ShapeError(DepkitError):
    """Matrix or sample shapes are incompatible."""


class KernelError(DepkitError):
    """Invalid kernel specification (e.g. non-positive bandwidth)."""


class BandwidthError(DepkitError):
    """Invalid or unusable density bandwidth."""


class GammaRangeError(DepkitError):
    """Divergence order gamma outside (0, 1)."""


class SampleTooSmallError(DepkitError):
    """Statistic needs more observations than provided."""


class ParamError(DepkitError):
    """Parameter outside its admissible domain."""


class ParamDomainError(ParamError):
    """Local Gaussian parameters on the boundary (sigma <= 0 or |rho| >= 1)."""


class ConvergenceError(DepkitError):
    """No optimizer start converged for a local fit."""


class SupportError(DepkitError):
    """Evaluation point has no effective data mass."""


class DomainError(DepkitError):
    """Input values outside the mathematical domain (e.g. log of <= 0)."""


class MissingColumnError(DepkitError):
    """Requested CSV column does not exist."""


class ParseError(DepkitError):
    """A CSV cell could not be parsed as a finite number."""
