"""Exception hierarchy shared across the package."""


class PseudofolError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateMetric(PseudofolError):
    """The metric matrix is (numerically) singular at a point."""


class DegenerateRestriction(PseudofolError):
    """The metric restricted to a subspace is degenerate."""


class DomainExit(PseudofolError):
    """A trajectory left a non-periodic chart domain."""

    def __init__(self, message, s=None, position=None):
        super().__init__(message)
        self.s = s
        self.position = position


class ModelError(PseudofolError):
    """Invalid model parameters."""


class NotAnosov(ModelError):
    """Matrix is not in SL(2, Z) with trace > 2."""


class ZeroScale(ModelError):
    """The metric scale factor is zero."""


class OutsideChart(PseudofolError):
    """A point does not lie in the image of an adapted chart."""


class PathLeavesLeaf(PseudofolError):
    """A supposedly vertical path is not contained in a single leaf."""


class DiskTooLarge(PseudofolError):
    """The transported transverse disk escaped the atlas even after shrinking."""


class TransferBreakdown(PseudofolError):
    """Lifting a horizontal curve along a vertical path failed."""

    def __init__(self, message, parameter=None):
        super().__init__(message)
        self.parameter = parameter


class UnknownLeafClass(PseudofolError):
    """Leaf periodicity could not be decided within the search bound."""


class LeafMismatch(PseudofolError):
    """Two points expected on a common leaf are not."""


class EndpointMismatch(PseudofolError):
    """Graph elements are not composable."""


class InvalidDecomposition(PseudofolError):
    """Tangent components violate the graph splitting constraints."""


class ConfigError(PseudofolError):
    """Malformed scenario configuration."""
