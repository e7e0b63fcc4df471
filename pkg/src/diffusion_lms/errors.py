"""Exception types shared across the package."""


class DiffusionError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(DiffusionError):
    """A domain or configuration invariant was violated."""


class OverlappingClusters(ValidationError):
    """A node was assigned to more than one cluster."""


class UncoveredNode(ValidationError):
    """A node is not assigned to any cluster."""


class EmptyCluster(ValidationError):
    """A cluster contains no nodes."""


class InvalidEdge(ValidationError):
    """An edge references an out-of-range node or is a self-loop."""


class ProbabilityRange(ValidationError):
    """A probability lies outside [0, 1]."""


class DegenerateGeometry(ValidationError):
    """Coincident transmitter/receiver positions make the path loss infinite."""


class ParseError(DiffusionError):
    """A configuration file could not be parsed."""


class DimensionMismatch(DiffusionError):
    """Array shapes are not conformable for the requested operation."""


class NonSymmetricWeight(DiffusionError):
    """A weighting vector does not correspond to a symmetric matrix."""


class UnstableMean(DiffusionError):
    """The mean-error recursion is unstable; asymptotic quantities undefined."""


class UnstableMeanSquare(DiffusionError):
    """The mean-square recursion is unstable; steady state undefined."""


class ProblemTooLarge(DiffusionError):
    """The analysis would exceed the configured memory guard."""
