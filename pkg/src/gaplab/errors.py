"""Exception hierarchy shared by all gaplab modules."""


class GaplabError(Exception):
    """Base class for domain errors (mapped to exit status 1 by the CLI)."""

    kind = "error"


class InvalidParameter(GaplabError, ValueError):
    kind = "invalid-parameter"


class DegenerateNeighborhood(GaplabError):
    """An assignment with the same classical energy sits too close to the expansion center."""

    kind = "degenerate-neighborhood"

    def __init__(self, message, offending=None):
        super().__init__(message)
        self.offending = offending


class PairTooClose(GaplabError):
    kind = "pair-too-close"


class ResonantIntermediate(GaplabError):
    kind = "resonant-intermediate"

    def __init__(self, message, offending=None):
        super().__init__(message)
        self.offending = offending


class SizeError(GaplabError):
    kind = "size"


class ConvergenceError(GaplabError):
    kind = "convergence"

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
