"""Exception hierarchy. Every error raised by the package derives from ``HifError``."""


class HifError(Exception):
    pass


class InvalidParameter(HifError, ValueError):
    pass


# simulation
class NonConvergence(HifError):
    pass


class DuplicateLabel(HifError, ValueError):
    pass


# trajectory preparation
class DegenerateLoop(HifError):
    pass


class EmptyTrajectory(HifError):
    pass


class NonIncreasingGrid(HifError, ValueError):
    pass


class InsufficientSamples(HifError):
    pass


# piecewise fitting
class ZeroWidthPiece(HifError):
    pass


class SingularNormalEquations(HifError):
    def __init__(self, message, deficient_knots=()):
        super().__init__(message)
        self.deficient_knots = tuple(deficient_knots)


class InfeasibleBounds(HifError, ValueError):
    pass


class GridMismatch(HifError):
    pass


# features / svm
class ZeroVariance(HifError):
    def __init__(self, dimension):
        super().__init__(f"feature dimension {dimension} has zero variance")
        self.dimension = dimension


class DimensionMismatch(HifError, ValueError):
    pass


class SingleClass(HifError):
    pass


class NoConvergence(HifError, RuntimeWarning):
    pass


class VersionMismatch(HifError):
    pass


class MalformedModel(HifError):
    pass


# pipeline
class ConfigError(HifError):
    pass


class SchemaError(HifError):
    pass


class MissingLabel(HifError):
    pass


class TooFewSamples(HifError):
    pass
