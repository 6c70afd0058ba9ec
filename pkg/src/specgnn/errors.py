"""Exception hierarchy shared by every specgnn module.

The CLI maps these onto exit codes: configuration problems exit with 2,
data problems with 3 and numerical failures with 4.
"""


class SpecGNNError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ConfigError(SpecGNNError, ValueError):
    """Invalid argument or configuration value."""

    exit_code = 2


class DimensionError(ConfigError):
    """Array shapes do not agree."""


class SymmetryError(ConfigError):
    """A matrix expected to be symmetric is not."""


class InvalidPermutationError(ConfigError):
    """A permutation mapping is not a bijection."""


class InvalidBasisError(ConfigError):
    """A supposed eigenvector basis is not orthonormal."""


class DegenerateInputError(ConfigError):
    """Input is well-formed but degenerate (zero matrix, edgeless graph...)."""


class DataError(SpecGNNError):
    """Missing or malformed data files, empty datasets, bad labels."""

    exit_code = 3


class GenerationError(DataError):
    """Random generation failed to produce an admissible object."""


class NumericError(SpecGNNError, ArithmeticError):
    """Non-finite values or solver failures."""

    exit_code = 4


class ConvergenceError(NumericError):
    """An iterative solver hit its iteration cap."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
