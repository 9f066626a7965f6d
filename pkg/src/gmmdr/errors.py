"""Exception types shared across the package."""


class GmmdrError(Exception):
    """Base class for errors raised by this package."""


class InvalidModelError(GmmdrError, ValueError):
    """Unknown covariance model code, or a code incompatible with the data dimension."""


class DegenerateComponentError(GmmdrError, ArithmeticError):
    """A mixture component collapsed (vanishing weight or irrecoverable covariance)."""


class AllFitsFailedError(GmmdrError, ArithmeticError):
    """Every (model, G) combination in a model search failed to fit."""


class SingularCovarianceError(GmmdrError, ArithmeticError):
    """The marginal covariance is singular or too ill-conditioned to invert reliably."""


class DataFormatError(GmmdrError, ValueError):
    """Malformed tabular input (ragged rows, non-numeric cells, constant columns)."""


class ArchiveError(GmmdrError, ValueError):
    """Corrupt archive file or unsupported schema version."""
