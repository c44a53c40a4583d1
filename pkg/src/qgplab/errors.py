"""Exception hierarchy.

Configuration problems and numerical failures are kept on separate branches
so the CLI can map them to distinct exit codes (2 and 3 respectively).
"""


class QgplabError(Exception):
    """Base class for all package errors."""

    category = "error"


class ConfigError(QgplabError):
    """Invalid scenario configuration (bad file, unknown key, bad value)."""

    category = "config"


class NumericalError(QgplabError):
    """Base class for numerical / model failures."""

    category = "numerical"


class NonHermitianError(NumericalError):
    """A matrix required to be Hermitian is not, within tolerance."""

    category = "non_hermitian"


class DegenerateSpectrumError(NumericalError):
    """Eigenvalue gap fell below the degeneracy tolerance.

    The geometric quantities computed here are only defined for
    non-degenerate spectra, so this is refused rather than guessed at.
    """

    category = "degenerate_spectrum"


class GridTooCoarseError(NumericalError):
    """Consecutive eigenframes overlap too little; the time grid is too coarse."""

    category = "grid_too_coarse"


class AmbiguousLevelMatchError(NumericalError):
    """Level connection across a time step could not be decided unambiguously."""

    category = "ambiguous_level_match"


class PropagationError(NumericalError):
    """Adaptive propagation failed to meet tolerance before step underflow."""

    category = "propagation"

    def __init__(self, message: str, last_good_time: float | None = None):
        super().__init__(message)
        self.last_good_time = last_good_time


class StationaryPathError(NumericalError):
    """Geodesic-form QGP requested at a stationary point of the sphere path."""

    category = "stationary_path"


class InvalidSamplesError(NumericalError):
    """An operation required samples that were masked invalid."""

    category = "invalid_samples"
