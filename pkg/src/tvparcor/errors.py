"""Exception types shared across the package."""


class TvparcorError(Exception):
    """Base class for all errors raised by this package."""


class NonFiniteInput(TvparcorError):
    """An input array contains NaN or infinite entries."""


class NotSymmetric(TvparcorError):
    """A matrix required to be symmetric is asymmetric beyond tolerance."""


class DimensionMismatch(TvparcorError):
    """Array shapes are inconsistent with each other or with the model."""


class NonFiniteState(TvparcorError):
    """A filtering recursion produced non-finite output (discount too
    aggressive or pathological data)."""


class NotFiltered(TvparcorError):
    """Filtered moments were requested but are absent."""


class NotSmoothed(TvparcorError):
    """Smoothed moments were requested but are absent."""


class RangeExhausted(TvparcorError):
    """A lattice stage has too few usable time points."""


class RangeMismatch(TvparcorError):
    """Time ranges or frequency grids that must align do not."""


class SingularStage(TvparcorError):
    """A stage down-step system is numerically singular."""


class OutOfRange(TvparcorError):
    """A time index falls outside the valid range of a fitted object."""


class SingularTransfer(TvparcorError):
    """The transfer matrix is numerically singular at a grid point."""


class ZeroDiagonal(TvparcorError):
    """A spectral diagonal entry underflowed to zero or below."""


class SingularSpectrum(TvparcorError):
    """The spectral matrix is not invertible at a grid point."""


class NonPositiveSpectrum(TvparcorError):
    """A spectral diagonal entry is non-positive where a log is needed."""


class ExplosiveSample(TvparcorError):
    """A sampled forecast path exceeded the explosion threshold."""


class ParseError(TvparcorError):
    """A delimited input file could not be parsed."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + loc)


class BundleError(TvparcorError):
    """A fit bundle is missing, malformed, or fails its integrity check."""
