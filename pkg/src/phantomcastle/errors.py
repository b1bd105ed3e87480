"""Named error types raised across the package."""


class PhantomCastleError(Exception):
    """Base class for every error raised by this package."""


class UnsupportedRing(PhantomCastleError):
    pass


class DimensionMismatch(PhantomCastleError):
    pass


class RingMismatch(PhantomCastleError):
    pass


class DegreeMismatch(PhantomCastleError):
    pass


class Incomposable(PhantomCastleError):
    pass


class EmptyTower(PhantomCastleError):
    pass


class DepthExceeded(PhantomCastleError):
    pass


class WindowTooSmall(PhantomCastleError):
    pass


class UnknownFixture(PhantomCastleError):
    pass


class CertificateFailure(PhantomCastleError):
    """An internal certificate that should always hold did not."""


class DocumentError(PhantomCastleError):
    """Malformed problem document (carries an optional line/column)."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}, column {column})"
        super().__init__(message + where)


class MalformedRecipe(PhantomCastleError):
    """A power-projective building recipe does not describe chain maps."""
