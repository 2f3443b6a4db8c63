"""Exception types shared across the package.

The CLI maps these onto its exit-code contract: anything derived from
:class:`PrismError` is an input/IO problem (exit 2), while certification
failures (a violated bound, a failed property) are reported through return
values and exit code 1, never through exceptions.
"""


class PrismError(Exception):
    """Base class for all errors raised by this package."""


class MatrixFormatError(PrismError):
    """Malformed matrix file: bad magic, bad header, or truncated payload."""


class ManifestError(PrismError):
    """Malformed variant manifest: schema, duplicate ids, bad gap values."""


class ShapeMismatchError(PrismError):
    """Operands have incompatible shapes."""


class NonFiniteError(PrismError):
    """A NaN or infinity reached an operation that requires finite input."""


class DegenerateInputError(PrismError):
    """Input is structurally valid but degenerate for the requested operation
    (zero-norm matrix where a norm is divided by, constant ranks, empty grid).
    """
