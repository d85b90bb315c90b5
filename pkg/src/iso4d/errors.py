"""Exception hierarchy shared across the package.

Each error class carries the process exit code the CLI maps it to.
"""


class Iso4dError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class UsageError(Iso4dError):
    """Bad command-line invocation or inconsistent arguments."""

    exit_code = 2


class IOFailure(Iso4dError):
    """Missing files, short reads, unwritable outputs."""

    exit_code = 3


class FormatError(Iso4dError):
    """Malformed volume headers, blobs, mesh files, or table data."""

    exit_code = 4


class ValidationFailure(Iso4dError):
    """A mesh failed the closedness/orientation validator."""

    exit_code = 5


class GeometryError(Iso4dError):
    """Inconsistent cell combinatorics (corrupt table or internal bug)."""

    exit_code = 4


class AmbiguousLabelingError(GeometryError):
    """The labeling reconstruction admits more than one solution."""
