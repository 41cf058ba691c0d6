"""Exception types shared across the package.

The CLI maps these onto exit codes: usage errors exit 1, I/O errors exit 2,
data-format errors exit 3.
"""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class InvalidParameterError(ValueError):
    """A distribution or configuration parameter is out of range."""


class FormatError(ValueError):
    """A file or record does not follow its declared binary/CSV layout."""


class CorruptCheckpointError(FormatError):
    pass


class CheckpointVersionError(FormatError):
    pass


class DegenerateNoiseError(RuntimeError):
    """Generated noise had zero energy even after all retries."""


EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_FORMAT = 3
