"""Error types shared across the package.

DataError and its subclasses mean "the inputs were bad" (missing or malformed
files, misaligned corpora, schema violations) and map to exit code 2 at the
command line. Plain ValueError keeps meaning "the caller passed nonsense".
"""


class DataError(Exception):
    """Bad input data; CLI exit code 2."""


class AlignmentError(DataError):
    """Parallel inputs disagree on length."""


class FormatError(DataError):
    """A file or config does not parse or violates its schema."""


class ModelFormatError(FormatError):
    """A model file is corrupt or has an unsupported format version."""
