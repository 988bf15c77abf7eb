"""Exception hierarchy shared by all stages.

ConfigError maps to CLI exit code 2, DataError (and subclasses) to 3;
anything else is an internal error (4).
"""


class RawsatError(Exception):
    """Base class for all rawsat errors."""


class ConfigError(RawsatError):
    """Invalid configuration, arguments, or missing referenced paths."""


class DataError(RawsatError):
    """Invalid data content encountered while processing."""


class FormatError(DataError):
    """A file does not parse as the expected on-disk format."""


class SchemaError(DataError):
    """A parsed file violates the container schema or its invariants."""


class WeightFileError(FormatError):
    """An EDSW1 weight file is malformed or fails its checksum."""
