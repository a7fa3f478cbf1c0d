"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: validation failures exit 1,
file/format failures exit 2, anything else exits 3.
"""


class ValidationError(ValueError):
    """Bad input: configuration, shapes, ranges, inconsistent state."""


class DumpError(IOError):
    """Base class for dump-file format failures."""


class BadMagicError(DumpError):
    """The byte stream does not start with the dump magic."""


class VersionError(DumpError):
    """The dump declares an unsupported format version."""


class SizeError(DumpError):
    """The byte length does not match what the header implies."""


class ChecksumError(DumpError):
    """The CRC32 trailer does not match the payload."""


class ReplayError(RuntimeError):
    """Replay-backend failure: exhausted or inconsistent recording."""
