"""Exception hierarchy.

Data problems (unreadable files, malformed clips, degenerate geometry) raise
DataError subclasses and map to exit code 3 at the CLI. Artifact version
mismatches raise VersionMismatchError and map to exit code 4.
"""


class MochaError(Exception):
    """Base class for all errors raised by this package."""


class DataError(MochaError):
    """A dataset, clip, or message failed validation."""


class BvhParseError(DataError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class SkeletonError(DataError):
    """Invalid skeleton topology or body-part assignment."""


class RotationError(DataError):
    """Degenerate rotation input (zero or collinear axes)."""


class DegenerateFacingError(DataError):
    """Facing direction could not be derived for any frame up to the requested one."""


class InsufficientHistoryError(DataError):
    """A window was requested before enough frames were available."""


class EmptyDatabaseError(DataError):
    """A feature database query or build found no entries."""


class VersionMismatchError(MochaError):
    """A stored artifact was produced by an incompatible mapper or schema version."""


class ProtocolError(MochaError):
    """Malformed or out-of-order streaming message."""
