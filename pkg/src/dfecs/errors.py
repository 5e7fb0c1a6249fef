"""Exception hierarchy.

Every error carries a short ``category`` string that the CLI reports as a
machine-readable error code.
"""


class DfecsError(Exception):
    category = "error"


class GeometryError(DfecsError):
    category = "geometry"


class MissingAnchor(GeometryError):
    pass


class DegenerateAnchors(GeometryError):
    pass


class InsufficientAnchors(GeometryError):
    pass


class CoincidentAnchors(GeometryError):
    pass


class SubjectMismatch(DfecsError):
    category = "data"


class SampleTooLarge(DfecsError):
    category = "data"


class NonFiniteInput(DfecsError):
    category = "numerical"


class DegenerateData(DfecsError):
    category = "numerical"


class NegativeInput(DfecsError):
    category = "numerical"


class ZeroData(DfecsError):
    category = "numerical"


class EmptyGrid(DfecsError):
    category = "config"


class ConfigError(DfecsError):
    category = "config"


class ColumnMismatch(DfecsError):
    category = "data"


class IncompleteLabels(DfecsError):
    category = "data"


class ParseError(DfecsError):
    category = "parse"

    def __init__(self, message, row=None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.column = column


class SchemaError(DfecsError):
    category = "schema"


class ShapeError(DfecsError):
    category = "schema"


class ChecksumMismatch(DfecsError):
    category = "archive"


class VersionUnsupported(DfecsError):
    category = "archive"


class ArchiveInconsistent(DfecsError):
    category = "archive"
