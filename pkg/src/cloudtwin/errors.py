"""Exception hierarchy shared by all cloudtwin modules."""


class CloudTwinError(Exception):
    """Base for all data/validation errors raised by this package."""


class ParseError(CloudTwinError):
    """A cloud or config file could not be parsed.

    Carries the offending location (line number for ASCII formats, byte
    offset for binary) when known.
    """

    def __init__(self, message, path=None, line=None, offset=None):
        loc = []
        if path is not None:
            loc.append(str(path))
        if line is not None:
            loc.append(f"line {line}")
        if offset is not None:
            loc.append(f"byte {offset}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.path = path
        self.line = line
        self.offset = offset


class EmptyCloudError(CloudTwinError):
    """An operation that needs points was given an empty cloud."""


class DegenerateGeometryError(CloudTwinError):
    """Input geometry is collinear/coincident where a full-rank
    configuration is required (plane fits, correspondence solves)."""


class EmptySelectionError(CloudTwinError):
    """A region/element selected no points."""


class RegistryError(CloudTwinError):
    """Epoch registry misuse: duplicate ids, unknown ids, bad files."""
