"""Exception hierarchy shared across the framework."""


class TenspipeError(Exception):
    """Base class for all framework errors."""


class CapsError(TenspipeError):
    """Malformed capability description or illegal tensor type."""


class NegotiationError(TenspipeError):
    """Two linked pads have no common capability."""


class LaunchParseError(TenspipeError):
    """Syntax or semantic error in a pipeline description string.

    Carries 1-based line/column of the offending token when known.
    """

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class GraphError(TenspipeError):
    """Structural problem in a parsed pipeline graph (cycles, bad links)."""


class PipelineError(TenspipeError):
    """Runtime failure while a pipeline is executing."""


class BackendError(TenspipeError):
    """Filter backend failed to load a model or to run inference."""


class ContainerError(TenspipeError):
    """Corrupt or truncated stream container file.

    ``offset`` is the absolute byte position where decoding failed.
    """

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
