"""Exception types shared across the package."""


class EdgewiseError(Exception):
    """Base class for all package errors."""


class InvalidParamsError(EdgewiseError, ValueError):
    """An argument or field lies outside its documented domain."""


class UnknownLabelError(EdgewiseError, ValueError):
    """A label string does not name one of the five categories."""


class SchemaError(EdgewiseError, ValueError):
    """A config, trace, manifest, or sweep file violates its schema."""


class DimensionMismatchError(EdgewiseError, ValueError):
    """Frame dimensions do not match the backend's expected input."""


class BackendError(EdgewiseError):
    """An inference backend failed; base for the more specific kinds."""


class BackendUnavailableError(BackendError):
    """The external backend could not be reached (connect or I/O failure)."""


class ProtocolError(BackendError):
    """The external backend sent a malformed or invalid response."""


class ReportError(EdgewiseError, ValueError):
    """A report cannot be emitted (unsupported format or empty content)."""
