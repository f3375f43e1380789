"""Exception hierarchy shared by every pcedit module.

All tool-level failures derive from CloudError so callers (and the CLI)
can distinguish data errors from genuine I/O errors (plain OSError).
"""


class CloudError(Exception):
    """Base class for all pcedit errors."""


class EmptySelection(CloudError):
    """An operation needed at least one point/color but the selection was empty."""


class NoEnabledBoxes(CloudError):
    """Substitution requires at least one enabled box with a palette color."""


class NoBoxes(CloudError):
    """Splitting requires a non-empty box list."""


class PipelineStepError(CloudError):
    """A pipeline step failed; carries the step index and the original error."""

    def __init__(self, step_index: int, op: str, cause: Exception):
        self.step_index = step_index
        self.op = op
        self.cause = cause
        super().__init__(f"pipeline step {step_index} ({op}) failed: {cause}")


class UnknownFormat(CloudError):
    """The file extension does not map to any supported point-cloud format."""


class HeaderMismatch(CloudError):
    """Extension implies one format but the file's magic bytes say another."""


class ParseError(CloudError):
    """Malformed file content. Carries line/byte context where available."""

    def __init__(self, message: str, *, path=None, line: int | None = None,
                 offset: int | None = None):
        self.path = path
        self.line = line
        self.offset = offset
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"byte {offset}")
        prefix = ": ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class SchemaError(CloudError):
    """Structurally valid file with invalid or missing fields."""


class DuplicateLabel(CloudError):
    """A label occurred twice where uniqueness is required."""


class RangeError(CloudError):
    """A numeric value fell outside its permitted range (e.g. color channels)."""


class UnsupportedPointRecord(CloudError):
    """A LAS/PLY record layout the reader does not support."""


class CodecUnavailable(CloudError):
    """LAZ compression requested but no codec is installed."""


class MissingAttribute(CloudError):
    """The destination format needs an attribute the cloud does not carry."""
