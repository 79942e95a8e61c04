"""Exception hierarchy shared across the pipeline.

Exit-code mapping in the CLI: usage errors -> 1, ParseError/ValidationError -> 2,
everything else -> 3.
"""


class SegpropError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(SegpropError):
    """A file could not be parsed.  Carries a line number (ascii formats) or a
    byte offset (binary formats) when one is known."""

    def __init__(self, message, line=None, offset=None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if offset is not None:
            loc.append(f"byte {offset}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.line = line
        self.offset = offset


class ValidationError(SegpropError):
    """Data violates a schema or invariant.  ``field`` names the offending
    field path when one applies, e.g. ``labels[2].segment``."""

    def __init__(self, message, field=None):
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)
        self.field = field


class LabelConflictError(SegpropError):
    """A segment is already claimed by a different instance."""


class PlacementError(SegpropError):
    """Synthetic-scene instance placement failed after retries."""


class GraphError(SegpropError):
    """Segment-graph precondition violated (e.g. unlabeled component with no
    path to any labeled node)."""
