"""Exception types raised across the toolkit.

Every error the library raises on bad input derives from ``KohevalError``,
so callers (and the CLI) can catch one base type.
"""


class KohevalError(Exception):
    """Base class for all toolkit errors."""


class InvalidBoxError(KohevalError, ValueError):
    """A box violates its geometric invariants (zero area, inverted corners,
    or confidence outside [0, 1])."""


class OutOfFrameError(KohevalError, ValueError):
    """A box lies entirely outside the image frame it was mapped into."""


class ParseError(KohevalError, ValueError):
    """A line-oriented annotation file could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class RangeError(ParseError):
    """A normalized coordinate or confidence fell outside [0, 1]."""


class ClassError(ParseError):
    """A class id outside the known taxonomy."""


class SchemaError(KohevalError, ValueError):
    """A structured document (COCO-style JSON, manifest, report) is missing
    required fields or carries values of the wrong shape."""


class ReferentialError(KohevalError, ValueError):
    """A record references an entity that does not exist (e.g. an annotation
    pointing at an unknown image)."""


class UndefinedMetricError(KohevalError, ArithmeticError):
    """A metric has no defined value (zero-denominator recall, mean over an
    empty set of matched pairs)."""


class GenerationError(KohevalError, RuntimeError):
    """The synthetic generator could not satisfy its placement constraints
    within the retry budget."""
