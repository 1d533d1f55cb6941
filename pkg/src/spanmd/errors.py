"""Exception hierarchy shared across the package."""

from __future__ import annotations


class SpanmdError(Exception):
    """Base class for all errors raised by spanmd."""


class ParseError(SpanmdError):
    """Raised when an interchange file is not well-formed JSON."""

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


class ValidationError(SpanmdError):
    """Raised when a document invariant is violated.

    Carries the page/span the violation was found on and the name of
    the violated rule so callers can report it precisely.
    """

    def __init__(self, message: str, *, page_id: str | None = None,
                 span_id: str | None = None, rule: str | None = None):
        super().__init__(message)
        self.page_id = page_id
        self.span_id = span_id
        self.rule = rule


class TransportError(SpanmdError):
    """A remote call failed; retryable by the caller."""

    def __init__(self, message: str, *, retryable: bool = True,
                 cause: BaseException | None = None):
        super().__init__(message)
        self.retryable = retryable
        self.cause = cause


class BackboneError(SpanmdError):
    """Backbone failure during execution; carries the partial transcript."""

    def __init__(self, message: str, partial_transcript=None,
                 cause: BaseException | None = None):
        super().__init__(message)
        self.partial_transcript = partial_transcript
        self.cause = cause


class ReservedTokenError(SpanmdError):
    """The batch pad token appeared in span text."""


class UnsupportedTokenizerError(SpanmdError):
    """Tokenizer mode not handled by the core engine."""
