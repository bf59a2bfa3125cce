"""Exception types shared across the toolkit."""


class T2iEvalError(Exception):
    """Base class for all toolkit errors."""


class TransportError(T2iEvalError):
    """A backend endpoint could not be reached (connection/timeout)."""


class ProtocolError(T2iEvalError):
    """A backend replied with something that is not valid wire-protocol JSON."""


class BackendError(T2iEvalError):
    """A backend replied with a non-2xx status."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class LlmOutputError(T2iEvalError):
    """LLM question generation kept violating the constraints after retries.

    Carries the last raw response for diagnostics.
    """

    def __init__(self, message: str, raw_response: str):
        super().__init__(message)
        self.raw_response = raw_response


class IngestError(T2iEvalError):
    """A dataset file could not be parsed; the message names the line."""


class DegradeError(T2iEvalError):
    """Corpus generation failed (bad plan, unwritable output, degenerate result)."""
