"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class FrameseekError(Exception):
    """Base class for all engine errors."""


class FrameKeyError(FrameseekError, ValueError):
    """Malformed frame key text or invalid key components."""


class IngestError(FrameseekError):
    """A data file could not be parsed; carries file context."""

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None, offset: int | None = None):
        loc = path or "<input>"
        if line is not None:
            loc += f":{line}"
        if offset is not None:
            loc += f" (offset {offset})"
        super().__init__(f"{loc}: {message}")
        self.path = path
        self.line = line
        self.offset = offset


class IndexStateError(FrameseekError):
    """Operation not valid in the index's current build/frozen state."""


class InvalidVectorError(FrameseekError, ValueError):
    """Vector has the wrong dimension, non-finite values, or zero norm."""


class PlanError(FrameseekError, ValueError):
    """Query planning failed (e.g. empty query)."""


class KnowledgeBaseError(FrameseekError, ValueError):
    """Landmark knowledge base file violates its invariants."""


class PipelineError(FrameseekError):
    """A multi-step retrieval pipeline could not produce any result."""


class TransportError(FrameseekError):
    """A remote model client failed after exhausting retries."""

    def __init__(self, message: str, *, attempts: int = 1):
        super().__init__(message)
        self.attempts = attempts


class SynthesisError(FrameseekError):
    """Answer synthesis failed; carries the evidence so callers can still render it."""

    def __init__(self, message: str, packages=None):
        super().__init__(message)
        self.packages = packages or []


class SubmissionError(FrameseekError, ValueError):
    """Submission or ground-truth file is malformed; carries the line number."""

    def __init__(self, message: str, *, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class CapabilityError(FrameseekError):
    """The requested mode is not available with the current data files."""

    def __init__(self, message: str, capabilities: dict | None = None):
        super().__init__(message)
        self.capabilities = capabilities or {}
