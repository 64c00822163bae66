"""Exception types shared across the pipeline."""


class AuditError(Exception):
    """Base class for all toolkit errors."""


class CorpusError(AuditError):
    """Bad corpus file: missing, malformed line, or duplicate id."""


class AnnotationError(AuditError):
    """Invalid entity annotation spans (out of bounds or overlapping)."""


class LlmError(AuditError):
    """Completion endpoint failure after retries, or invalid response."""


class MissingFixture(LlmError):
    """Replay mode found no recorded completion for a prompt hash."""

    def __init__(self, prompt_hash: str):
        super().__init__(f"no replay fixture for prompt hash {prompt_hash}")
        self.prompt_hash = prompt_hash


class RegardError(AuditError):
    """Regard backend failure or invalid probability vector."""


class StageError(AuditError):
    """CLI stage cannot run: missing predecessor output or config conflict."""

    def __init__(self, message: str, exit_code: int):
        super().__init__(message)
        self.exit_code = exit_code
