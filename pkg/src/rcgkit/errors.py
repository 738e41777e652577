"""Exception types shared across the package."""


class RcgError(Exception):
    """Base class for all rcgkit errors."""


class ConfigError(RcgError):
    """Invalid or inconsistent configuration."""


class UpstreamError(RcgError):
    """A remote embedding or LLM endpoint failed after retries."""

    def __init__(self, message: str, attempts: int = 1):
        super().__init__(message)
        self.attempts = attempts


class BudgetError(RcgError):
    """Prompt token estimate exceeds the configured context budget."""

    def __init__(self, estimate: int, budget: int):
        super().__init__(f"prompt estimate {estimate} tokens exceeds context budget {budget}")
        self.estimate = estimate
        self.budget = budget


class IndexLoadError(RcgError):
    """Base for index-file load failures; `code` distinguishes the cause."""

    code = "load"


class IndexFormatError(IndexLoadError):
    """Bad magic or otherwise unparseable index file."""

    code = "format"


class IndexVersionError(IndexLoadError):
    """Index file written by an unsupported format version."""

    code = "version"


class IndexTruncatedError(IndexLoadError):
    """Index file ends before the declared payload."""

    code = "truncated"


class FingerprintMismatchError(IndexLoadError):
    """Index was built with a different embedder than the one configured."""

    code = "fingerprint"
