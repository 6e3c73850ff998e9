"""Exception hierarchy shared by the protocol, service, and client layers."""


class PsiTraceError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(PsiTraceError):
    """Invalid configuration: bad parameter file, bad CLI flag combination."""


class GenerationError(PsiTraceError):
    """Parameter or key search exhausted its iteration cap."""


class InternalError(PsiTraceError):
    """A should-never-happen condition, e.g. a hash retry cap exceeded."""


class EmptyInputError(PsiTraceError):
    """Protocol input is empty after deduplication."""


class ProtocolViolationError(PsiTraceError):
    """Peer sent a malformed or invalid protocol message."""


class LimitExceededError(ProtocolViolationError):
    """Request exceeds the server's configured size limit."""


class StaleEpochError(ProtocolViolationError):
    """Request references an epoch the server no longer serves."""


class UnauthorizedElementError(PsiTraceError):
    """An element is missing the authority signature it needs."""


class InvalidSignatureError(PsiTraceError):
    """A signature failed verification against the authority key."""


class RejectedReportError(PsiTraceError):
    """A feedback report failed the anonymity screen."""


class NetworkError(PsiTraceError):
    """Transport-level failure talking to a remote endpoint."""


class RetryLaterError(NetworkError):
    """Endpoint unreachable or rate-limited; retry after a delay."""
