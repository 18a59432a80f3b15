"""Exception hierarchy shared across the package."""


class LengthFidelityError(Exception):
    """Base class for every error raised by this package."""


# prompt
class PromptError(LengthFidelityError, ValueError):
    pass


class MissingPlaceholder(PromptError):
    pass


class KindMismatch(PromptError):
    pass


class InvalidTarget(PromptError):
    pass


class UnknownVariant(PromptError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


# parse
class ParseError(LengthFidelityError, ValueError):
    pass


class EmptyResponse(ParseError):
    pass


class ThinkingOnly(ParseError):
    pass


# client
class ClientError(LengthFidelityError):
    pass


class AuthError(ClientError):
    pass


class RateLimited(ClientError):
    pass


class ProviderError(ClientError):
    def __init__(self, message: str, status: int | None = None, body: str = ""):
        super().__init__(message)
        self.status = status
        self.body = body


class Timeout(ClientError):
    pass


# metrics
class MetricsError(LengthFidelityError, ValueError):
    pass


class ZeroTarget(MetricsError):
    pass


class ZeroBaseline(MetricsError):
    pass


class EmptyGroup(MetricsError):
    pass


class LengthMismatch(MetricsError):
    pass


class TooFewPairs(MetricsError):
    pass


# judge
class JudgeError(LengthFidelityError, ValueError):
    pass


class UnknownDimension(JudgeError):
    pass


class NoScoreFound(JudgeError):
    pass


class ScoreOutOfRange(JudgeError):
    pass


# runner / store
class PlanError(LengthFidelityError, ValueError):
    pass


class EmptyAxis(PlanError):
    pass


class PlanMismatch(PlanError):
    pass


# report
class ReportError(LengthFidelityError, ValueError):
    pass


class EmptyStore(ReportError):
    pass


class MissingFamily(ReportError):
    pass


# ingest
class IngestError(LengthFidelityError):
    pass


class DocumentNotFound(IngestError, FileNotFoundError):
    pass


class InvalidEncoding(IngestError, ValueError):
    pass


class EmptyDocument(IngestError, ValueError):
    pass
