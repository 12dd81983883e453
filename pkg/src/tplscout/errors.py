"""Exception hierarchy. Every error the package raises derives from ScaError."""


class ScaError(Exception):
    pass


class MalformedUrl(ScaError, ValueError):
    pass


class OverlapError(ScaError, ValueError):
    pass


class ManifestError(ScaError, ValueError):
    pass


class ConfigError(ScaError, ValueError):
    pass


class BackendError(ScaError):
    """An external service failed after the retry policy was exhausted."""


class ProviderError(BackendError):
    pass


class SearchProviderError(BackendError):
    pass


class ReplayMiss(ScaError):
    def __init__(self, channel: str, request_preview: str):
        self.channel = channel
        self.request_preview = request_preview
        super().__init__(f"no recorded {channel} interaction for request: {request_preview}")


class AgentParseError(ScaError):
    def __init__(self, agent: str, message: str, raw: str = ""):
        self.agent = agent
        self.raw = raw
        super().__init__(f"{agent}: {message}")


class BudgetExceeded(ScaError):
    pass
