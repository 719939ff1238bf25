"""Exception types shared across the engine."""


class EngineError(Exception):
    """Base class for every error the engine raises on purpose."""


class ConfigError(EngineError):
    pass


# model gateway


class GatewayTimeout(EngineError):
    """No backend response within the request's latency budget, retries included."""


class NoRouteForModel(EngineError):
    pass


class MockMiss(EngineError):
    """Mock backend had no rule for a request; a test fixture is missing."""


# trace ingestion


class MalformedTrace(EngineError):
    """Schema violation in a trace file, located by path and physical line."""

    def __init__(self, path, line, reason):
        super().__init__(f"{path}:{line}: {reason}")
        self.path = str(path)
        self.line = line
        self.reason = reason


class NonMonotonicTimestamps(MalformedTrace):
    """Timestamps went backwards. ``row`` is the 1-based data-row index."""

    def __init__(self, path, line, row):
        super().__init__(path, line, f"timestamp decreases at data row {row}")
        self.row = row


class SessionClosed(EngineError):
    pass


# physiology


class InsufficientData(EngineError):
    pass


class FlatSignal(EngineError):
    """Peak-to-peak amplitude below the noise floor; electrode likely disconnected."""


# perception


class UnparseableInsight(EngineError):
    """Insight output unparseable after one re-prompt; carries both raw outputs."""

    def __init__(self, first_raw, retry_raw):
        super().__init__("insight output unparseable after retry")
        self.first_raw = first_raw
        self.retry_raw = retry_raw


# routine store


class StaleInsight(EngineError):
    pass


class WindowMismatch(EngineError):
    pass


class EmptyTable(EngineError):
    pass


class CorruptStore(EngineError):
    pass


# interventions


class UnparseableIntervention(EngineError):
    def __init__(self, first_raw, retry_raw):
        super().__init__("intervention output unparseable after retry")
        self.first_raw = first_raw
        self.retry_raw = retry_raw


class InvalidTransition(EngineError):
    pass


class UnknownId(EngineError):
    pass


# task agents


class UnparseableActions(EngineError):
    def __init__(self, first_raw, retry_raw):
        super().__init__("action extraction output unparseable after retry")
        self.first_raw = first_raw
        self.retry_raw = retry_raw


class NoHandler(EngineError):
    pass


class HandlerFailed(EngineError):
    pass
