"""Exception hierarchy shared by all drstsim modules.

Every error carries a short machine-readable ``category`` that the CLI prints
and maps to an exit code.
"""


class DrstError(Exception):
    category = "error"


class NetworkError(DrstError):
    category = "network"


class DanglingReference(NetworkError):
    pass


class BrokenRoute(NetworkError):
    pass


class NoStops(NetworkError):
    pass


class OffsetOutOfRange(NetworkError):
    pass


class DemandError(DrstError):
    category = "demand"


class NonPositiveRate(DemandError):
    pass


class EmptyPopulation(DemandError):
    pass


class NoCandidate(DemandError):
    pass


class StrategyError(DrstError):
    category = "strategy"


class NoFlexRoutes(StrategyError):
    pass


class NotAtDiversionNode(StrategyError):
    pass


class MetricsError(DrstError):
    category = "metrics"


class NoPassengers(MetricsError):
    pass


class CapacityOutOfRange(MetricsError):
    pass


class MalformedLog(MetricsError):
    pass


class ParseError(DrstError):
    category = "parse"


class ValidationError(DrstError):
    """Invalid configuration value; ``field`` is a dotted path into the document."""

    category = "validation"

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class IoError(DrstError):
    category = "io"
