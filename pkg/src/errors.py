class OppnetError(Exception):
    """Base class for every error raised by the lab"""


class TraceFormatError(OppnetError):
    """A contact trace line could not be parsed or failed validation"""

    def __init__(self, message, line_number=None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class ScenarioValidationError(OppnetError):
    """A scenario, sweep or workload definition is inconsistent"""


class ProtocolMismatchError(ScenarioValidationError):
    """A protocol was paired with a workload kind it cannot forward"""


class MapError(ScenarioValidationError):
    """Map generation parameters are degenerate"""


class MetricUndefinedError(OppnetError):
    """A metric has no value for this run (e.g. nothing was delivered)"""
