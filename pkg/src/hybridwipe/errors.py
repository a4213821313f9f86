"""Exception hierarchy shared by every simulator layer."""


class SimulationError(Exception):
    """Base class for runtime failures raised by the simulator."""


class MediumFull(SimulationError):
    pass


class NotMapped(SimulationError):
    pass


class BadFrame(SimulationError):
    pass


class BadLength(SimulationError):
    pass


class WrongKind(SimulationError):
    pass


class NoSpareBlock(SimulationError):
    pass


class InsufficientHostData(SimulationError):
    pass


class IoFailure(SimulationError):
    pass


class BadImage(SimulationError):
    pass


class LengthMismatch(SimulationError):
    pass


class UnknownClass(SimulationError):
    pass


class ParamMismatch(SimulationError):
    pass


class ConfigError(Exception):
    """Invalid scenario configuration (CLI exit code 2)."""


class ParseError(ConfigError):
    def __init__(self, line, reason, column=None):
        self.line = line
        self.column = column
        self.reason = reason
        where = f"line {line}" if column is None else f"line {line}, column {column}"
        super().__init__(f"{where}: {reason}")


class OrderError(ParseError):
    pass


class UnsupportedFormat(ConfigError):
    pass
