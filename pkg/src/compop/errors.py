"""Exception types raised by the propagation engine."""


class CompopError(Exception):
    """Base class for all errors raised by this package."""


class StructuralError(CompopError, ValueError):
    """Mismatched variable lists, unknown identifiers, malformed trees."""


class KindError(CompopError, TypeError):
    """An operation received a domain of the wrong kind (set vs interval)."""


class CapacityError(CompopError):
    """An enumeration would exceed its declared size bound."""


class ParameterError(CompopError, ValueError):
    """A numeric parameter is outside its admissible range."""


class ContractViolation(CompopError, RuntimeError):
    """A strategy or caller broke a pre-condition of the iteration engine."""


class ParseError(CompopError, ValueError):
    """Syntax or semantic error in an instance file.

    ``line`` and ``column`` are 1-based; either may be ``None`` when the
    position is unknown.
    """

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)
