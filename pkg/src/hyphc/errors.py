"""Exception types shared across the package."""


class HyphcError(Exception):
    """Base class for all package errors."""


class InvalidInputError(HyphcError, ValueError):
    """An argument is outside the operation's domain."""


class ContractViolation(HyphcError, AssertionError):
    """A caller broke an invariant that valid code never breaks."""


class ParseError(HyphcError, ValueError):
    """Malformed Newick text. ``pos`` is the zero-based character offset."""

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} at position {pos}")
        self.pos = pos


class ConfigError(HyphcError, ValueError):
    pass


class UndefinedMetricError(HyphcError, ValueError):
    pass


class NonFiniteLossError(HyphcError, FloatingPointError):
    def __init__(self, epoch: int, term: str, value: float):
        super().__init__(f"non-finite {term} loss ({value}) at epoch {epoch}")
        self.epoch = epoch
        self.term = term
        self.value = value
