"""Exception hierarchy. Each class carries the CLI exit code for its error class."""


class SeqihrError(Exception):
    exit_code = 1


class ConfigError(SeqihrError, ValueError):
    exit_code = 1


class DataError(SeqihrError, ValueError):
    exit_code = 2


class NumericError(SeqihrError, ArithmeticError):
    exit_code = 3


class DegenerateInputError(NumericError):
    """Zero population, zero natural death rate, or a vanishing denominator."""


class StepSizeError(NumericError):
    """A compartment went genuinely negative; retry with a smaller dt."""


class NonFiniteStateError(NumericError):
    pass


class NoAdmissibleEquilibrium(NumericError):
    pass


class NonConvergenceError(SeqihrError):
    exit_code = 4
