"""Exception taxonomy and CLI exit codes."""

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


class AdvBenchError(Exception):
    """Base class for all toolkit errors."""


class ContractError(AdvBenchError):
    """An input violates an operation's contract (shape, range, alignment)."""


class TaskMismatchError(ContractError):
    """Operation applied to the wrong classification task type."""


class CapabilityError(ContractError):
    """Model lacks a capability the operation requires (e.g. attention taps)."""


class ConfigValidationError(ContractError):
    """Config rejected by schema validation; carries the offending keys."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid config: " + "; ".join(self.problems))


class NumericError(AdvBenchError):
    """Non-finite values encountered where finite numbers are required."""


class UndefinedRatioError(NumericError):
    """Denominator of a ratio metric is zero."""


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the CLI's category-coded exit status."""
    if isinstance(exc, ContractError):
        return EXIT_VALIDATION
    if isinstance(exc, NumericError):
        return EXIT_NUMERIC
    if isinstance(exc, OSError):
        return EXIT_IO
    return 1
