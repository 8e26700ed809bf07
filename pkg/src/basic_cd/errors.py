"""Exception types shared across the package."""


class BasicError(Exception):
    """Base class for all package errors."""


class DomainError(BasicError, ValueError):
    """An argument lies outside the domain an operation accepts."""


class BoundsError(DomainError, IndexError):
    """A node index exceeds the declared graph size."""


class ParseError(BasicError, ValueError):
    """An input file could not be parsed."""


class NumericError(BasicError, ArithmeticError):
    """A numerical routine failed, e.g. an eigensolver did not converge."""


class ValidationError(BasicError, ValueError):
    """A configuration or plan file failed validation."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
