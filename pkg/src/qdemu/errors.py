class NumericalError(ArithmeticError):
    """A computation produced non-finite values or broke a conservation check."""


class MissingInputError(FileNotFoundError):
    """An input artifact is absent; the message names the producing step."""
