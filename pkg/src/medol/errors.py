"""Exception types raised across the package."""


class ParameterError(ValueError):
    """Invalid argument, shape mismatch or inconsistent configuration."""


class ConstructionError(RuntimeError):
    """A randomized constructor exhausted its retry budget."""

    def __init__(self, message, attempts):
        super().__init__(message)
        self.attempts = attempts


class ParseError(ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NonFiniteError(FloatingPointError):
    """A solver produced a NaN or infinite value and the run was aborted."""

    def __init__(self, message, epoch=None, round=None):
        super().__init__(f"{message} (epoch={epoch}, round={round})")
        self.epoch = epoch
        self.round = round
