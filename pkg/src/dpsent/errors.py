class ContractError(ValueError):
    """A caller broke an operation's precondition (shape mismatch, empty batch, k > n, ...)."""


class CalibrationError(ValueError):
    pass


class ReportError(ValueError):
    pass
