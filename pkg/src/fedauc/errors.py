"""Exception hierarchy shared by every fedauc module."""


class FedAucError(Exception):
    """Base class for all errors raised by fedauc."""


class DegenerateLabels(FedAucError):
    """A global positive or negative total is zero, so AUC is undefined."""


class InvalidGrid(FedAucError):
    pass


class NonMonotone(FedAucError):
    pass


class InvalidConfig(FedAucError):
    pass


class TooFewParties(InvalidConfig):
    pass


class UnsupportedParams(FedAucError):
    pass


class SlotOverflow(FedAucError):
    pass


class DepthExhausted(FedAucError):
    pass


class ParamMismatch(FedAucError):
    pass


class RoleViolation(FedAucError):
    """A protocol role tried to touch state it must never hold."""


class ParseError(FedAucError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyInput(FedAucError):
    pass


class VerificationFailed(FedAucError):
    """The two malicious-setting runs disagree beyond tolerance."""

    def __init__(self, auc: float, auc_prime: float, tolerance: float):
        self.auc = auc
        self.auc_prime = auc_prime
        self.tolerance = tolerance
        super().__init__(
            f"verification failed: AUC={auc!r} AUC'={auc_prime!r} "
            f"(tolerance {tolerance:g})"
        )
