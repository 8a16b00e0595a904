"""Exception types shared across the package."""


class EHSwitchError(Exception):
    """Base class for all package errors."""


class InvalidArgument(EHSwitchError, ValueError):
    pass


class InvalidTrace(EHSwitchError, ValueError):
    pass


class EmptySchedule(EHSwitchError, ValueError):
    """No energy is available, so no power schedule exists."""


class OutOfRange(EHSwitchError, ValueError):
    pass


class InfeasibleTarget(EHSwitchError):
    """The bit target cannot be met with the energy in the traces."""

    def __init__(self, message, *, target_bits=None, reachable_bits=None, energy_mj=None):
        super().__init__(message)
        self.target_bits = target_bits
        self.reachable_bits = reachable_bits
        self.energy_mj = energy_mj


class NumericalFailure(EHSwitchError, ArithmeticError):
    """Quadrature or iteration failed to converge."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics

    def __str__(self):
        base = super().__str__()
        if not self.diagnostics:
            return base
        detail = ", ".join(f"{k}={v!r}" for k, v in self.diagnostics.items())
        return f"{base} ({detail})"


class TransmissionComplete(EHSwitchError):
    """The current point already coincides with the completion point."""


class ConfigError(EHSwitchError, ValueError):
    pass
