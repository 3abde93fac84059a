"""
Error hierarchy and exit-code mapping
"""
from pydantic import ValidationError


EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class ThermalizeError(Exception):
    """Base class for all errors raised by the package"""

    exit_code = EXIT_UNEXPECTED


class ConfigError(ThermalizeError):
    """Malformed or inconsistent experiment configuration"""

    exit_code = EXIT_CONFIG


class DomainError(ThermalizeError, ValueError):
    """Argument outside the domain of an operation (bad index, size mismatch, ...)"""

    exit_code = EXIT_CONFIG


class NumericalError(ThermalizeError, ArithmeticError):
    """A numerical routine failed or produced an inconsistent result"""

    exit_code = EXIT_NUMERICAL


class NumericalConsistencyError(NumericalError):
    """A quantity that must be real / nonnegative is not, beyond tolerance"""


class DegenerateSpectrumError(NumericalError):
    """E_max equals E_min, so the normalized energy is undefined"""


class ThermalRangeError(NumericalError):
    """Inverse temperature outside the representable range"""


class UnreachableTemperatureError(NumericalError):
    """The target energy lies at or outside the spectral range, beta diverges"""


class IntegrationError(NumericalError):
    """An ODE integrator failed (step-size underflow, too many steps)"""


class OutputError(ThermalizeError):
    """Writing results failed; the message carries the offending path"""

    exit_code = EXIT_UNEXPECTED


def exit_code_for(exc: BaseException) -> int:
    """
    Map an exception to the CLI exit code

    Args:
        exc: Exception raised while running a command

    Returns:
        2 for configuration / domain errors, 3 for numerical errors, 1 otherwise
    """
    if isinstance(exc, ValidationError):
        return EXIT_CONFIG
    if isinstance(exc, ThermalizeError):
        return exc.exit_code
    return EXIT_UNEXPECTED
