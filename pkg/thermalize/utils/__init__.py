"""
Utilities module - Error types and logging setup
"""
from .errors import (
    ConfigError,
    DegenerateSpectrumError,
    DomainError,
    IntegrationError,
    NumericalConsistencyError,
    NumericalError,
    OutputError,
    ThermalizeError,
    ThermalRangeError,
    UnreachableTemperatureError,
    exit_code_for,
)
from .logging_setup import configure_logging

__all__ = [
    'ConfigError', 'DegenerateSpectrumError', 'DomainError', 'IntegrationError',
    'NumericalConsistencyError', 'NumericalError', 'OutputError', 'ThermalizeError',
    'ThermalRangeError', 'UnreachableTemperatureError', 'exit_code_for', 'configure_logging',
]
