"""
Exception hierarchy shared by every pipeline step
"""

from typing import Optional


class BSSError(Exception):
    """Base class for all battery-swap pipeline errors."""


class TopologyError(BSSError):
    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TrafficError(BSSError):
    pass


class ForecastError(BSSError):
    pass


class InstanceError(BSSError):
    pass


class InfeasibleFlowError(BSSError):
    pass


class ConfigError(BSSError):
    """Usage or configuration problem (CLI exit code 2)."""
