"""
Exception hierarchy for the Kirchhoff blow-up lab.
"""

from typing import Any, Dict, List, Optional


class KirchhoffLabError(Exception):
    """Base class for every error raised by the lab."""


class DomainError(KirchhoffLabError, ValueError):
    """A precondition on the inputs of an operation does not hold."""


class NumericalError(KirchhoffLabError, RuntimeError):
    """A numerical routine failed (integrator, quadrature, root finding).

    Args:
        message: Human readable description
        diagnostics: Extra state useful for post-mortem (last good time/state,
            counters, solver messages)
    """

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics: Dict[str, Any] = dict(diagnostics or {})


class ScheduleRejected(NumericalError):
    """The weighted S_k rule failed one of its verification gates."""


class BridgeConstructionError(NumericalError):
    """Building the bridge for mode index k failed."""

    def __init__(self, k: int, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(f"bridge k={k}: {message}", diagnostics)
        self.k = k


class ConfigError(KirchhoffLabError):
    """Configuration could not be parsed or validated.

    Args:
        message: Summary line
        key_paths: Dotted paths of the offending keys
    """

    def __init__(self, message: str, key_paths: Optional[List[str]] = None):
        super().__init__(message)
        self.key_paths: List[str] = list(key_paths or [])


class MissingCandidateError(ConfigError):
    """A downstream command was started without an accepted candidate file."""
