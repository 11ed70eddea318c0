"""
Run telemetry exported in the Prometheus text format.

The registry is process local; counters incremented inside worker processes
are not merged back.
"""

from pathlib import Path
from typing import Union

import structlog
from prometheus_client import CollectorRegistry, Counter, Gauge, write_to_textfile

logger = structlog.get_logger()

REGISTRY = CollectorRegistry()

INTEGRATOR_STEPS = Counter(
    "kirchhoff_integrator_steps",
    "Accepted integrator steps",
    registry=REGISTRY,
)
INTEGRATOR_REJECTED = Counter(
    "kirchhoff_integrator_rejected_steps",
    "Rejected integrator step attempts",
    registry=REGISTRY,
)
RHS_EVALUATIONS = Counter(
    "kirchhoff_rhs_evaluations",
    "Right-hand side evaluations",
    registry=REGISTRY,
)
SHOOTING_EVALUATIONS = Counter(
    "kirchhoff_shooting_evaluations",
    "Shooting distance evaluations during heteroclinic search",
    registry=REGISTRY,
)
BRIDGES_BUILT = Counter(
    "kirchhoff_bridges_built",
    "Bridge profiles constructed",
    registry=REGISTRY,
)
HAMILTONIAN_DRIFT = Gauge(
    "kirchhoff_hamiltonian_max_relative_drift",
    "Worst relative Hamiltonian drift over unforced integrations",
    registry=REGISTRY,
)
CLAUSE_STATUS = Gauge(
    "kirchhoff_verification_clause_passed",
    "1 if the verification clause passed, 0 otherwise",
    ["subject", "clause"],
    registry=REGISTRY,
)

_worst_drift = 0.0


def record_drift(drift: float) -> None:
    """Keep the drift gauge at the worst value seen in this process."""
    global _worst_drift
    if drift > _worst_drift:
        _worst_drift = drift
        HAMILTONIAN_DRIFT.set(drift)


def write_metrics(path: Union[str, Path]) -> Path:
    """Write the registry to ``path`` in the text exposition format.

    Args:
        path: Target file

    Returns:
        The written path
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    write_to_textfile(str(target), REGISTRY)
    logger.debug("Metrics written", path=str(target))
    return target
