"""
Utility functions for the Kirchhoff blow-up lab.
"""

import json
import math
import time
from functools import wraps
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np
import pandas as pd
import structlog

logger = structlog.get_logger()

FLOAT_FORMAT = "%.17g"


def format_duration(seconds: float) -> str:
    """Format duration in seconds to human-readable format.

    Args:
        seconds: Duration in seconds

    Returns:
        Formatted duration string
    """
    if seconds < 60:
        return f"{seconds:.1f}s"
    elif seconds < 3600:
        return f"{seconds / 60:.1f}m"
    return f"{seconds / 3600:.1f}h"


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        # JSON has no inf/nan
        return value if math.isfinite(value) else str(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, Path):
        return str(value)
    return value


def write_json(payload: Dict[str, Any], path: Union[str, Path]) -> Path:
    """Write a JSON artifact with sorted keys and round-trippable floats."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return target


def export_series(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    """Write a table as CSV (or JSON records for a ``.json`` suffix).

    Args:
        frame: Table to export
        path: Destination

    Returns:
        The written path
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    if target.suffix == ".json":
        write_json({"columns": list(frame.columns),
                    "rows": frame.to_dict(orient="records")}, target)
    else:
        frame.to_csv(target, index=False, float_format=FLOAT_FORMAT)
    logger.debug("Series exported", path=str(target), rows=len(frame))
    return target


def timed(name: str):
    """Decorator logging the wall time of a pipeline stage."""
    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            start = time.perf_counter()
            try:
                return func(*args, **kwargs)
            finally:
                elapsed = time.perf_counter() - start
                logger.info("Stage finished", stage=name, elapsed=format_duration(elapsed))
        return wrapper
    return decorator
