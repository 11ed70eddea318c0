"""
Nonlinearity m(σ), its primitive M(σ) and the a-priori bounds on the energy ball.

Four families are supported:

- ``constant``: m ≡ c
- ``affine``: m(σ) = a + bσ (classical Kirchhoff string)
- ``pohozaev``: m(σ) = (a + bσ)^(-2), valid up to a cap σ_cap (default 4.0)
- ``tabulated``: monotone cubic (PCHIP) interpolation of (σ, m) samples
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import structlog
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from src.core.exceptions import DomainError

logger = structlog.get_logger()

ArrayLike = Union[float, Sequence[float], np.ndarray]

DEFAULT_POHOZAEV_CAP = 4.0
LIPSCHITZ_GRID_POINTS = 10_001


class NonlinearityFamily(str, Enum):
    """Supported families of m."""
    CONSTANT = "constant"
    AFFINE = "affine"
    POHOZAEV = "pohozaev"
    TABULATED = "tabulated"


@dataclass(frozen=True, eq=False)
class NonlinearityModel:
    """Immutable description of m with vectorised evaluation handles.

    Attributes:
        family: Family tag
        params: Family parameters (c), (a, b) or (a, b[, σ_cap])
        sigma_cap: Upper end of the validity range of the model
        table_sigma: Sample abscissae (tabulated family only)
        table_m: Sample values (tabulated family only)
    """
    family: NonlinearityFamily
    params: Tuple[float, ...] = ()
    sigma_cap: float = math.inf
    table_sigma: Optional[np.ndarray] = None
    table_m: Optional[np.ndarray] = None
    _interp: Optional[PchipInterpolator] = field(default=None, init=False, repr=False)
    _primitive: Any = field(default=None, init=False, repr=False)
    _derivative: Any = field(default=None, init=False, repr=False)

    def __post_init__(self):
        family = NonlinearityFamily(self.family)
        object.__setattr__(self, "family", family)
        params = tuple(float(p) for p in self.params)
        object.__setattr__(self, "params", params)

        if family == NonlinearityFamily.CONSTANT:
            if len(params) != 1 or params[0] <= 0:
                raise DomainError("constant family needs one positive parameter c")
        elif family == NonlinearityFamily.AFFINE:
            if len(params) != 2 or params[0] <= 0 or params[1] < 0:
                raise DomainError("affine family needs a > 0 and b >= 0")
        elif family == NonlinearityFamily.POHOZAEV:
            if len(params) not in (2, 3) or params[0] <= 0 or params[1] <= 0:
                raise DomainError("pohozaev family needs a > 0, b > 0 and optional cap > 0")
            cap = params[2] if len(params) == 3 else DEFAULT_POHOZAEV_CAP
            if cap <= 0:
                raise DomainError("pohozaev validity cap must be positive")
            object.__setattr__(self, "params", params[:2])
            object.__setattr__(self, "sigma_cap", float(cap))
        elif family == NonlinearityFamily.TABULATED:
            sigma = np.asarray(self.table_sigma, dtype=float)
            values = np.asarray(self.table_m, dtype=float)
            if sigma.ndim != 1 or sigma.shape != values.shape or sigma.size < 2:
                raise DomainError("tabulated family needs two equally long sample columns")
            if sigma[0] != 0.0:
                raise DomainError("tabulated σ must start at 0")
            if np.any(np.diff(sigma) <= 0):
                raise DomainError("tabulated σ must be strictly increasing")
            if not np.all(np.isfinite(values)) or np.any(values <= 0):
                raise DomainError("tabulated m must be finite and positive")
            sigma.setflags(write=False)
            values.setflags(write=False)
            interp = PchipInterpolator(sigma, values, extrapolate=False)
            object.__setattr__(self, "table_sigma", sigma)
            object.__setattr__(self, "table_m", values)
            object.__setattr__(self, "sigma_cap", float(sigma[-1]))
            object.__setattr__(self, "_interp", interp)
            object.__setattr__(self, "_primitive", interp.antiderivative())
            object.__setattr__(self, "_derivative", interp.derivative())

    # --- evaluation -------------------------------------------------------

    def _check_sigma(self, sigma: np.ndarray) -> np.ndarray:
        if np.any(sigma < 0):
            raise DomainError(f"σ must be nonnegative, got min {float(np.min(sigma))}")
        if np.any(sigma > self.sigma_cap):
            where = "tabulated range" if self.family == NonlinearityFamily.TABULATED else "validity range"
            raise DomainError(f"σ={float(np.max(sigma))} beyond {where} [0, {self.sigma_cap}]")
        return sigma

    def m(self, sigma: ArrayLike) -> np.ndarray:
        """Vectorised m(σ)."""
        s = self._check_sigma(np.asarray(sigma, dtype=float))
        if self.family == NonlinearityFamily.CONSTANT:
            return np.full_like(s, self.params[0])
        if self.family == NonlinearityFamily.AFFINE:
            a, b = self.params
            return a + b * s
        if self.family == NonlinearityFamily.POHOZAEV:
            a, b = self.params
            return (a + b * s) ** -2
        return np.asarray(self._interp(s))

    def M(self, sigma: ArrayLike) -> np.ndarray:
        """Vectorised primitive M(σ) = ∫₀^σ m."""
        s = self._check_sigma(np.asarray(sigma, dtype=float))
        if self.family == NonlinearityFamily.CONSTANT:
            return self.params[0] * s
        if self.family == NonlinearityFamily.AFFINE:
            a, b = self.params
            return a * s + 0.5 * b * s * s
        if self.family == NonlinearityFamily.POHOZAEV:
            a, b = self.params
            # (1/b)(1/a - 1/(a+bσ)) without the cancellation
            return s / (a * (a + b * s))
        return np.asarray(self._primitive(s))

    def dm(self, sigma: ArrayLike) -> np.ndarray:
        """Vectorised derivative m'(σ)."""
        s = self._check_sigma(np.asarray(sigma, dtype=float))
        if self.family == NonlinearityFamily.CONSTANT:
            return np.zeros_like(s)
        if self.family == NonlinearityFamily.AFFINE:
            return np.full_like(s, self.params[1])
        if self.family == NonlinearityFamily.POHOZAEV:
            a, b = self.params
            return -2.0 * b * (a + b * s) ** -3
        return np.asarray(self._derivative(s))

    def mean_m(self, sigma_lo: ArrayLike, sigma_hi: ArrayLike) -> np.ndarray:
        """Average of m over [σ_lo, σ_hi], i.e. (M(σ_hi) - M(σ_lo)) / (σ_hi - σ_lo).

        Closed forms avoid the cancellation of the difference quotient; the
        degenerate interval returns m(σ).
        """
        lo = self._check_sigma(np.asarray(sigma_lo, dtype=float))
        hi = self._check_sigma(np.asarray(sigma_hi, dtype=float))
        if self.family == NonlinearityFamily.CONSTANT:
            return np.full(np.broadcast(lo, hi).shape, self.params[0])
        if self.family == NonlinearityFamily.AFFINE:
            a, b = self.params
            return a + 0.5 * b * (lo + hi)
        if self.family == NonlinearityFamily.POHOZAEV:
            a, b = self.params
            return 1.0 / ((a + b * lo) * (a + b * hi))
        width = hi - lo
        wide = np.abs(width) > 1e-8 * np.maximum(np.abs(hi), 1.0)
        safe = np.where(wide, width, 1.0)
        quotient = (self.M(hi) - self.M(lo)) / safe
        return np.where(wide, quotient, self.m(0.5 * (lo + hi)))

    # --- derived quantities ----------------------------------------------

    @property
    def mu1(self) -> float:
        """Strict lower bound of m on the validity range."""
        if self.family == NonlinearityFamily.CONSTANT:
            return self.params[0]
        if self.family == NonlinearityFamily.AFFINE:
            return self.params[0]
        if self.family == NonlinearityFamily.POHOZAEV:
            a, b = self.params
            return (a + b * self.sigma_cap) ** -2
        # PCHIP does not overshoot the samples
        return float(np.min(self.table_m))

    def inverse_M(self, value: float) -> float:
        """Return σ ≥ 0 with M(σ) = value.

        Raises:
            DomainError: If value < 0 or the level lies outside the validity range
        """
        if value < 0:
            raise DomainError("M⁻¹ needs a nonnegative level")
        if value == 0:
            return 0.0
        if self.family == NonlinearityFamily.CONSTANT:
            sigma = value / self.params[0]
        elif self.family == NonlinearityFamily.AFFINE:
            a, b = self.params
            sigma = 2.0 * value / (a + math.sqrt(a * a + 2.0 * b * value))
        elif self.family == NonlinearityFamily.POHOZAEV:
            a, b = self.params
            if a * b * value >= 1.0:
                raise DomainError(f"energy level {value} exceeds sup M = {1.0 / (a * b)}")
            sigma = a * a * value / (1.0 - a * b * value)
        else:
            upper = min(value / self.mu1, self.sigma_cap)
            if float(self.M(upper)) < value:
                raise DomainError(f"energy level {value} not reached inside the table")
            sigma = brentq(lambda s: float(self.M(s)) - value, 0.0, upper,
                           xtol=1e-15, rtol=4 * np.finfo(float).eps)
        if sigma > self.sigma_cap * (1.0 + 1e-12):
            raise DomainError(
                f"reachable σ={sigma} leaves the validity range [0, {self.sigma_cap}]"
            )
        return float(sigma)

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready description of the model."""
        payload: Dict[str, Any] = {
            "family": self.family.value,
            "params": list(self.params),
            "sigma_cap": None if math.isinf(self.sigma_cap) else self.sigma_cap,
        }
        if self.family == NonlinearityFamily.POHOZAEV:
            payload["params"] = list(self.params) + [self.sigma_cap]
        if self.family == NonlinearityFamily.TABULATED:
            payload["table"] = {
                "sigma": self.table_sigma.tolist(),
                "m": self.table_m.tolist(),
            }
        return payload

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "NonlinearityModel":
        """Inverse of :meth:`to_dict`."""
        family = NonlinearityFamily(payload["family"])
        if family == NonlinearityFamily.TABULATED:
            table = payload["table"]
            return cls(family, (), table_sigma=np.asarray(table["sigma"]),
                       table_m=np.asarray(table["m"]))
        return cls(family, tuple(payload.get("params", ())))


@dataclass(frozen=True)
class EffectiveBounds:
    """A-priori bounds on the invariant energy ball σ ∈ [0, H₀²/μ₁]."""
    H0: float
    H1: float
    mu1: float
    mu2: float
    L: float
    sigma_ball: float
    sigma_reach: float


def build_model(family: Union[str, NonlinearityFamily],
                params: Sequence[float] = (),
                table_path: Optional[Union[str, Path]] = None) -> NonlinearityModel:
    """Build a model from config values.

    Args:
        family: Family tag
        params: Family parameters
        table_path: CSV table for the tabulated family

    Returns:
        The model
    """
    family = NonlinearityFamily(family)
    if family == NonlinearityFamily.TABULATED:
        if table_path is None:
            raise DomainError("tabulated family needs nonlinearity.table_path")
        return load_table(table_path)
    return NonlinearityModel(family, tuple(params))


def load_table(path: Union[str, Path]) -> NonlinearityModel:
    """Load a tabulated model from a CSV with a header row and columns σ, m(σ)."""
    frame = pd.read_csv(path)
    if frame.shape[1] < 2:
        raise DomainError(f"{path}: expected two columns σ, m(σ)")
    sigma = frame.iloc[:, 0].to_numpy(dtype=float)
    values = frame.iloc[:, 1].to_numpy(dtype=float)
    logger.info("Loaded nonlinearity table", path=str(path), samples=len(sigma))
    return NonlinearityModel(NonlinearityFamily.TABULATED, (), table_sigma=sigma, table_m=values)


def eval_m(model: NonlinearityModel, sigma: float) -> float:
    """Evaluate m at a single σ ≥ 0."""
    if sigma < 0:
        raise DomainError(f"σ must be nonnegative, got {sigma}")
    return float(model.m(sigma))


def eval_M(model: NonlinearityModel, sigma: float) -> float:
    """Evaluate the primitive M at a single σ ≥ 0."""
    if sigma < 0:
        raise DomainError(f"σ must be nonnegative, got {sigma}")
    return float(model.M(sigma))


def eval_dm(model: NonlinearityModel, sigma: float) -> float:
    """Evaluate m' at a single σ ≥ 0."""
    if sigma < 0:
        raise DomainError(f"σ must be nonnegative, got {sigma}")
    return float(model.dm(sigma))


def effective_bounds(model: NonlinearityModel, H0: float) -> EffectiveBounds:
    """Compute H₁, μ₂ and L on the invariant ball for energy level H₀.

    Args:
        model: Nonlinearity
        H0: Energy level, H = H₀²

    Returns:
        EffectiveBounds

    Raises:
        DomainError: If H₀ ≤ 0 or the energy shell leaves the validity range
    """
    if not H0 > 0:
        raise DomainError(f"H₀ must be positive, got {H0}")
    mu1 = model.mu1
    sigma_reach = model.inverse_M(H0 * H0)
    sigma_ball = H0 * H0 / mu1
    upper = min(sigma_ball, model.sigma_cap)

    if model.family == NonlinearityFamily.CONSTANT:
        mu2, lip = model.params[0], 0.0
    elif model.family == NonlinearityFamily.AFFINE:
        a, b = model.params
        mu2, lip = a + b * upper, b
    elif model.family == NonlinearityFamily.POHOZAEV:
        a, b = model.params
        mu2, lip = a ** -2, 2.0 * b / a ** 3
    else:
        grid = np.linspace(0.0, upper, LIPSCHITZ_GRID_POINTS)
        mu2 = float(np.max(model.m(grid)))
        lip = float(np.max(np.abs(model.dm(grid))))

    H1 = max(1.0, 1.0 / math.sqrt(mu1)) * H0
    bounds = EffectiveBounds(H0=H0, H1=H1, mu1=mu1, mu2=float(mu2), L=float(lip),
                             sigma_ball=sigma_ball, sigma_reach=sigma_reach)
    logger.debug("Effective bounds", family=model.family.value, H0=H0, H1=H1,
                 mu2=bounds.mu2, L=bounds.L)
    return bounds


def check_model(model: NonlinearityModel, sigma_grid: ArrayLike) -> Dict[str, float]:
    """Check the model invariants on a σ grid.

    Returns a mapping of invariant name to worst margin (nonnegative means
    satisfied): ``m_ge_mu1``, ``M_increasing``, ``M_ge_mu1_sigma``, ``M_zero``.
    """
    grid = np.sort(np.asarray(sigma_grid, dtype=float))
    grid = grid[grid <= model.sigma_cap]
    mu1 = model.mu1
    m_values = model.m(grid)
    M_values = model.M(grid)
    increments = np.diff(M_values)
    return {
        "m_ge_mu1": float(np.min(m_values - mu1)) if grid.size else 0.0,
        "M_increasing": float(np.min(increments)) if increments.size else 0.0,
        "M_ge_mu1_sigma": float(np.min(M_values - mu1 * grid)) if grid.size else 0.0,
        "M_zero": -abs(float(model.M(0.0))),
    }
