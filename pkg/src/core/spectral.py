"""
Finitely supported vectors on the eigenbasis {e_k} of A, A e_k = λ^{2k} e_k,
with Gevrey and weighted norms, and the rescaling of bridges to mode pairs
(e_k, e_{k+1}).
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, Iterable, Mapping, Optional, Tuple

import numpy as np
import pandas as pd
import structlog
from scipy.integrate import quad
from scipy.special import logsumexp

from src.core.bridge import BridgeProfile
from src.core.exceptions import DomainError
from src.models.config import WeightSpec
from src.models.reports import ClauseResult, VerificationReport

logger = structlog.get_logger()

SCALE_MATCH_RTOL = 1e-12
TAIL_DECADES = 16
TAIL_TOLERANCE = 1e-6
FD_STEP = 1e-4


@dataclass(frozen=True)
class SpectralVector:
    """Sparse vector Σ c_k e_k with finitely many nonzero finite coefficients."""
    entries: Tuple[Tuple[int, float], ...] = ()

    def __post_init__(self):
        for k, c in self.entries:
            if k < 0:
                raise DomainError(f"mode index must be nonnegative, got {k}")
            if not math.isfinite(c):
                raise DomainError(f"nonfinite coefficient at mode {k}")

    @classmethod
    def from_mapping(cls, coefficients: Mapping[int, float]) -> "SpectralVector":
        merged: Dict[int, float] = {}
        for k, c in coefficients.items():
            merged[int(k)] = merged.get(int(k), 0.0) + float(c)
        return cls(tuple(sorted((k, c) for k, c in merged.items() if c != 0.0)))

    @classmethod
    def basis(cls, k: int, coefficient: float = 1.0) -> "SpectralVector":
        return cls.from_mapping({k: coefficient})

    @classmethod
    def zero(cls) -> "SpectralVector":
        return cls()

    @property
    def support(self) -> Tuple[int, ...]:
        return tuple(k for k, _ in self.entries)

    def __getitem__(self, k: int) -> float:
        for index, c in self.entries:
            if index == k:
                return c
        return 0.0

    def __add__(self, other: "SpectralVector") -> "SpectralVector":
        merged = dict(self.entries)
        for k, c in other.entries:
            merged[k] = merged.get(k, 0.0) + c
        return SpectralVector.from_mapping(merged)

    def scaled(self, factor: float) -> "SpectralVector":
        return SpectralVector.from_mapping({k: factor * c for k, c in self.entries})

    def dot(self, other: "SpectralVector") -> float:
        theirs = dict(other.entries)
        return float(sum(c * theirs.get(k, 0.0) for k, c in self.entries))

    def norm(self) -> float:
        return float(math.sqrt(sum(c * c for _, c in self.entries)))

    def to_dict(self) -> Dict[str, Any]:
        return {"indices": [k for k, _ in self.entries],
                "coefficients": [c for _, c in self.entries]}

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "SpectralVector":
        return cls.from_mapping(dict(zip(payload["indices"], payload["coefficients"])))


@dataclass(frozen=True)
class OperatorSpec:
    """Diagonal operator A e_k = λ^{2k} e_k."""
    lam: float

    def __post_init__(self):
        if not self.lam > 1.0:
            raise DomainError("λ>1 required")

    def lam_k(self, k) -> float:
        """λ_k = λ^k, the square root of the k-th eigenvalue."""
        return self.lam ** k

    def eigenvalue(self, k) -> float:
        return self.lam ** (2 * k)


def apply_A_power(vec: SpectralVector, op: OperatorSpec, alpha: float) -> SpectralVector:
    """A^α vec: the coefficient at k is multiplied by λ^{2kα}."""
    if alpha == 0:
        return vec
    return SpectralVector.from_mapping(
        {k: c * op.lam ** (2 * k * alpha) for k, c in vec.entries})


def _log_norm(vec: SpectralVector, log_weights: Iterable[float]) -> float:
    if not vec.entries:
        return -math.inf
    coeffs = np.array([c for _, c in vec.entries])
    terms = 2.0 * np.log(np.abs(coeffs)) + np.asarray(list(log_weights), dtype=float)
    return 0.5 * float(logsumexp(terms))


def _from_log(value: float) -> float:
    if value == -math.inf:
        return 0.0
    if value > math.log(np.finfo(float).max):
        logger.debug("Norm beyond float range", log_norm=value)
        return math.inf
    return math.exp(value)


def gevrey_log_norm(vec: SpectralVector, op: OperatorSpec, r: float, s: float) -> float:
    """log of √(Σ c_k² exp(r λ^{k/s})); -inf for the zero vector."""
    if not (r >= 0 and s > 0):
        raise DomainError("Gevrey norm needs r ≥ 0 and s > 0")
    return _log_norm(vec, (r * op.lam ** (k / s) for k in vec.support))


def gevrey_norm(vec: SpectralVector, op: OperatorSpec, r: float, s: float) -> float:
    """√(Σ c_k² exp(r λ^{k/s})); +inf when it exceeds the float range."""
    return _from_log(gevrey_log_norm(vec, op, r, s))


@dataclass(frozen=True)
class WeightFunction:
    """Norm weight φ: [1, ∞) → [0, ∞).

    Kinds:
        gevrey: r σ^{1/(2s)}, which reproduces the Gevrey norm
        subexponential: c √σ / log(e⁴ + σ)²
        zero: φ ≡ 0, the Euclidean norm
    """
    kind: str
    r: float = 1.0
    s: float = 2.0
    c: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gevrey", "subexponential", "zero"):
            raise DomainError(f"unknown weight kind {self.kind}")

    def __call__(self, sigma):
        sigma = np.asarray(sigma, dtype=float)
        if self.kind == "gevrey":
            value = self.r * sigma ** (1.0 / (2.0 * self.s))
        elif self.kind == "subexponential":
            value = self.c * np.sqrt(sigma) / np.log(math.exp(4.0) + sigma) ** 2
        else:
            value = np.zeros_like(sigma)
        return float(value) if value.ndim == 0 else value

    @property
    def label(self) -> str:
        if self.kind == "gevrey":
            return f"gevrey(r={self.r:g},s={self.s:g})"
        if self.kind == "subexponential":
            return f"subexponential(c={self.c:g})"
        return "zero"

    def validate(self, grid: Optional[np.ndarray] = None) -> VerificationReport:
        """Check monotonicity of φ, of φ(σ)/σ², and the tail of ∫φ(σ)/σ² dσ."""
        grid = np.logspace(0.0, 12.0, 2000) if grid is None else np.asarray(grid, dtype=float)
        values = np.asarray(self(grid))
        steps = np.diff(values)
        ratio_steps = np.diff(values / grid ** 2)
        clauses = [
            ClauseResult.flag("increasing", bool(np.all(steps >= 0)),
                              value=float(np.min(steps)) if steps.size else 0.0),
            ClauseResult.flag("ratio_nonincreasing", bool(np.all(ratio_steps <= 0)),
                              value=float(np.max(ratio_steps)) if ratio_steps.size else 0.0),
        ]
        increments = self.tail_increments()
        clauses.append(ClauseResult.compare("tail_summable", increments[-1], TAIL_TOLERANCE,
                                            detail="last decade of ∫φ(σ)/σ² dσ"))
        return VerificationReport(subject=f"weight_{self.label}", clauses=clauses)

    def tail_increments(self, decades: int = TAIL_DECADES) -> np.ndarray:
        """∫ φ(σ)/σ² over [10^j, 10^{j+1}] for j < decades, in log variables."""

        def integrand(u: float) -> float:
            return float(self(math.exp(u))) * math.exp(-u)

        ln10 = math.log(10.0)
        return np.array([quad(integrand, j * ln10, (j + 1) * ln10, limit=200)[0]
                         for j in range(decades)])

    def require_valid(self) -> None:
        """Raises DomainError naming the failed checks."""
        report = self.validate()
        if not report.passed:
            raise DomainError(f"weight {self.label} invalid: {', '.join(report.failed())}")


def gevrey_weight(r: float, s: float) -> WeightFunction:
    return WeightFunction(kind="gevrey", r=r, s=s)


def subexponential_weight(c: float = 1.0) -> WeightFunction:
    return WeightFunction(kind="subexponential", c=c)


def zero_weight() -> WeightFunction:
    return WeightFunction(kind="zero")


def weight_from_spec(spec: WeightSpec) -> WeightFunction:
    return WeightFunction(kind=spec.kind, r=spec.r, s=spec.s, c=spec.c)


def weighted_log_norm(vec: SpectralVector, op: OperatorSpec, weight: WeightFunction) -> float:
    return _log_norm(vec, (float(weight(op.eigenvalue(k))) for k in vec.support))


def weighted_norm(vec: SpectralVector, op: OperatorSpec, weight: WeightFunction) -> float:
    """√(Σ c_k² exp(φ(λ^{2k})))."""
    return _from_log(weighted_log_norm(vec, op, weight))


def norm_log_pair(k: int, first: float, second: float, op: OperatorSpec,
                  weight: WeightFunction) -> np.ndarray:
    """Vectorised log weighted norm of first·e_k + second·e_{k+1} (arrays allowed)."""
    a = np.asarray(first, dtype=float)
    b = np.asarray(second, dtype=float)
    wa = float(weight(op.eigenvalue(k)))
    wb = float(weight(op.eigenvalue(k + 1)))
    with np.errstate(divide="ignore"):
        terms = np.stack([2.0 * np.log(np.abs(a)) + wa, 2.0 * np.log(np.abs(b)) + wb])
    return 0.5 * logsumexp(terms, axis=0)


@dataclass(frozen=True, eq=False)
class RescaledBridge:
    """u_k(t) = λ^{-k}[v_S(λ^k t) e_k + w_S(λ^k t) e_{k+1}], f_k(t) = λ^k[φ_S e_k + ψ_S e_{k+1}](λ^k t)."""
    k: int
    S_k: float
    profile: BridgeProfile
    op: OperatorSpec

    @property
    def lam_k(self) -> float:
        return self.op.lam_k(self.k)

    @property
    def S1k(self) -> float:
        return self.profile.S1 / self.lam_k

    @property
    def S2k(self) -> float:
        return self.profile.S2 / self.lam_k

    def coefficients(self, t) -> np.ndarray:
        """Rows: u_k, u_k' coefficients on e_k and e_{k+1}; shape (4, ...) as (u_k, u_k', u_{k+1}, u_{k+1}')."""
        scaled = self.lam_k * np.asarray(t, dtype=float)
        state = self.profile.state(scaled)
        return np.array([state[0] / self.lam_k, state[1], state[2] / self.lam_k, state[3]])

    def forcing_coefficients(self, t) -> Tuple[np.ndarray, np.ndarray]:
        phi, psi = self.profile.forcing(self.lam_k * np.asarray(t, dtype=float))
        return self.lam_k * np.asarray(phi), self.lam_k * np.asarray(psi)

    def u(self, t: float) -> SpectralVector:
        c = self.coefficients(float(t))
        return SpectralVector.from_mapping({self.k: c[0], self.k + 1: c[2]})

    def du(self, t: float) -> SpectralVector:
        c = self.coefficients(float(t))
        return SpectralVector.from_mapping({self.k: c[1], self.k + 1: c[3]})

    def f(self, t: float) -> SpectralVector:
        phi, psi = self.forcing_coefficients(float(t))
        return SpectralVector.from_mapping({self.k: float(phi), self.k + 1: float(psi)})

    def energy_argument(self, t) -> np.ndarray:
        """|A^{1/2} u_k(t)|² computed from the spectral coefficients."""
        c = self.coefficients(t)
        return self.op.eigenvalue(self.k) * c[0] ** 2 + self.op.eigenvalue(self.k + 1) * c[2] ** 2

    def residual(self, t, h: float = FD_STEP) -> np.ndarray:
        """Coefficients of u_k'' + m(|A^{1/2}u_k|²) A u_k - f_k with central differences."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        h = h / self.lam_k
        acc = (self.coefficients(t + h)[[1, 3]] - self.coefficients(t - h)[[1, 3]]) / (2.0 * h)
        c = self.coefficients(t)
        m_values = self.profile.candidate.model.m(self.energy_argument(t))
        phi, psi = self.forcing_coefficients(t)
        r_k = acc[0] + m_values * self.op.eigenvalue(self.k) * c[0] - phi
        r_k1 = acc[1] + m_values * self.op.eigenvalue(self.k + 1) * c[2] - psi
        return np.vstack([r_k, r_k1])


def rescale_bridge(profile: BridgeProfile, k: int, S_k: float, op: OperatorSpec) -> RescaledBridge:
    """Rescale a bridge of half-scale S = λ^k S_k to the mode pair (e_k, e_{k+1}).

    Raises:
        DomainError: If the profile scale or λ does not match
    """
    if k < 0:
        raise DomainError("mode index must be nonnegative")
    if abs(profile.lam - op.lam) > 0:
        raise DomainError(f"bridge built for λ={profile.lam}, operator has λ={op.lam}")
    expected = op.lam_k(k) * S_k
    if abs(profile.S - expected) > SCALE_MATCH_RTOL * max(1.0, expected):
        raise DomainError(f"bridge scale {profile.S} does not match λ^k S_k = {expected}")
    return RescaledBridge(k=int(k), S_k=float(S_k), profile=profile, op=op)


def fk_log_bound(k: int, S_k: float, op: OperatorSpec, weight_exponent: float,
                 A2: float, B2: float) -> float:
    """log of (λ^{-k}S_k^{-2} + λ^k)² B₂ exp(weight_exponent - A₂ λ^k S_k)."""
    lam_k = op.lam_k(k)
    prefactor = 1.0 / (lam_k * S_k ** 2) + lam_k
    return 2.0 * math.log(prefactor) + math.log(B2) + weight_exponent - A2 * lam_k * S_k


def fk_gevrey_log_bound(k: int, S_k: float, op: OperatorSpec, r: float, s: float,
                        A2: float, B2: float) -> float:
    return fk_log_bound(k, S_k, op, r * op.lam ** ((k + 1) / s), A2, B2)


def fk_gevrey_bound(k: int, S_k: float, op: OperatorSpec, r: float, s: float,
                    A2: float, B2: float) -> float:
    """Bound on sup_t ||f_k(t)||² in the Gevrey space of radius r and exponent s."""
    return _from_log(fk_gevrey_log_bound(k, S_k, op, r, s, A2, B2))


def fk_weighted_bound(k: int, S_k: float, op: OperatorSpec, weight: WeightFunction,
                      A2: float, B2: float) -> float:
    """Weighted analogue with exp(φ(λ^{2k+2})) in place of exp(r λ^{(k+1)/s})."""
    return _from_log(fk_log_bound(k, S_k, op, float(weight(op.eigenvalue(k + 1))), A2, B2))


def fk_bound_table(S_values, op: OperatorSpec, weight: WeightFunction, A2: float,
                   B2: float) -> pd.DataFrame:
    """Per-k bound table (k, S_k, log_bound, bound)."""
    rows = []
    for k, S_k in enumerate(S_values):
        log_bound = fk_log_bound(k, S_k, op, float(weight(op.eigenvalue(k + 1))), A2, B2)
        rows.append({"k": k, "S_k": S_k, "log_bound": log_bound, "bound": _from_log(log_bound)})
    return pd.DataFrame(rows, columns=["k", "S_k", "log_bound", "bound"])
