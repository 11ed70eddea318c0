"""
Simple modes z_λ of the one-mode Kirchhoff equation and their transverse stability.

The standard mode z₁ solves z'' + m(z²) z = 0 with z(0) = 0, z'(0) = H₀.
Rescaled modes are z_λ(t) = z₁(λt)/λ with minimal period π_λ = π₁/λ.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence, Tuple

import numpy as np
import pandas as pd
import structlog
from scipy.integrate import quad, solve_ivp

from src.core.exceptions import DomainError, NumericalError
from src.core.nonlinearity import NonlinearityModel

logger = structlog.get_logger()

QUARTER_RTOL = 1e-13
QUARTER_ATOL = 1e-14
MONODROMY_RTOL = 1e-12
MONODROMY_ATOL = 1e-13
UNSTABLE_THRESHOLD = 1e-6


def mode_period(model: NonlinearityModel, H0: float) -> float:
    """Minimal period π₁ of the standard simple mode with energy H₀.

    Uses z = z_max sin θ, which turns the period integral into
    4 ∫₀^{π/2} dθ / sqrt(mean of m over [σ* sin²θ, σ*]) with M(σ*) = H₀².

    Raises:
        DomainError: If H₀ ≤ 0 or the energy shell leaves the validity range
        NumericalError: If the quadrature does not converge
    """
    if not H0 > 0:
        raise DomainError(f"H₀ must be positive, got {H0}")
    sigma_star = model.inverse_M(H0 * H0)

    def integrand(theta: float) -> float:
        lo = sigma_star * math.sin(theta) ** 2
        return 1.0 / math.sqrt(float(model.mean_m(lo, sigma_star)))

    out = quad(integrand, 0.0, 0.5 * math.pi, epsabs=0.0, epsrel=1e-13,
               limit=200, full_output=1)
    if len(out) > 3:
        raise NumericalError("period quadrature did not converge",
                             {"message": out[3], "estimate": out[0], "abserr": out[1],
                              "H0": H0, "family": model.family.value})
    return 4.0 * out[0]


def first_return_time(model: NonlinearityModel, H0: float,
                      rtol: float = 1e-12, atol: float = 1e-14) -> float:
    """First positive-slope zero of z'' + m(z²)z = 0, z(0)=0, z'(0)=H₀, by direct integration."""
    horizon = 1.1 * 2.0 * math.pi / math.sqrt(model.mu1)

    def rhs(t, y):
        return [y[1], -float(model.m(y[0] * y[0])) * y[0]]

    def upward_zero(t, y):
        return y[0]
    upward_zero.direction = 1.0

    sol = solve_ivp(rhs, (0.0, horizon), [0.0, H0], method="DOP853", rtol=rtol,
                    atol=atol, events=upward_zero)
    if sol.status < 0:
        raise NumericalError("first return integration failed", {"message": sol.message})
    hits = sol.t_events[0]
    hits = hits[hits > 1e-6]
    if hits.size == 0:
        raise NumericalError("no return to z=0 within the comparison bound",
                             {"horizon": horizon})
    return float(hits[0])


@dataclass(frozen=True, eq=False)
class SimpleMode:
    """Simple mode z_λ backed by a dense quarter-period table of z₁.

    Attributes:
        model: Nonlinearity
        H0: Energy, z_λ'(0) = H₀
        lam: Frequency scale λ ≥ 1
        period_1: π₁
        z_max_1: Amplitude of z₁ (M(z_max_1²) = H₀²)
        quarter: Dense interpolant of (z₁, z₁') on [0, π₁/4]
    """
    model: NonlinearityModel
    H0: float
    lam: float
    period_1: float
    z_max_1: float
    quarter: object

    @classmethod
    def build(cls, model: NonlinearityModel, H0: float, lam: float = 1.0) -> "SimpleMode":
        """Tabulate the quarter period of z₁ and return z_λ."""
        if lam < 1.0:
            raise DomainError(f"λ ≥ 1 required for simple modes, got {lam}")
        period_1 = mode_period(model, H0)

        def rhs(t, y):
            return [y[1], -float(model.m(y[0] * y[0])) * y[0]]

        sol = solve_ivp(rhs, (0.0, 0.25 * period_1), [0.0, H0], method="DOP853",
                        rtol=QUARTER_RTOL, atol=QUARTER_ATOL, dense_output=True)
        if not sol.success:
            raise NumericalError("quarter-period tabulation failed", {"message": sol.message})
        z_end, dz_end = sol.y[:, -1]
        if abs(dz_end) > 1e-8 * H0:
            logger.warning("Quarter table does not end at the extremum",
                           dz_end=float(dz_end), H0=H0, period=period_1)
        logger.debug("Simple mode tabulated", H0=H0, period=period_1, z_max=float(z_end),
                     steps=len(sol.t) - 1)
        return cls(model=model, H0=float(H0), lam=float(lam), period_1=period_1,
                   z_max_1=float(math.sqrt(model.inverse_M(H0 * H0))), quarter=sol.sol)

    @property
    def period(self) -> float:
        """Minimal period π_λ = π₁/λ."""
        return self.period_1 / self.lam

    @property
    def z_max(self) -> float:
        """Amplitude of z_λ."""
        return self.z_max_1 / self.lam

    def rescaled(self, lam: float) -> "SimpleMode":
        """Same mode at another frequency scale, sharing the table."""
        if lam < 1.0:
            raise DomainError(f"λ ≥ 1 required for simple modes, got {lam}")
        return replace(self, lam=float(lam))

    def evaluate(self, t) -> Tuple[np.ndarray, np.ndarray]:
        """Return (z_λ(t), z_λ'(t)) using periodicity and the quarter symmetries."""
        t_arr = np.asarray(t, dtype=float)
        s = np.atleast_1d(self.lam * t_arr).ravel()
        p = self.period_1
        half, q = 0.5 * p, 0.25 * p
        u = np.mod(s, p)
        upper_half = u >= half
        sign = np.where(upper_half, -1.0, 1.0)
        u = np.where(upper_half, u - half, u)
        mirrored = u > q
        r = np.clip(np.where(mirrored, half - u, u), 0.0, q)
        table = np.asarray(self.quarter(r)).reshape(2, -1)
        z = sign * table[0] / self.lam
        dz = sign * np.where(mirrored, -table[1], table[1])
        if t_arr.ndim == 0:
            return float(z[0]), float(dz[0])
        return z.reshape(t_arr.shape), dz.reshape(t_arr.shape)

    def second_derivative(self, t) -> np.ndarray:
        """z_λ''(t) = -λ² m(λ² z_λ²) z_λ."""
        z, _ = self.evaluate(t)
        z = np.asarray(z)
        lam2 = self.lam * self.lam
        return -lam2 * self.model.m(lam2 * z * z) * z

    def energy_residual(self, t) -> np.ndarray:
        """z_λ'² + M(λ² z_λ²) - H₀²."""
        z, dz = self.evaluate(t)
        z, dz = np.asarray(z), np.asarray(dz)
        return dz * dz + self.model.M(self.lam * self.lam * z * z) - self.H0 * self.H0


def mode_eval(mode: SimpleMode, t):
    """Evaluate (z_λ(t), z_λ'(t))."""
    return mode.evaluate(t)


def anchor_time(mode: SimpleMode, tau: float, window_start: float) -> float:
    """Unique t* in [window_start, window_start + π_λ) with z_λ(t*-τ)=0, z_λ'(t*-τ)=H₀.

    The upward zeros of z_λ sit on the lattice π_λ ℤ; the lattice point is
    polished with Newton steps on t ↦ z_λ(t - τ).
    """
    period = mode.period
    t_star = tau + math.ceil((window_start - tau) / period) * period
    if t_star < window_start:
        t_star += period
    elif t_star >= window_start + period:
        t_star -= period
    for _ in range(4):
        z, dz = mode.evaluate(t_star - tau)
        if dz <= 0:
            break
        step = z / dz
        t_star -= step
        if abs(step) < 1e-16 * max(1.0, abs(t_star)):
            break
    # keep the half-open window after polishing
    if t_star < window_start:
        t_star = window_start if window_start - t_star < 1e-12 else t_star + period
    elif t_star >= window_start + period:
        t_star -= period
    return float(t_star)


@dataclass(frozen=True)
class FloquetResult:
    """Monodromy data of the transverse Hill equation ξ'' + λ² m(z₁²) ξ = 0."""
    lam: float
    multipliers: Tuple[complex, complex]
    monodromy: np.ndarray
    determinant: float
    eigenvectors: np.ndarray

    @property
    def max_modulus(self) -> float:
        return float(max(abs(mu) for mu in self.multipliers))

    @property
    def unstable(self) -> bool:
        return self.max_modulus > 1.0 + UNSTABLE_THRESHOLD

    def unstable_direction(self) -> Tuple[float, np.ndarray]:
        """Real unstable multiplier and its unit eigenvector (ξ, ξ') at phase 0.

        Raises:
            DomainError: If the source mode has no unstable direction
        """
        if not self.unstable:
            raise DomainError(
                f"no unstable direction: max |multiplier| = {self.max_modulus:.12g}"
            )
        index = int(np.argmax(np.abs(self.multipliers)))
        vector = np.real(self.eigenvectors[:, index])
        vector = vector / np.linalg.norm(vector)
        pivot = vector[np.argmax(np.abs(vector))]
        if pivot < 0:
            vector = -vector
        return float(np.real(self.multipliers[index])), vector


def floquet_multipliers(model: NonlinearityModel, H0: float, lam: float) -> FloquetResult:
    """Monodromy eigenvalues of the transverse linearization around (z₁, 0).

    z₁ is integrated alongside the two canonical solutions so that the
    coefficient is exact at every stage.
    """
    if lam < 1.0:
        raise DomainError(f"λ ≥ 1 required, got {lam}")
    period = mode_period(model, H0)
    lam2 = lam * lam

    def rhs(t, y):
        z, dz, x1, dx1, x2, dx2 = y
        mz = float(model.m(z * z))
        k = lam2 * mz
        return [dz, -mz * z, dx1, -k * x1, dx2, -k * x2]

    sol = solve_ivp(rhs, (0.0, period), [0.0, H0, 1.0, 0.0, 0.0, 1.0], method="DOP853",
                    rtol=MONODROMY_RTOL, atol=MONODROMY_ATOL)
    if not sol.success:
        raise NumericalError("monodromy integration failed",
                             {"message": sol.message, "lam": lam, "H0": H0})
    end = sol.y[:, -1]
    monodromy = np.array([[end[2], end[4]], [end[3], end[5]]])
    values, vectors = np.linalg.eig(monodromy)
    order = np.argsort(-np.abs(values), kind="stable")
    values, vectors = values[order], vectors[:, order]
    det = float(np.linalg.det(monodromy))
    if abs(det - 1.0) > 1e-8:
        logger.warning("Monodromy determinant drifted", det=det, lam=lam, H0=H0)
    return FloquetResult(lam=float(lam),
                         multipliers=(complex(values[0]), complex(values[1])),
                         monodromy=monodromy, determinant=det, eigenvectors=vectors)


def _scan_point(args: Tuple[NonlinearityModel, float, float]) -> dict:
    model, H0, lam = args
    result = floquet_multipliers(model, H0, lam)
    return {
        "lam": lam,
        "max_modulus": result.max_modulus,
        "unstable": result.unstable,
        "determinant": result.determinant,
        "trace": float(np.trace(result.monodromy)),
    }


def floquet_scan(model: NonlinearityModel, H0: float, lambdas: Sequence[float],
                 workers: int = 1) -> pd.DataFrame:
    """Scan λ for parametric-resonance tongues of the source mode.

    Args:
        model: Nonlinearity
        H0: Energy level
        lambdas: λ values, each ≥ 1
        workers: Process pool size; 1 runs inline

    Returns:
        DataFrame with columns lam, max_modulus, unstable, determinant, trace
    """
    jobs = [(model, H0, float(lam)) for lam in lambdas]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_scan_point, jobs))
    else:
        rows = [_scan_point(job) for job in jobs]
    frame = pd.DataFrame(rows, columns=["lam", "max_modulus", "unstable", "determinant", "trace"])
    logger.info("Floquet scan finished", points=len(frame),
                unstable=int(frame["unstable"].sum()) if len(frame) else 0)
    return frame


def sample_mode(mode: SimpleMode, periods: float = 2.0, samples: int = 400,
                t_start: float = 0.0) -> pd.DataFrame:
    """Tabulate z_λ over a number of periods with its energy residual."""
    t = np.linspace(t_start, t_start + periods * mode.period, samples)
    z, dz = mode.evaluate(t)
    return pd.DataFrame({
        "t": t,
        "z": z,
        "dz": dz,
        "energy_residual": mode.energy_residual(t),
    })


def transport_hill(model: NonlinearityModel, H0: float, lam: float,
                   vector: np.ndarray, phase: float) -> np.ndarray:
    """Carry a transverse vector (ξ, ξ') from phase 0 to ``phase`` along z₁."""
    if phase == 0.0:
        return np.asarray(vector, dtype=float).copy()
    lam2 = lam * lam

    def rhs(t, y):
        z, dz, x, dx = y
        mz = float(model.m(z * z))
        return [dz, -mz * z, dx, -lam2 * mz * x]

    sol = solve_ivp(rhs, (0.0, phase), [0.0, H0, float(vector[0]), float(vector[1])],
                    method="DOP853", rtol=MONODROMY_RTOL, atol=MONODROMY_ATOL)
    if not sol.success:
        raise NumericalError("Hill transport failed", {"message": sol.message, "phase": phase})
    return sol.y[2:, -1].copy()
