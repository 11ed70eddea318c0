"""
Bridges between consecutive simple modes.

A bridge of half-scale S blends a heteroclinic candidate (v, w) into the
source mode for t ≤ -2S and into the target mode for t ≥ 2S with the cutoff
θ_S. The blend (v_S, w_S) solves the forced system with forcing (φ_S, ψ_S)
given in closed form; the forcing vanishes outside S < |t| < 2S.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import structlog

from src.core import telemetry
from src.core.dynamics import Trajectory, extend_trajectory, forced_integrate
from src.core.exceptions import DomainError, KirchhoffLabError
from src.core.heteroclinic import HeteroclinicCandidate
from src.core.nonlinearity import effective_bounds
from src.core.simple_modes import anchor_time
from src.models.config import BridgeConfig, IntegratorConfig
from src.models.reports import ClauseResult, VerdictStatus, VerificationReport

logger = structlog.get_logger()

GAMMA_SAMPLES = 10_000
GAMMA_SAFETY = 1.1
RHO_CUTOFF = 1e-3
FD_STEP = 1e-4


def _rho(y: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """ρ(y) = exp(-1/y) for y > 0 with its first two derivatives."""
    safe = np.where(y > RHO_CUTOFF, y, 1.0)
    rho = np.where(y > RHO_CUTOFF, np.exp(-1.0 / safe), 0.0)
    d1 = rho / safe ** 2
    d2 = rho * (1.0 / safe ** 4 - 2.0 / safe ** 3)
    return rho, d1, d2


@dataclass(frozen=True)
class CutoffFunction:
    """Smooth step θ(x) = ρ(2-x) / (ρ(2-x) + ρ(x-1)).

    θ = 1 on (-∞, 1], θ = 0 on [2, ∞) and |θ'| + |θ''| ≤ gamma.
    """
    gamma: float

    @staticmethod
    def _parts(x: np.ndarray):
        a, da, d2a = _rho(2.0 - x)
        b, db, d2b = _rho(x - 1.0)
        # d/dx of ρ(2-x) flips the sign of the first derivative
        return a, -da, d2a, b, db, d2b

    def derivatives(self, x) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(θ, θ', θ'') at x."""
        x = np.asarray(x, dtype=float)
        inside = (x > 1.0) & (x < 2.0)
        xi = np.where(inside, x, 1.5)
        a, da, d2a, b, db, d2b = self._parts(xi)
        s = a + b
        ds = da + db
        num = da * b - a * db
        dnum = d2a * b - a * d2b
        theta = np.where(inside, a / s, np.where(x <= 1.0, 1.0, 0.0))
        d1 = np.where(inside, num / s ** 2, 0.0)
        d2 = np.where(inside, (dnum * s - 2.0 * num * ds) / s ** 3, 0.0)
        return theta, d1, d2

    def theta(self, x):
        return self.derivatives(x)[0]

    def __call__(self, x):
        value = self.theta(x)
        return float(value) if np.ndim(value) == 0 else value


def make_cutoff() -> CutoffFunction:
    """Cutoff with Γ certified by dense sampling of |θ'| + |θ''| on [1, 2]."""
    x = np.linspace(1.0, 2.0, GAMMA_SAMPLES)
    _, d1, d2 = CutoffFunction(gamma=math.inf).derivatives(x)
    gamma = GAMMA_SAFETY * float(np.max(np.abs(d1) + np.abs(d2)))
    logger.debug("Cutoff built", gamma=gamma)
    return CutoffFunction(gamma=gamma)


def bridge_anchors(candidate: HeteroclinicCandidate, S: float) -> Tuple[float, float]:
    """(S₁, S₂) with S₁ ∈ (2S, 2S+π₁] and S₂ ∈ [2S, 2S+π_λ) at upward zeros of the modes."""
    source, target = candidate.source, candidate.target
    S1 = -anchor_time(source, candidate.tau0, -2.0 * S - source.period)
    S2 = anchor_time(target, candidate.tau1, 2.0 * S)
    return S1, S2


@dataclass(frozen=True)
class ForcingBound:
    """Exponential majorant sup |φ_S|² + |ψ_S|² ≤ (1/S²+1)² B₂ e^{-A₂ S}."""
    A2: float
    B2: float
    B_negative: float
    B_positive: float
    gamma: float
    H1: float
    L: float

    def sup_bound(self, S: float) -> float:
        return (1.0 / S ** 2 + 1.0) ** 2 * self.B2 * math.exp(-self.A2 * S)


@dataclass(frozen=True, eq=False)
class BridgeProfile:
    """Bridge (v_S, w_S) with its forcing, anchors and bound constants."""
    S: float
    candidate: HeteroclinicCandidate
    cutoff: CutoffFunction
    trajectory: Trajectory
    S1: float
    S2: float
    bound_constants: Optional[ForcingBound]

    @property
    def lam(self) -> float:
        return self.candidate.lam

    @property
    def H0(self) -> float:
        return self.candidate.H0

    @property
    def A2(self) -> float:
        return self.bound_constants.A2 if self.bound_constants else math.nan

    @property
    def B2(self) -> float:
        return self.bound_constants.B2 if self.bound_constants else math.nan

    def _blend(self, t):
        """Cutoff, candidate and mode values on both half-lines."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        S = self.S
        negative = t <= 0
        x = np.abs(t) / S
        theta, d1, d2 = self.cutoff.derivatives(x)
        sign = np.where(negative, -1.0, 1.0)
        dtheta = sign * d1 / S
        d2theta = d2 / S ** 2
        active = np.abs(t) < 2.0 * S
        cand = np.zeros((4, t.size))
        if np.any(active):
            cand[:, active] = self.trajectory.state(t[active]).reshape(4, -1)
        z1, dz1 = self.candidate.source.evaluate(t - self.candidate.tau0)
        zl, dzl = self.candidate.target.evaluate(t - self.candidate.tau1)
        z = np.where(negative, z1, zl)
        dz = np.where(negative, dz1, dzl)
        return t, negative, theta, dtheta, d2theta, cand, z, dz

    def state(self, t) -> np.ndarray:
        """(v_S, v_S', w_S, w_S') at t; shape (4,) for scalar t."""
        scalar = np.ndim(t) == 0
        t, neg, th, dth, _, cand, z, dz = self._blend(t)
        v, dv, w, dw = cand
        out = np.empty((4, t.size))
        # t <= 0: v_S = θv + (1-θ)z₁, w_S = θw
        out[0] = np.where(neg, th * v + (1.0 - th) * z, th * v)
        out[1] = np.where(neg, dth * (v - z) + th * dv + (1.0 - th) * dz, dth * v + th * dv)
        out[2] = np.where(neg, th * w, th * w + (1.0 - th) * z)
        out[3] = np.where(neg, dth * w + th * dw, dth * (w - z) + th * dw + (1.0 - th) * dz)
        return out[:, 0] if scalar else out

    __call__ = state

    def forcing(self, t) -> Tuple[np.ndarray, np.ndarray]:
        """Closed-form (φ_S, ψ_S) at t."""
        scalar = np.ndim(t) == 0
        t, neg, th, dth, d2th, cand, z, dz = self._blend(t)
        v, dv, w, dw = cand
        lam2 = self.lam * self.lam
        state = self.state(t)
        m = self.candidate.model.m
        m_bridge = m(state[0] ** 2 + lam2 * state[2] ** 2)
        m_cand = m(v * v + lam2 * w * w)
        gap = m_bridge - m_cand

        phi_neg = (d2th * (v - z) + 2.0 * dth * (dv - dz) + th * v * gap
                   + (1.0 - th) * z * (m_bridge - m(z ** 2)))
        psi_neg = d2th * w + 2.0 * dth * dw + lam2 * th * w * gap
        phi_pos = d2th * v + 2.0 * dth * dv + th * v * gap
        psi_pos = (d2th * (w - z) + 2.0 * dth * (dw - dz) + lam2 * th * w * gap
                   + lam2 * (1.0 - th) * z * (m_bridge - m(lam2 * z ** 2)))
        phi = np.where(neg, phi_neg, phi_pos)
        psi = np.where(neg, psi_neg, psi_pos)
        if scalar:
            return float(phi[0]), float(psi[0])
        return phi, psi

    def forcing_at(self, t: float) -> Tuple[float, float]:
        """Scalar forcing callback for :func:`forced_integrate`."""
        return self.forcing(float(t))

    def bound(self, t) -> np.ndarray:
        """Pointwise majorant of |φ_S|² + |ψ_S|²; zero where the forcing vanishes."""
        if self.bound_constants is None:
            raise DomainError("bridge has no fitted decay constants")
        c = self.candidate
        g, H1, L, lam, S = (self.bound_constants.gamma, self.bound_constants.H1,
                            self.bound_constants.L, self.lam, self.S)
        t = np.atleast_1d(np.asarray(t, dtype=float))
        dist = np.abs(t)
        e0 = c.B0 * np.exp(-c.A0 * dist)
        e1 = c.B1 * np.exp(-c.A1 * dist)
        cut = g / S ** 2 + 2.0 * g / S
        cut_w = g / (S ** 2 * lam) + 2.0 * g / S
        neg = (2.0 * (cut + 4 * H1 ** 2 * L) ** 2 * e1 + 32 * H1 ** 4 * L ** 2 * e0
               + 2.0 * (cut_w + 2 * H1 ** 2 * L * lam) ** 2 * e0
               + 8 * H1 ** 4 * L ** 2 * lam ** 2 * e1)
        pos = (2.0 * (cut + 2 * H1 ** 2 * L) ** 2 * e0 + 8 * H1 ** 4 * L ** 2 * e1
               + 2.0 * (cut_w + 4 * H1 ** 2 * L * lam) ** 2 * e1
               + 32 * H1 ** 4 * L ** 2 * lam ** 2 * e0)
        window = (dist > S) & (dist < 2.0 * S)
        return np.where(window, np.where(t < 0, neg, pos), 0.0)


def bridge_forcing_bound(candidate: HeteroclinicCandidate, S: float,
                         cutoff: CutoffFunction) -> ForcingBound:
    """Assemble (A₂, B₂) from the fitted decay constants, Γ, H₁ and L.

    B₂ is the larger of the t ≤ 0 and t ≥ 0 prefactors taken at the S = 1
    normalization, so the bound holds for every S.

    Raises:
        DomainError: If the candidate lacks positive finite decay constants
    """
    constants = (candidate.A0, candidate.B0, candidate.A1, candidate.B1)
    if not all(math.isfinite(x) and x > 0 for x in constants):
        raise DomainError(f"candidate decay constants unusable: {constants}")
    if not S > 0:
        raise DomainError("S must be positive")
    bounds = effective_bounds(candidate.model, candidate.H0)
    g, H1, L, lam = cutoff.gamma, bounds.H1, bounds.L, candidate.lam
    B0, B1 = candidate.B0, candidate.B1
    b_neg = (2 * (2 * g + 4 * H1 ** 2 * L) ** 2 * B1 + 32 * H1 ** 4 * L ** 2 * B0
             + 2 * (2 * g + 2 * H1 ** 2 * L * lam) ** 2 * B0 + 8 * H1 ** 4 * L ** 2 * lam ** 2 * B1)
    b_pos = (2 * (2 * g + 2 * H1 ** 2 * L) ** 2 * B0 + 8 * H1 ** 4 * L ** 2 * B1
             + 2 * (2 * g + 4 * H1 ** 2 * L * lam) ** 2 * B1
             + 32 * H1 ** 4 * L ** 2 * lam ** 2 * B0)
    return ForcingBound(A2=min(candidate.A0, candidate.A1), B2=max(b_neg, b_pos),
                        B_negative=b_neg, B_positive=b_pos, gamma=g, H1=H1, L=L)


def build_bridge(candidate: HeteroclinicCandidate, S: float,
                 cutoff: Optional[CutoffFunction] = None,
                 integrator: Optional[IntegratorConfig] = None) -> BridgeProfile:
    """Blend the candidate into the two simple modes at scale S.

    The candidate trajectory is extended by unforced integration when it does
    not cover [-2S, 2S], the only window where it enters the blend.

    Raises:
        DomainError: If S is not positive
        NumericalError: If the extension fails
    """
    if not S > 0:
        raise DomainError("S must be positive")
    cutoff = cutoff or make_cutoff()
    trajectory = candidate.trajectory
    if trajectory.t_min > -2.0 * S or trajectory.t_max < 2.0 * S:
        trajectory = extend_trajectory(trajectory, -2.0 * S, 2.0 * S, integrator)
    S1, S2 = bridge_anchors(candidate, S)
    try:
        constants = bridge_forcing_bound(candidate, S, cutoff)
    except DomainError as e:
        logger.warning("Bridge built without a forcing bound", S=S, error=str(e))
        constants = None
    telemetry.BRIDGES_BUILT.inc()
    logger.info("Bridge built", S=S, S1=S1, S2=S2,
                A2=constants.A2 if constants else None, B2=constants.B2 if constants else None)
    return BridgeProfile(S=float(S), candidate=candidate, cutoff=cutoff, trajectory=trajectory,
                         S1=S1, S2=S2, bound_constants=constants)


def _build_job(args):
    candidate, S, cutoff, integrator = args
    return build_bridge(candidate, S, cutoff, integrator)


def build_bridges(candidate: HeteroclinicCandidate, scales: Sequence[float],
                  cutoff: Optional[CutoffFunction] = None,
                  integrator: Optional[IntegratorConfig] = None,
                  workers: int = 1) -> List[BridgeProfile]:
    """Bridges for several scales, in input order."""
    cutoff = cutoff or make_cutoff()
    jobs = [(candidate, float(S), cutoff, integrator) for S in scales]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_build_job, jobs))
    return [_build_job(job) for job in jobs]


def bridge_residual(profile: BridgeProfile, t, h: float = FD_STEP) -> Tuple[np.ndarray, np.ndarray]:
    """v_S'' + m(σ_S)v_S - φ_S and w_S'' + λ²m(σ_S)w_S - ψ_S with central differences."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    lam2 = profile.lam ** 2
    acc = (profile.state(t + h)[[1, 3]] - profile.state(t - h)[[1, 3]]) / (2.0 * h)
    state = profile.state(t)
    m_values = profile.candidate.model.m(state[0] ** 2 + lam2 * state[2] ** 2)
    phi, psi = profile.forcing(t)
    return acc[0] + m_values * state[0] - phi, acc[1] + lam2 * m_values * state[2] - psi


def verify_bridge(profile: BridgeProfile, config: Optional[BridgeConfig] = None,
                  integrator: Optional[IntegratorConfig] = None) -> VerificationReport:
    """Check residual, support, endpoint identities, re-integration, anchors and bound."""
    config = config or BridgeConfig()
    c = profile.candidate
    S, H0 = profile.S, profile.H0
    clauses: List[ClauseResult] = []
    lo, hi = -2.0 * S - 1.0, 2.0 * S + 1.0
    times = np.linspace(lo, hi, config.samples)

    r_v, r_w = bridge_residual(profile, times)
    clauses.append(ClauseResult.compare(
        "residual", float(np.max(np.maximum(np.abs(r_v), np.abs(r_w)))), config.residual_tol))

    inner = np.linspace(-S, S, config.samples)
    outer = np.concatenate([np.linspace(lo - c.source.period, -2.0 * S, config.samples // 2),
                            np.linspace(2.0 * S, hi + c.target.period, config.samples // 2)])
    phi_in, psi_in = profile.forcing(np.concatenate([inner, outer]))
    support = float(np.max(np.maximum(np.abs(phi_in), np.abs(psi_in))))
    clauses.append(ClauseResult.flag("support", support == 0.0, value=support, tolerance=0.0,
                                     detail="max |φ_S|, |ψ_S| on [-S,S] and |t| ≥ 2S"))

    t_neg = np.linspace(-2.0 * S - c.source.period, -2.0 * S, 200)
    t_pos = np.linspace(2.0 * S, 2.0 * S + c.target.period, 200)
    z1, dz1 = c.source.evaluate(t_neg - c.tau0)
    zl, dzl = c.target.evaluate(t_pos - c.tau1)
    s_neg, s_pos = profile.state(t_neg), profile.state(t_pos)
    endpoint = max(
        float(np.max(np.abs(s_neg - np.vstack([z1, dz1, 0 * z1, 0 * z1])))),
        float(np.max(np.abs(s_pos - np.vstack([0 * zl, 0 * zl, zl, dzl])))),
    )
    clauses.append(ClauseResult.compare("endpoint_identities", endpoint, 1e-12))

    left = profile.trajectory.state(0.0)
    joint = float(np.max(np.abs(profile.state(0.0) - left)))
    clauses.append(ClauseResult.compare("continuity", joint, 1e-12))

    try:
        forced = forced_integrate(c.model, c.lam, profile.state(lo), profile.forcing_at,
                                  (lo, hi), integrator)
        gap = float(np.max(np.abs(forced.state(hi) - profile.state(hi))))
        clauses.append(ClauseResult.compare("reintegration", gap, config.reintegration_tol))
    except KirchhoffLabError as e:
        clauses.append(ClauseResult.flag("reintegration", False, detail=str(e)))

    a_neg = profile.state(-profile.S1) - np.array([0.0, H0, 0.0, 0.0])
    a_pos = profile.state(profile.S2) - np.array([0.0, 0.0, 0.0, H0])
    anchors = float(max(np.max(np.abs(a_neg)), np.max(np.abs(a_pos))))
    clauses.append(ClauseResult.compare("anchors", anchors, config.anchor_tol,
                                        detail=f"S1={profile.S1:.12g}, S2={profile.S2:.12g}"))

    if profile.bound_constants is not None:
        phi, psi = profile.forcing(times)
        energy = phi ** 2 + psi ** 2
        sup_bound = profile.bound_constants.sup_bound(S)
        clauses.append(ClauseResult.compare("forcing_bound", float(np.max(energy)), sup_bound))
        with np.errstate(divide="ignore", invalid="ignore"):
            pointwise = profile.bound(times)
            ratio = np.where(energy > 0, energy / pointwise, 0.0)
        clauses.append(ClauseResult.compare("pointwise_bound", float(np.max(ratio)), 1.0))
    else:
        clauses.append(ClauseResult(clause="forcing_bound", status=VerdictStatus.WARN,
                                    detail="candidate has no usable decay constants"))

    report = VerificationReport(subject=f"bridge_S{S:g}", clauses=clauses,
                                context={"S": S, "S1": profile.S1, "S2": profile.S2,
                                         "A2": profile.A2, "B2": profile.B2})
    for clause in report.clauses:
        telemetry.CLAUSE_STATUS.labels(report.subject, clause.clause).set(
            1.0 if clause.status == VerdictStatus.PASS else 0.0)
    logger.info("Bridge verified", S=S, status=report.status.value, failed=report.failed())
    return report


def sup_forcing(profile: BridgeProfile, samples: int = 4000) -> float:
    """sup |φ_S|² + |ψ_S|² on a dense grid of the transition windows."""
    S = profile.S
    grid = np.concatenate([np.linspace(-2.0 * S, -S, samples), np.linspace(S, 2.0 * S, samples)])
    phi, psi = profile.forcing(grid)
    return float(np.max(phi ** 2 + psi ** 2))


def bridge_frame(profile: BridgeProfile, samples: int = 1000) -> pd.DataFrame:
    """Table t, v_S, w_S, φ_S, ψ_S, bound over [-2S-π₁, 2S+π_λ]."""
    c = profile.candidate
    times = np.linspace(-2.0 * profile.S - c.source.period,
                        2.0 * profile.S + c.target.period, samples)
    state = profile.state(times)
    phi, psi = profile.forcing(times)
    bound = profile.bound(times) if profile.bound_constants else np.full(times.shape, np.nan)
    return pd.DataFrame({"t": times, "v_S": state[0], "w_S": state[2],
                         "phi_S": phi, "psi_S": psi, "bound": bound})
