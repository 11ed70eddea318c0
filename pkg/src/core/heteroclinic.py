"""
Search and certification of heteroclinic connections between the source mode
(z₁, 0) and the target mode (0, z_λ).

A candidate is a trajectory of the unforced two-mode system together with the
asymptotic data (τ₀, τ₁, A₀, B₀, A₁, B₁):

    |v'(t)|² + |v(t)|²            ≤ B₀ e^{-A₀ t}      for t ≥ 0
    |w'(t)|² + λ²|w(t)|²          ≤ B₀ e^{A₀ t}       for t ≤ 0
    |v - z₁(·-τ₀)|² + |v' - z₁'|² ≤ B₁ e^{A₁ t}       for t ≤ 0
    |w' - z_λ'|² + λ²|w - z_λ|²   ≤ B₁ e^{-A₁ t}      for t ≥ 0
"""

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Tuple, Union

import numpy as np
import structlog
from scipy.optimize import brentq, minimize, minimize_scalar

from src.core import telemetry
from src.core.dynamics import PhaseState, Trajectory, hamiltonian, integrate, residual
from src.core.exceptions import DomainError, KirchhoffLabError, NumericalError
from src.core.nonlinearity import NonlinearityModel
from src.core.simple_modes import (
    FloquetResult,
    SimpleMode,
    floquet_multipliers,
    transport_hill,
)
from src.models.config import IntegratorConfig, SearchConfig
from src.models.reports import ClauseResult, SearchReport, VerificationReport

logger = structlog.get_logger()

SCHEMA_VERSION = 1
NOISE_FLOOR = 1e-26
ENVELOPE_MARGIN = 1.01
FIT_SAMPLES_PER_PERIOD = 200
PHASE_GRID_FIT = 256


class ShotResult(NamedTuple):
    """Closest approach to the target orbit in the final part of a shot."""
    distance: float
    best_time: float
    best_phase: float


@dataclass(frozen=True)
class DecayFit:
    """Exponential envelope D(t) ≤ B e^{-A|t|} fitted to per-period peaks."""
    rate: float
    amplitude: float
    residual: float
    windows: int
    vanishing: bool = False


@dataclass(frozen=True)
class AsymptoticFit:
    """Phases and decay constants of a candidate with the fit diagnostics."""
    tau0: float
    tau1: float
    A0: float
    B0: float
    A1: float
    B1: float
    accepted: bool
    reasons: Tuple[str, ...] = ()
    report: Dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class HeteroclinicCandidate:
    """A (possibly approximate) connection with its fitted asymptotic data."""
    trajectory: Trajectory
    model: NonlinearityModel
    H0: float
    lam: float
    source: SimpleMode
    target: SimpleMode
    tau0: float
    tau1: float
    A0: float
    B0: float
    A1: float
    B1: float
    defect: float = math.nan
    accepted: bool = False
    seed: Dict[str, Any] = field(default_factory=dict)
    fit_report: Dict[str, float] = field(default_factory=dict)

    @property
    def nontriviality(self) -> float:
        """v'(0)² + w'(0)² + v(0)² + w(0)² (nearest span point if 0 is outside)."""
        t0 = min(max(0.0, self.trajectory.t_min), self.trajectory.t_max)
        v, dv, w, dw = self.trajectory.state(t0)
        return float(dv * dv + dw * dw + v * v + w * w)


def make_candidate(trajectory: Trajectory, H0: float, lam: float,
                   fit: Optional[AsymptoticFit] = None, defect: float = math.nan,
                   seed: Optional[Dict[str, Any]] = None,
                   source: Optional[SimpleMode] = None) -> HeteroclinicCandidate:
    """Wrap a trajectory as a candidate, fitting the asymptotics if not given."""
    model = trajectory.model
    source = source or SimpleMode.build(model, H0)
    target = source.rescaled(lam)
    fit = fit or fit_asymptotics(trajectory, source, target, lam)
    return HeteroclinicCandidate(
        trajectory=trajectory, model=model, H0=float(H0), lam=float(lam),
        source=source, target=target, tau0=fit.tau0, tau1=fit.tau1,
        A0=fit.A0, B0=fit.B0, A1=fit.A1, B1=fit.B1, defect=float(defect),
        accepted=fit.accepted, seed=dict(seed or {}), fit_report=dict(fit.report),
    )


# === Seeding ===

def unstable_manifold_seed(model: NonlinearityModel, H0: float, lam: float, eps: float,
                           phase: float, floquet: Optional[FloquetResult] = None,
                           source: Optional[SimpleMode] = None) -> PhaseState:
    """Point on the linear unstable manifold of the source mode.

    Returns (z₁(phase), z₁'(phase), εξ, εξ') with (ξ, ξ') the unit unstable
    eigenvector of the period map transported to ``phase``.

    Raises:
        DomainError: If the source mode is transversely stable
    """
    source = source or SimpleMode.build(model, H0)
    floquet = floquet or floquet_multipliers(model, H0, lam)
    _, vector = floquet.unstable_direction()
    local_phase = float(np.mod(phase, source.period_1))
    xi = transport_hill(model, H0, lam, vector, local_phase)
    xi = xi / np.linalg.norm(xi)
    z, dz = source.evaluate(phase)
    return PhaseState(z, dz, eps * float(xi[0]), eps * float(xi[1]))


def transverse_seed(source: SimpleMode, eps: float, phase: float) -> PhaseState:
    """Seed along the transverse velocity axis, used when no unstable direction exists."""
    z, dz = source.evaluate(phase)
    return PhaseState(z, dz, 0.0, eps)


def project_to_energy(model: NonlinearityModel, lam: float, state: PhaseState,
                      H0: float) -> PhaseState:
    """Rescale (v, v') so that the Hamiltonian equals H₀² exactly."""
    target = H0 * H0
    v, dv, w, dw = state.as_array()

    def excess(kappa: float) -> float:
        return (kappa * kappa * dv * dv + dw * dw
                + float(model.M(kappa * kappa * v * v + lam * lam * w * w)) - target)

    if excess(0.0) >= 0:
        raise DomainError("transverse displacement already exceeds the energy level")
    upper = 1.0
    while excess(upper) < 0:
        upper *= 2.0
        if upper > 1e6:
            raise DomainError("cannot reach the energy level by rescaling (v, v')")
    kappa = brentq(excess, 0.0, upper, xtol=1e-16, rtol=4 * np.finfo(float).eps)
    return PhaseState(kappa * v, kappa * dv, w, dw)


# === Shooting ===

def _closest_approach(trajectory: Trajectory, target: SimpleMode, lam: float,
                      t_lo: float, t_hi: float, phase_grid: int) -> ShotResult:
    step = target.period / 64.0
    times = np.linspace(t_lo, t_hi, max(2, int(math.ceil((t_hi - t_lo) / step)) + 1))
    v, dv, w, dw = trajectory.state(times)
    phases = np.linspace(0.0, target.period, phase_grid, endpoint=False)
    z, dz = target.evaluate(times[:, None] - phases[None, :])
    lam2 = lam * lam
    dist = ((dv * dv + v * v)[:, None] + (dw[:, None] - dz) ** 2
            + lam2 * (w[:, None] - z) ** 2)
    i, j = np.unravel_index(int(np.argmin(dist)), dist.shape)
    t_best = float(times[i])
    state = trajectory.state(t_best)
    base = float(state[1] ** 2 + state[0] ** 2)

    def at_phase(tau: float) -> float:
        zz, dzz = target.evaluate(t_best - tau)
        return base + (state[3] - dzz) ** 2 + lam2 * (state[2] - zz) ** 2

    width = target.period / phase_grid
    polished = minimize_scalar(at_phase, bounds=(phases[j] - width, phases[j] + width),
                               method="bounded", options={"xatol": 1e-12})
    best_phase, best = float(phases[j]), float(dist[i, j])
    if polished.fun < best:
        best_phase, best = float(polished.x), float(polished.fun)
    return ShotResult(best, t_best, float(np.mod(best_phase, target.period)))


def _shoot(model: NonlinearityModel, lam: float, seed: PhaseState, horizon: float,
           target: SimpleMode, tail_fraction: float, phase_grid: int,
           config: Optional[IntegratorConfig]) -> Tuple[ShotResult, Trajectory]:
    trajectory = integrate(model, lam, seed, (0.0, horizon), config)
    telemetry.SHOOTING_EVALUATIONS.inc()
    shot = _closest_approach(trajectory, target, lam, (1.0 - tail_fraction) * horizon,
                             horizon, phase_grid)
    return shot, trajectory


def shoot_distance(model: NonlinearityModel, lam: float, seed: PhaseState, horizon: float,
                   target: Optional[SimpleMode] = None, tail_fraction: float = 0.25,
                   phase_grid: int = 64,
                   config: Optional[IntegratorConfig] = None) -> ShotResult:
    """Smallest distance to the target orbit over the final part of a forward shot.

    d(t, τ) = v'² + v² + |w' - z_λ'(t-τ)|² + λ²|w - z_λ(t-τ)|² is minimised
    over the last ``tail_fraction`` of [0, horizon] and over target phases.

    Args:
        model: Nonlinearity
        lam: Frequency ratio λ
        seed: Initial state at t = 0
        horizon: Forward integration length
        target: Target mode z_λ; built from the seed energy when omitted
        tail_fraction: Share of the horizon scanned
        phase_grid: Target phases before polishing
        config: Integrator settings

    Returns:
        ShotResult(distance, best_time, best_phase)
    """
    if not horizon > 0:
        raise DomainError("horizon must be positive")
    if target is None:
        H0 = math.sqrt(hamiltonian(model, lam, seed))
        target = SimpleMode.build(model, H0, lam)
    shot, _ = _shoot(model, lam, seed, horizon, target, tail_fraction, phase_grid, config)
    return shot


# === Search ===

@dataclass(frozen=True, eq=False)
class _SearchContext:
    model: NonlinearityModel
    H0: float
    lam: float
    source: SimpleMode
    target: SimpleMode
    floquet: FloquetResult
    unstable: bool
    config: SearchConfig
    integrator: Optional[IntegratorConfig]


def _seed_for(ctx: _SearchContext, phase: float, log_eps: float, sign: float) -> PhaseState:
    eps = sign * 10.0 ** log_eps
    if ctx.unstable:
        raw = unstable_manifold_seed(ctx.model, ctx.H0, ctx.lam, eps, phase,
                                     floquet=ctx.floquet, source=ctx.source)
    else:
        raw = transverse_seed(ctx.source, eps, phase)
    return project_to_energy(ctx.model, ctx.lam, raw, ctx.H0)


def _evaluate(ctx: _SearchContext, phase: float, log_eps: float, sign: float) -> ShotResult:
    try:
        seed = _seed_for(ctx, phase, log_eps, sign)
        shot, _ = _shoot(ctx.model, ctx.lam, seed, ctx.config.horizon, ctx.target,
                         ctx.config.tail_fraction, ctx.config.target_phase_grid, ctx.integrator)
        return shot
    except KirchhoffLabError as e:
        logger.warning("Shot failed", phase=phase, log_eps=log_eps, sign=sign, error=str(e))
        return ShotResult(math.inf, math.nan, math.nan)


def _grid_job(args: Tuple[_SearchContext, float, float, float]) -> ShotResult:
    ctx, phase, log_eps, sign = args
    return _evaluate(ctx, phase, log_eps, sign)


@dataclass(frozen=True)
class SearchOutcome:
    """Result of :func:`search`; ``candidate`` is None when nothing was accepted."""
    candidate: Optional[HeteroclinicCandidate]
    report: SearchReport
    subthreshold: Optional[HeteroclinicCandidate] = None


def search(model: NonlinearityModel, H0: float, lam: float,
           config: Optional[SearchConfig] = None, seed: int = 0,
           integrator: Optional[IntegratorConfig] = None) -> SearchOutcome:
    """Hunt for a connection by shooting from the source mode's unstable manifold.

    Coarse grid over (phase, log ε, sign), then Nelder-Mead refinement from the
    best grid point and from ``random_starts`` seeded points. A candidate is
    assembled when the best distance is at most ``accept_defect`` and its decay
    fit is accepted.
    """
    config = config or SearchConfig()
    source = SimpleMode.build(model, H0)
    target = source.rescaled(lam)
    floquet = floquet_multipliers(model, H0, lam)
    seeding = "unstable-manifold" if floquet.unstable else "transverse-fallback"
    if not floquet.unstable:
        logger.warning("Source mode has no unstable direction; seeding along the transverse axis",
                       max_multiplier=floquet.max_modulus, lam=lam, H0=H0)
    ctx = _SearchContext(model, H0, lam, source, target, floquet, floquet.unstable,
                         config, integrator)

    lo, hi = (math.log10(x) for x in config.eps_range)
    phases = np.linspace(0.0, source.period_1, config.phase_grid, endpoint=False)
    log_eps = np.linspace(lo, hi, config.eps_grid) if config.eps_grid > 1 else np.array([hi])
    signs = (1.0, -1.0) if config.eps_signs == "both" else (1.0,)
    jobs = [(ctx, float(p), float(e), s) for s in signs for e in log_eps for p in phases]

    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            shots = list(pool.map(_grid_job, jobs))
    else:
        shots = [_grid_job(job) for job in jobs]
    evaluations = len(shots)
    best_index = int(np.argmin([s.distance for s in shots]))
    grid_best = shots[best_index]
    best_params = jobs[best_index][1:]
    best_shot = grid_best
    logger.info("Search grid finished", evaluations=evaluations,
                grid_best=grid_best.distance, seeding=seeding)

    def clamp(x: np.ndarray) -> Tuple[float, float]:
        return float(np.mod(x[0], source.period_1)), float(np.clip(x[1], lo, hi))

    rng = np.random.default_rng(seed)
    starts = [np.array(best_params[:2])]
    for _ in range(config.random_starts):
        starts.append(np.array([rng.uniform(0.0, source.period_1), rng.uniform(lo, hi)]))

    if config.optimizer_budget > 0:
        sign = best_params[2]
        cache: Dict[Tuple[float, float], ShotResult] = {}

        def objective(x: np.ndarray) -> float:
            key = clamp(x)
            if key not in cache:
                cache[key] = _evaluate(ctx, key[0], key[1], sign)
            return cache[key].distance

        for start in starts:
            simplex_scale = np.array([source.period_1 / max(config.phase_grid, 2),
                                      max((hi - lo) / max(config.eps_grid, 2), 0.1)])
            simplex = np.vstack([start, start + [simplex_scale[0], 0.0],
                                 start + [0.0, simplex_scale[1]]])
            minimize(objective, start, method="Nelder-Mead",
                     options={"maxfev": config.optimizer_budget, "initial_simplex": simplex,
                              "xatol": 1e-10, "fatol": 1e-14})
        evaluations += len(cache)
        for key, shot in sorted(cache.items()):
            if shot.distance < best_shot.distance:
                best_shot, best_params = shot, (key[0], key[1], sign)

    phase, log_e, sign = best_params
    eps = sign * 10.0 ** log_e
    found = best_shot.distance <= config.accept_defect
    report = dict(best_defect=float(best_shot.distance), accept_defect=config.accept_defect,
                  best_phase=float(phase), best_eps=float(eps),
                  best_time=float(best_shot.best_time), max_multiplier=floquet.max_modulus,
                  seeding=seeding, evaluations=evaluations,
                  grid_best_defect=float(grid_best.distance))

    candidate = subthreshold = None
    reason, fit_reasons = None, []
    if found or config.save_subthreshold:
        assembled = _assemble(ctx, phase, log_e, sign, best_shot,
                              {"phase": phase, "eps": eps, "random_seed": seed})
        if found and assembled.accepted:
            candidate = assembled
        else:
            subthreshold = assembled
            fit_reasons = list(assembled.fit_report.get("reasons", []))
            if found:
                reason = "decay fit rejected"
    if not found:
        reason = (f"best defect {best_shot.distance:.3e} above threshold "
                  f"{config.accept_defect:.1e}")
    logger.info("Search finished", found=candidate is not None, best_defect=best_shot.distance,
                evaluations=evaluations, reason=reason)
    return SearchOutcome(candidate=candidate,
                         report=SearchReport(found=candidate is not None, reason=reason,
                                             fit_reasons=fit_reasons, **report),
                         subthreshold=subthreshold)


def _transition_time(trajectory: Trajectory, lam: float, period: float) -> float:
    times = np.arange(trajectory.t_min, trajectory.t_max, period / 50.0)
    v, dv, w, dw = trajectory.state(times)
    e_v = dv * dv + v * v
    e_w = dw * dw + lam * lam * w * w
    share = e_w / np.maximum(e_v + e_w, np.finfo(float).tiny)
    hits = np.nonzero(share >= 0.5)[0]
    return float(times[hits[0]]) if hits.size else 0.0


def _assemble(ctx: _SearchContext, phase: float, log_eps: float, sign: float,
              shot: ShotResult, seed_info: Dict[str, Any]) -> HeteroclinicCandidate:
    seed = _seed_for(ctx, phase, log_eps, sign)
    end = shot.best_time if math.isfinite(shot.best_time) else ctx.config.horizon
    backward = integrate(ctx.model, ctx.lam, seed,
                         (0.0, -ctx.config.backward_periods * ctx.source.period_1), ctx.integrator)
    forward = integrate(ctx.model, ctx.lam, seed, (0.0, end), ctx.integrator)
    joined = Trajectory.join(backward, forward)
    origin = _transition_time(joined, ctx.lam, ctx.source.period_1)
    trajectory = joined.shifted(-origin)
    fit = fit_asymptotics(trajectory, ctx.source, ctx.target, ctx.lam)
    report = dict(fit.report)
    report["reasons"] = list(fit.reasons)
    seed_info = dict(seed_info, origin_shift=origin)
    accepted = fit.accepted and shot.distance <= ctx.config.accept_defect
    return HeteroclinicCandidate(
        trajectory=trajectory, model=ctx.model, H0=ctx.H0, lam=ctx.lam,
        source=ctx.source, target=ctx.target, tau0=fit.tau0, tau1=fit.tau1,
        A0=fit.A0, B0=fit.B0, A1=fit.A1, B1=fit.B1, defect=shot.distance,
        accepted=accepted, seed=seed_info, fit_report=report,
    )


# === Asymptotic fits ===

def fit_decay(times, values, period: float) -> DecayFit:
    """Fit D(t) ≤ B e^{-A|t|} using per-period peak envelopes.

    Args:
        times: Sample times (only |t| is used)
        values: Nonnegative samples of D
        period: Window length for the peak envelope

    Returns:
        DecayFit with A from the least-squares slope of log peaks and B raised
        so the envelope dominates every sample
    """
    dist = np.abs(np.asarray(times, dtype=float))
    vals = np.asarray(values, dtype=float)
    if vals.size == 0:
        return DecayFit(rate=math.nan, amplitude=math.nan, residual=math.nan, windows=0)
    windows = np.floor(dist / period).astype(int)
    peak_t, peak_v = [], []
    for index in np.unique(windows):
        mask = windows == index
        k = int(np.argmax(vals[mask]))
        if vals[mask][k] > NOISE_FLOOR:
            peak_t.append(dist[mask][k])
            peak_v.append(vals[mask][k])
    if not peak_t:
        return DecayFit(rate=math.inf, amplitude=float(np.max(vals)), residual=0.0,
                        windows=0, vanishing=True)
    if len(peak_t) < 2:
        return DecayFit(rate=math.nan, amplitude=float(peak_v[0]), residual=math.nan,
                        windows=1)
    peak_t, log_peak = np.asarray(peak_t), np.log(np.asarray(peak_v))
    slope, intercept = np.polyfit(peak_t, log_peak, 1)
    fitted = slope * peak_t + intercept
    rms = float(np.sqrt(np.mean((log_peak - fitted) ** 2)))
    rate = -float(slope)
    amplitude = _envelope_amplitude(dist, vals, rate, math.exp(intercept))
    return DecayFit(rate=rate, amplitude=amplitude, residual=rms, windows=len(peak_t))


def _envelope_amplitude(dist: np.ndarray, vals: np.ndarray, rate: float,
                        floor: float = 0.0) -> float:
    with np.errstate(over="ignore"):
        scaled = vals * np.exp(rate * dist)
    return float(max(floor, float(np.max(scaled)) if scaled.size else 0.0) * ENVELOPE_MARGIN)


def _best_phase(times: np.ndarray, states: np.ndarray, mode: SimpleMode, weight: float,
                component: int) -> Tuple[float, float]:
    """Phase τ minimising the mean deviation of one component from mode(t - τ)."""
    x, dx = states[component], states[component + 1]
    grid = np.linspace(0.0, mode.period, PHASE_GRID_FIT, endpoint=False)
    z, dz = mode.evaluate(times[:, None] - grid[None, :])
    scores = np.mean((dx[:, None] - dz) ** 2 + weight * (x[:, None] - z) ** 2, axis=0)
    j = int(np.argmin(scores))

    def score(tau: float) -> float:
        zz, dzz = mode.evaluate(times - tau)
        return float(np.mean((dx - dzz) ** 2 + weight * (x - zz) ** 2))

    width = mode.period / PHASE_GRID_FIT
    polished = minimize_scalar(score, bounds=(grid[j] - width, grid[j] + width),
                               method="bounded", options={"xatol": 1e-11})
    tau, value = float(grid[j]), float(scores[j])
    if polished.fun < value:
        tau, value = float(polished.x), float(polished.fun)
    return float(np.mod(tau, mode.period)), value


def _combine(fits: List[Tuple[DecayFit, np.ndarray, np.ndarray]]) -> Tuple[float, float]:
    rates = [f.rate for f, _, _ in fits if not f.vanishing]
    rate = min(rates) if rates else 1.0
    if not math.isfinite(rate):
        return rate, math.nan
    amplitude = max(_envelope_amplitude(d, v, rate) for _, d, v in fits)
    return rate, amplitude


def fit_asymptotics(trajectory: Trajectory, source: SimpleMode, target: SimpleMode,
                    lam: float) -> AsymptoticFit:
    """Fit (τ₀, τ₁, A₀, B₀, A₁, B₁) for a trajectory centred at t = 0.

    τ₀ (τ₁) minimises the mean deviation from the source (target) mode on the
    far half of the negative (positive) tail. Decay constants come from
    :func:`fit_decay`; each pair (A, B) is the slowest of its two rates with B
    enveloping both quantities.
    """
    reasons: List[str] = []
    report: Dict[str, float] = {}
    lam2 = lam * lam
    p0, p1 = source.period_1, target.period
    t_min, t_max = trajectory.t_min, trajectory.t_max

    neg_periods = max(0.0, -t_min) / p0
    pos_periods = max(0.0, t_max) / p1
    report["negative_tail_periods"] = neg_periods
    report["positive_tail_periods"] = pos_periods
    if neg_periods < 1.0 or pos_periods < 1.0:
        reasons.append("insufficient tail coverage")
        return AsymptoticFit(0.0, 0.0, math.nan, math.nan, math.nan, math.nan, False,
                             tuple(reasons), report)

    t_neg = np.linspace(t_min, 0.0, int(math.ceil(neg_periods * FIT_SAMPLES_PER_PERIOD)) + 1)
    t_pos = np.linspace(0.0, t_max, int(math.ceil(pos_periods * FIT_SAMPLES_PER_PERIOD)) + 1)
    s_neg = trajectory.state(t_neg)
    s_pos = trajectory.state(t_pos)

    far_neg = t_neg <= t_min + max(1.0, math.floor(0.5 * neg_periods)) * p0
    far_pos = t_pos >= t_max - max(1.0, math.floor(0.5 * pos_periods)) * p1
    tau0, dev0 = _best_phase(t_neg[far_neg], s_neg[:, far_neg], source, 1.0, 0)
    tau1, dev1 = _best_phase(t_pos[far_pos], s_pos[:, far_pos], target, lam2, 2)
    report["tau0_deviation"] = dev0
    report["tau1_deviation"] = dev1

    v, dv, w, dw = s_neg
    z, dz = source.evaluate(t_neg - tau0)
    d_w0 = dw * dw + lam2 * w * w
    d_v1 = (v - z) ** 2 + (dv - dz) ** 2
    v, dv, w, dw = s_pos
    z, dz = target.evaluate(t_pos - tau1)
    d_v0 = dv * dv + v * v
    d_w1 = (dw - dz) ** 2 + lam2 * (w - z) ** 2

    fit_w0 = fit_decay(t_neg, d_w0, p0)
    fit_v1 = fit_decay(t_neg, d_v1, p0)
    fit_v0 = fit_decay(t_pos, d_v0, p1)
    fit_w1 = fit_decay(t_pos, d_w1, p1)
    for name, fit in (("v_forward", fit_v0), ("w_backward", fit_w0),
                      ("source_limit", fit_v1), ("target_limit", fit_w1)):
        report[f"{name}_rate"] = fit.rate
        report[f"{name}_log_rms"] = fit.residual
        if not fit.vanishing and not (fit.rate > 0):
            reasons.append(f"nonpositive decay rate for {name}: {fit.rate:.3e}")

    dist_neg, dist_pos = np.abs(t_neg), np.abs(t_pos)
    A0, B0 = _combine([(fit_v0, dist_pos, d_v0), (fit_w0, dist_neg, d_w0)])
    A1, B1 = _combine([(fit_v1, dist_neg, d_v1), (fit_w1, dist_pos, d_w1)])
    accepted = not reasons and A0 > 0 and A1 > 0
    if reasons:
        logger.info("Asymptotic fit rejected", reasons=reasons)
    return AsymptoticFit(tau0=tau0, tau1=tau1, A0=A0, B0=B0, A1=A1, B1=B1,
                         accepted=accepted, reasons=tuple(reasons), report=report)


# === Verification ===

def _decay_ratio(times: np.ndarray, values: np.ndarray, rate: float, amplitude: float) -> float:
    if not (rate > 0 and amplitude > 0):
        return math.inf
    bound = amplitude * np.exp(-rate * np.abs(times))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bound > 0, values / bound, np.where(values > 0, np.inf, 0.0))
    return float(np.max(ratio)) if ratio.size else 0.0


def verify_candidate(candidate: HeteroclinicCandidate, tol: float = 1e-6,
                     samples: int = 1000, accept_defect: Optional[float] = None,
                     min_tail_periods: float = 2.0) -> VerificationReport:
    """Check the connection clauses on a candidate; never raises for failing checks."""
    traj = candidate.trajectory
    lam, lam2 = candidate.lam, candidate.lam ** 2
    source, target = candidate.source, candidate.target
    clauses: List[ClauseResult] = []

    clauses.append(ClauseResult.flag("non_triviality", candidate.nontriviality > 0,
                                     value=candidate.nontriviality, tolerance=0.0))

    neg_periods = max(0.0, -traj.t_min) / source.period_1
    pos_periods = max(0.0, traj.t_max) / target.period
    coverage = min(neg_periods, pos_periods)
    clauses.append(ClauseResult.flag(
        "tail_coverage", coverage >= min_tail_periods, value=coverage,
        tolerance=min_tail_periods,
        detail=f"negative {neg_periods:.2f} / positive {pos_periods:.2f} periods"))

    h = 1e-4
    times = np.linspace(traj.t_min + 3 * h, traj.t_max - 3 * h, samples)
    res = residual(candidate.model, lam, traj, times)
    worst = float(np.max(np.maximum(np.abs(res.r_v), np.abs(res.r_w))))
    clauses.append(ClauseResult.compare("residual", worst, tol))

    energies = np.asarray(traj.hamiltonian(times))
    drift = float(np.max(np.abs(energies - candidate.H0 ** 2)) / candidate.H0 ** 2)
    clauses.append(ClauseResult.compare("hamiltonian", drift, 1e-8))

    t_neg = times[times <= 0]
    t_pos = times[times >= 0]
    if t_neg.size and t_pos.size:
        v, dv, w, dw = traj.state(t_neg)
        z, dz = source.evaluate(t_neg - candidate.tau0)
        d_w0 = dw * dw + lam2 * w * w
        d_v1 = (v - z) ** 2 + (dv - dz) ** 2
        v, dv, w, dw = traj.state(t_pos)
        z, dz = target.evaluate(t_pos - candidate.tau1)
        d_v0 = dv * dv + v * v
        d_w1 = (dw - dz) ** 2 + lam2 * (w - z) ** 2
        checks = (
            ("decay_v_forward", t_pos, d_v0, candidate.A0, candidate.B0),
            ("decay_w_backward", t_neg, d_w0, candidate.A0, candidate.B0),
            ("limit_source", t_neg, d_v1, candidate.A1, candidate.B1),
            ("limit_target", t_pos, d_w1, candidate.A1, candidate.B1),
        )
        for name, t_vals, values, rate, amp in checks:
            ratio = _decay_ratio(t_vals, values, rate, amp)
            clauses.append(ClauseResult.compare(name, ratio, 1.0,
                                                detail="max of D(t) / (B e^{-A|t|})"))
    else:
        clauses.append(ClauseResult.flag("decay", False, detail="a tail is empty"))

    if accept_defect is not None:
        clauses.append(ClauseResult.compare("defect", candidate.defect, accept_defect))

    report = VerificationReport(subject="candidate", clauses=clauses,
                                context={"tol": tol, "samples": samples, "H0": candidate.H0,
                                         "lam": lam})
    for clause in report.clauses:
        telemetry.CLAUSE_STATUS.labels("candidate", clause.clause).set(
            1.0 if clause.status.value == "pass" else 0.0)
    logger.info("Candidate verified", status=report.status.value, failed=report.failed())
    return report


# === Serialization ===

def candidate_to_dict(candidate: HeteroclinicCandidate, dt: float = 0.01) -> Dict[str, Any]:
    """JSON-ready candidate with its trajectory sampled at a fixed step."""
    traj = candidate.trajectory
    count = int(math.floor((traj.t_max - traj.t_min) / dt)) + 1
    times = traj.t_min + dt * np.arange(count)
    if times[-1] < traj.t_max - 1e-12:
        times = np.append(times, traj.t_max)
    v, dv, w, dw = traj.state(times)
    return {
        "schema_version": SCHEMA_VERSION,
        "model": candidate.model.to_dict(),
        "H0": candidate.H0,
        "lam": candidate.lam,
        "seed": candidate.seed,
        "span": [traj.t_min, traj.t_max],
        "tau0": candidate.tau0,
        "tau1": candidate.tau1,
        "A0": candidate.A0,
        "B0": candidate.B0,
        "A1": candidate.A1,
        "B1": candidate.B1,
        "defect": None if math.isnan(candidate.defect) else candidate.defect,
        "accepted": candidate.accepted,
        "fit_report": candidate.fit_report,
        "dt": dt,
        "samples": {
            "t": times.tolist(),
            "v": v.tolist(),
            "dv": dv.tolist(),
            "w": w.tolist(),
            "dw": dw.tolist(),
        },
    }


def candidate_from_dict(payload: Dict[str, Any]) -> HeteroclinicCandidate:
    """Rebuild a candidate; the trajectory becomes a quintic Hermite interpolant."""
    version = payload.get("schema_version")
    if version != SCHEMA_VERSION:
        raise DomainError(f"unsupported candidate schema_version {version}")
    model = NonlinearityModel.from_dict(payload["model"])
    H0, lam = float(payload["H0"]), float(payload["lam"])
    samples = payload["samples"]
    states = np.vstack([samples[k] for k in ("v", "dv", "w", "dw")])
    trajectory = Trajectory.from_samples(model, lam, np.asarray(samples["t"]), states,
                                         reference_energy=H0 * H0)
    source = SimpleMode.build(model, H0)
    defect = payload.get("defect")
    return HeteroclinicCandidate(
        trajectory=trajectory, model=model, H0=H0, lam=lam, source=source,
        target=source.rescaled(lam), tau0=float(payload["tau0"]), tau1=float(payload["tau1"]),
        A0=float(payload["A0"]), B0=float(payload["B0"]),
        A1=float(payload["A1"]), B1=float(payload["B1"]),
        defect=math.nan if defect is None else float(defect),
        accepted=bool(payload.get("accepted", False)), seed=dict(payload.get("seed") or {}),
        fit_report=dict(payload.get("fit_report") or {}),
    )


def save_candidate(candidate: HeteroclinicCandidate, path: Union[str, Path],
                   dt: float = 0.01) -> Path:
    """Write the candidate JSON file."""
    from src.core.utils import write_json

    target = write_json(candidate_to_dict(candidate, dt), path)
    logger.info("Candidate saved", path=str(target), accepted=candidate.accepted)
    return target


def load_candidate(path: Union[str, Path]) -> HeteroclinicCandidate:
    """Read a candidate JSON file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise NumericalError(f"cannot read candidate {path}: {e}") from e
    return candidate_from_dict(payload)
