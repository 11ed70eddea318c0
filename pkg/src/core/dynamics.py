"""
Integration of the two-mode Kirchhoff system

    v'' + m(v² + λ²w²) v = φ(t)
    w'' + λ² m(v² + λ²w²) w = ψ(t)

with dense output and Hamiltonian monitoring. The unforced system conserves
H = v'² + w'² + M(v² + λ²w²).
"""

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import structlog
from scipy.integrate import DOP853, OdeSolution
from scipy.interpolate import BPoly

from src.core import telemetry
from src.core.exceptions import DomainError, NumericalError
from src.core.nonlinearity import NonlinearityModel
from src.models.config import IntegratorConfig

logger = structlog.get_logger()

Forcing = Callable[[float], Tuple[float, float]]

FD_STEP = 1e-4
SPAN_SLACK = 1e-12


@dataclass(frozen=True)
class PhaseState:
    """A point (v, v', w, w') of the two-mode phase space."""
    v: float
    dv: float
    w: float
    dw: float

    def __post_init__(self):
        if not np.all(np.isfinite([self.v, self.dv, self.w, self.dw])):
            raise DomainError(f"nonfinite phase state {self}")

    def as_array(self) -> np.ndarray:
        return np.array([self.v, self.dv, self.w, self.dw], dtype=float)

    @classmethod
    def from_array(cls, values: Iterable[float]) -> "PhaseState":
        v, dv, w, dw = (float(x) for x in values)
        return cls(v, dv, w, dw)


@dataclass(frozen=True)
class IntegratorStats:
    """Counters of one or several integrations."""
    steps: int = 0
    rejected: int = 0
    nfev: int = 0

    def __add__(self, other: "IntegratorStats") -> "IntegratorStats":
        return IntegratorStats(self.steps + other.steps, self.rejected + other.rejected,
                               self.nfev + other.nfev)


@dataclass(frozen=True, eq=False)
class TrajectorySegment:
    """One dense interpolant valid on [t_lo, t_hi]."""
    t_lo: float
    t_hi: float
    interpolant: Callable[[np.ndarray], np.ndarray]
    breakpoints: np.ndarray


class _Shifted:
    """Interpolant evaluated at t - shift."""

    def __init__(self, inner: Callable[[np.ndarray], np.ndarray], shift: float):
        self.inner = inner
        self.shift = shift

    def __call__(self, t):
        return self.inner(np.asarray(t, dtype=float) - self.shift)


class _HermiteInterpolant:
    """Quintic Hermite reconstruction of (v, v', w, w') from samples."""

    def __init__(self, t: np.ndarray, states: np.ndarray, second: np.ndarray):
        v_poly = BPoly.from_derivatives(t, np.column_stack([states[0], states[1], second[0]]))
        w_poly = BPoly.from_derivatives(t, np.column_stack([states[2], states[3], second[1]]))
        self.polys = (v_poly, v_poly.derivative(), w_poly, w_poly.derivative())

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.vstack([np.atleast_1d(p(t)) for p in self.polys])


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Dense numerical solution of the two-mode system.

    Attributes:
        model: Nonlinearity
        lam: Frequency ratio λ
        segments: Dense pieces covering the span in increasing time order
        stats: Integrator counters
        hamiltonian_times: Breakpoints where H was recorded
        hamiltonian_values: H at those breakpoints
        reference_energy: H at the initial point
        forced: Whether a forcing was applied (H not conserved)
        warnings: Attached warnings (e.g. excessive drift)
    """
    model: NonlinearityModel
    lam: float
    segments: Tuple[TrajectorySegment, ...]
    stats: IntegratorStats = field(default_factory=IntegratorStats)
    hamiltonian_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    hamiltonian_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    reference_energy: float = 0.0
    forced: bool = False
    warnings: Tuple[str, ...] = ()

    @property
    def t_min(self) -> float:
        return min(seg.t_lo for seg in self.segments)

    @property
    def t_max(self) -> float:
        return max(seg.t_hi for seg in self.segments)

    @property
    def breakpoints(self) -> np.ndarray:
        return np.unique(np.concatenate([seg.breakpoints for seg in self.segments]))

    @property
    def max_relative_drift(self) -> float:
        """Worst recorded |H - H_ref| / H_ref."""
        if self.hamiltonian_values.size == 0:
            return 0.0
        scale = abs(self.reference_energy) or 1.0
        return float(np.max(np.abs(self.hamiltonian_values - self.reference_energy)) / scale)

    def contains(self, t: float) -> bool:
        slack = SPAN_SLACK * max(1.0, abs(t))
        return self.t_min - slack <= t <= self.t_max + slack

    def state(self, t) -> np.ndarray:
        """Evaluate (v, v', w, w') at t; shape (4,) for scalar t, (4, n) otherwise.

        Raises:
            DomainError: If some t lies outside the span
        """
        t_arr = np.asarray(t, dtype=float)
        flat = np.atleast_1d(t_arr).ravel()
        out = np.empty((4, flat.size))
        assigned = np.zeros(flat.size, dtype=bool)
        slack = SPAN_SLACK * np.maximum(1.0, np.abs(flat))
        for seg in self.segments:
            mask = (~assigned) & (flat >= seg.t_lo - slack) & (flat <= seg.t_hi + slack)
            if np.any(mask):
                local = np.clip(flat[mask], seg.t_lo, seg.t_hi)
                out[:, mask] = np.asarray(seg.interpolant(local)).reshape(4, -1)
                assigned |= mask
        if not np.all(assigned):
            bad = flat[~assigned]
            raise DomainError(
                f"t={float(bad[0])} outside trajectory span [{self.t_min}, {self.t_max}]"
            )
        if t_arr.ndim == 0:
            return out[:, 0]
        return out.reshape((4,) + t_arr.shape)

    __call__ = state

    def hamiltonian(self, t) -> np.ndarray:
        return hamiltonian(self.model, self.lam, self.state(t))

    def shifted(self, dt: float) -> "Trajectory":
        """Same trajectory on the time axis t + dt."""
        segments = tuple(
            TrajectorySegment(seg.t_lo + dt, seg.t_hi + dt, _Shifted(seg.interpolant, dt),
                              seg.breakpoints + dt)
            for seg in self.segments
        )
        return Trajectory(self.model, self.lam, segments, self.stats,
                          self.hamiltonian_times + dt, self.hamiltonian_values,
                          self.reference_energy, self.forced, self.warnings)

    @classmethod
    def join(cls, *pieces: "Trajectory") -> "Trajectory":
        """Merge trajectories of the same system into one evaluator."""
        if not pieces:
            raise DomainError("nothing to join")
        first = pieces[0]
        segments = tuple(sorted((seg for p in pieces for seg in p.segments),
                                key=lambda seg: (seg.t_lo, seg.t_hi)))
        stats = sum((p.stats for p in pieces), IntegratorStats())
        times = np.concatenate([p.hamiltonian_times for p in pieces])
        values = np.concatenate([p.hamiltonian_values for p in pieces])
        order = np.argsort(times, kind="stable")
        warnings = tuple(w for p in pieces for w in p.warnings)
        return cls(first.model, first.lam, segments, stats, times[order], values[order],
                   first.reference_energy, any(p.forced for p in pieces), warnings)

    @classmethod
    def from_interpolant(cls, model: NonlinearityModel, lam: float,
                         interpolant: Callable[[np.ndarray], np.ndarray],
                         t_min: float, t_max: float,
                         breakpoints: Optional[np.ndarray] = None,
                         reference_energy: Optional[float] = None) -> "Trajectory":
        """Wrap an externally supplied evaluator of (v, v', w, w')."""
        if not t_max > t_min:
            raise DomainError("empty span")
        points = np.linspace(t_min, t_max, 201) if breakpoints is None else np.asarray(breakpoints)
        segment = TrajectorySegment(float(t_min), float(t_max), interpolant, points)
        values = hamiltonian(model, lam, np.asarray(interpolant(points)).reshape(4, -1))
        reference = float(values[0]) if reference_energy is None else float(reference_energy)
        return cls(model, float(lam), (segment,), IntegratorStats(), points, values, reference)

    @classmethod
    def from_samples(cls, model: NonlinearityModel, lam: float, t: np.ndarray,
                     states: np.ndarray,
                     reference_energy: Optional[float] = None) -> "Trajectory":
        """Quintic Hermite reconstruction using the ODE for the second derivatives."""
        t = np.asarray(t, dtype=float)
        states = np.asarray(states, dtype=float).reshape(4, -1)
        if t.size < 2 or np.any(np.diff(t) <= 0):
            raise DomainError("samples need strictly increasing times")
        sigma = states[0] ** 2 + lam * lam * states[2] ** 2
        m_values = model.m(sigma)
        second = np.vstack([-m_values * states[0], -lam * lam * m_values * states[2]])
        return cls.from_interpolant(model, lam, _HermiteInterpolant(t, states, second),
                                    float(t[0]), float(t[-1]), breakpoints=t,
                                    reference_energy=reference_energy)


def hamiltonian(model: NonlinearityModel, lam: float,
                state: Union[PhaseState, np.ndarray, Sequence[float]]) -> Union[float, np.ndarray]:
    """H = v'² + w'² + M(v² + λ²w²) for one state or a (4, n) array."""
    if isinstance(state, PhaseState):
        arr = state.as_array()
    else:
        arr = np.asarray(state, dtype=float)
    v, dv, w, dw = arr[0], arr[1], arr[2], arr[3]
    value = dv * dv + dw * dw + model.M(v * v + lam * lam * w * w)
    if np.ndim(value) == 0:
        return float(value)
    return value


def _make_rhs(model: NonlinearityModel, lam: float, forcing: Optional[Forcing]):
    lam2 = lam * lam
    counter = {"nfev": 0}

    def rhs(t, y):
        counter["nfev"] += 1
        v, dv, w, dw = y
        mval = float(model.m(v * v + lam2 * w * w))
        dy = np.array([dv, -mval * v, dw, -lam2 * mval * w])
        if forcing is not None:
            phi, psi = forcing(t)
            dy[1] += phi
            dy[3] += psi
        return dy

    return rhs, counter


def _solve(model: NonlinearityModel, lam: float, initial, t_span: Tuple[float, float],
           config: Optional[IntegratorConfig], forcing: Optional[Forcing]) -> Trajectory:
    config = config or IntegratorConfig()
    t0, t1 = (float(t_span[0]), float(t_span[1]))
    if t0 == t1 or not np.isfinite(t0) or not np.isfinite(t1):
        raise DomainError(f"degenerate time span {t_span}")
    y0 = initial.as_array() if isinstance(initial, PhaseState) else np.asarray(initial, dtype=float)
    PhaseState.from_array(y0)

    rhs, counter = _make_rhs(model, lam, forcing)
    solver = DOP853(rhs, t0, y0, t1, rtol=config.rtol, atol=config.atol,
                    max_step=config.max_step)
    per_attempt = getattr(solver, "n_stages", 12)
    times, states, interpolants = [t0], [y0.copy()], []
    steps = rejected = 0

    while solver.status == "running":
        if steps >= config.max_steps:
            raise NumericalError("integrator step budget exhausted", {
                "last_t": times[-1], "last_state": states[-1].tolist(), "steps": steps})
        nfev_before = solver.nfev
        message = solver.step()
        if solver.status == "failed":
            raise NumericalError(f"integrator failed: {message}", {
                "last_t": times[-1], "last_state": states[-1].tolist(), "steps": steps})
        if not np.all(np.isfinite(solver.y)):
            raise NumericalError("nonfinite state", {
                "last_t": times[-1], "last_state": states[-1].tolist(), "steps": steps})
        attempts = max(1, int(round((solver.nfev - nfev_before) / per_attempt)))
        rejected += attempts - 1
        steps += 1
        interpolants.append(solver.dense_output())
        times.append(solver.t)
        states.append(solver.y.copy())

    times_arr = np.asarray(times)
    state_arr = np.asarray(states).T
    energies = np.asarray(hamiltonian(model, lam, state_arr))
    reference = float(energies[0])
    stats = IntegratorStats(steps, rejected, counter["nfev"])
    telemetry.INTEGRATOR_STEPS.inc(steps)
    telemetry.INTEGRATOR_REJECTED.inc(rejected)
    telemetry.RHS_EVALUATIONS.inc(counter["nfev"])

    order = np.argsort(times_arr)
    segment = TrajectorySegment(min(t0, t1), max(t0, t1), OdeSolution(times_arr, interpolants),
                                times_arr[order])
    trajectory = Trajectory(model, float(lam), (segment,), stats, times_arr[order],
                            energies[order], reference, forcing is not None)

    if forcing is None:
        drift = trajectory.max_relative_drift
        telemetry.record_drift(drift)
        if drift > config.drift_tolerance:
            note = f"Hamiltonian drift {drift:.3e} exceeds {config.drift_tolerance:.1e}"
            logger.warning("Hamiltonian drift above tolerance", drift=drift,
                           tolerance=config.drift_tolerance, t_span=list(t_span))
            trajectory = Trajectory(model, float(lam), (segment,), stats, times_arr[order],
                                    energies[order], reference, False, (note,))
    logger.debug("Integration finished", t_span=list(t_span), steps=steps, rejected=rejected,
                 nfev=counter["nfev"], forced=forcing is not None)
    return trajectory


def integrate(model: NonlinearityModel, lam: float, initial, t_span: Tuple[float, float],
              config: Optional[IntegratorConfig] = None) -> Trajectory:
    """Integrate the unforced system over t_span (forward or backward).

    Args:
        model: Nonlinearity
        lam: Frequency ratio λ
        initial: PhaseState or array (v, v', w, w') at t_span[0]
        t_span: (t0, t1) with t0 != t1
        config: Integrator settings

    Returns:
        Trajectory with drift record; a warning is attached when the relative
        drift exceeds ``config.drift_tolerance``

    Raises:
        NumericalError: On step exhaustion or a nonfinite state
    """
    return _solve(model, lam, initial, t_span, config, None)


def forced_integrate(model: NonlinearityModel, lam: float, initial, forcing: Forcing,
                     t_span: Tuple[float, float],
                     config: Optional[IntegratorConfig] = None) -> Trajectory:
    """Integrate the system with forcing (φ(t), ψ(t)) added to v'' and w''."""
    return _solve(model, lam, initial, t_span, config, forcing)


def extend_trajectory(trajectory: Trajectory, t_lo: float, t_hi: float,
                      config: Optional[IntegratorConfig] = None) -> Trajectory:
    """Extend an unforced trajectory to cover [t_lo, t_hi] by integrating from its ends."""
    if trajectory.forced:
        raise DomainError("cannot extend a forced trajectory")
    pieces = [trajectory]
    if t_lo < trajectory.t_min:
        start = trajectory.t_min
        pieces.append(integrate(trajectory.model, trajectory.lam, trajectory.state(start),
                                (start, t_lo), config))
    if t_hi > trajectory.t_max:
        start = trajectory.t_max
        pieces.append(integrate(trajectory.model, trajectory.lam, trajectory.state(start),
                                (start, t_hi), config))
    if len(pieces) == 1:
        return trajectory
    logger.info("Trajectory extended", t_lo=t_lo, t_hi=t_hi,
                old_span=[trajectory.t_min, trajectory.t_max])
    return Trajectory.join(*pieces)


@dataclass(frozen=True)
class Residual:
    """Pointwise residual of the unforced equations."""
    r_v: np.ndarray
    r_w: np.ndarray
    one_sided: np.ndarray


def _second_derivatives(trajectory: Trajectory, t: np.ndarray, h: float):
    t_min, t_max = trajectory.t_min, trajectory.t_max
    central = (t - h >= t_min) & (t + h <= t_max)
    forward = ~central & (t + 2 * h <= t_max)
    backward = ~central & ~forward
    acc = np.empty((2, t.size))

    def deriv(times):
        return trajectory.state(times)[[1, 3]]

    if np.any(central):
        tc = t[central]
        acc[:, central] = (deriv(tc + h) - deriv(tc - h)) / (2 * h)
    if np.any(forward):
        tf = t[forward]
        acc[:, forward] = (-3 * deriv(tf) + 4 * deriv(tf + h) - deriv(tf + 2 * h)) / (2 * h)
    if np.any(backward):
        tb = t[backward]
        acc[:, backward] = (3 * deriv(tb) - 4 * deriv(tb - h) + deriv(tb - 2 * h)) / (2 * h)
    return acc, ~central


def residual(model: NonlinearityModel, lam: float, trajectory: Trajectory, t,
             h: float = FD_STEP) -> Residual:
    """v'' + m(σ)v and w'' + λ²m(σ)w with second derivatives from finite differences.

    Central differences of the dense v', w' output are used inside the span;
    within h of an end one-sided second-order formulas are used and flagged.
    """
    times = np.atleast_1d(np.asarray(t, dtype=float))
    acc, one_sided = _second_derivatives(trajectory, times, h)
    state = trajectory.state(times)
    v, w = state[0], state[2]
    m_values = model.m(v * v + lam * lam * w * w)
    r_v = acc[0] + m_values * v
    r_w = acc[1] + lam * lam * m_values * w
    if np.any(one_sided):
        logger.debug("Residual used one-sided differences", count=int(one_sided.sum()))
    return Residual(r_v=r_v, r_w=r_w, one_sided=one_sided)


def trajectory_frame(trajectory: Trajectory, times) -> pd.DataFrame:
    """CSV-ready table t, v, dv, w, dw, hamiltonian."""
    times = np.asarray(times, dtype=float)
    state = trajectory.state(times).reshape(4, -1)
    return pd.DataFrame({
        "t": times,
        "v": state[0],
        "dv": state[1],
        "w": state[2],
        "dw": state[3],
        "hamiltonian": np.asarray(hamiltonian(trajectory.model, trajectory.lam, state)),
    })
