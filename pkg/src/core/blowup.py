"""
Gluing rescaled bridges into a solution on [0, T_{K_max}] that passes
through the simple modes e_0, e_1, ... with u(T_k) = 0, u'(T_k) = H₀ e_k.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import structlog
from scipy.special import polygamma

from src.core import telemetry
from src.core.bridge import CutoffFunction, bridge_anchors, build_bridges, make_cutoff
from src.core.exceptions import (
    BridgeConstructionError,
    DomainError,
    KirchhoffLabError,
    ScheduleRejected,
)
from src.core.heteroclinic import HeteroclinicCandidate
from src.core.spectral import (
    OperatorSpec,
    RescaledBridge,
    SpectralVector,
    WeightFunction,
    fk_log_bound,
    norm_log_pair,
    rescale_bridge,
)
from src.models.config import IntegratorConfig
from src.models.reports import ClauseResult, VerdictStatus, VerificationReport

logger = structlog.get_logger()

GATE_TOLERANCE = 1e-6
GATE_MAX_TERMS = 2000
JUNCTION_EXCLUSION = 1e-3
FD_STEP = 1e-4


@dataclass(frozen=True)
class ScheduleRecord:
    """Bridge k lives on [T_k, T_{k+1}] with T_{k+1} = T_k + S_{1,k} + S_{2,k}."""
    k: int
    S_k: float
    S1k: float
    S2k: float
    T_k: float

    @property
    def length(self) -> float:
        return self.S1k + self.S2k


@dataclass(frozen=True)
class Schedule:
    """Bridge times T_0 < T_1 < ... < T_{K_max} and the T_∞ estimate."""
    lam: float
    period_1: float
    records: Tuple[ScheduleRecord, ...]
    T_end: float
    T_inf: float
    tail: float
    rule: str
    scale: float = 1.0
    gates: Dict[str, Any] = field(default_factory=dict)

    @property
    def K_max(self) -> int:
        return len(self.records)

    @property
    def times(self) -> np.ndarray:
        return np.array([r.T_k for r in self.records] + [self.T_end])

    def interval_bound(self, k: int) -> float:
        """4c/(k+1)² + π₁(λ^{-k} + λ^{-k-1}), the default-rule length bound."""
        return (4.0 * self.scale / (k + 1) ** 2
                + self.period_1 * (self.lam ** -k + self.lam ** (-k - 1)))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lam": self.lam,
            "period_1": self.period_1,
            "K_max": self.K_max,
            "rule": self.rule,
            "scale": self.scale,
            "records": [
                {"k": r.k, "S_k": r.S_k, "S1k": r.S1k, "S2k": r.S2k, "T_k": r.T_k,
                 "length": r.length, "length_bound": self.interval_bound(r.k)}
                for r in self.records
            ],
            "T_end": self.T_end,
            "T_inf": self.T_inf,
            "tail": self.tail,
            "gates": self.gates,
        }


def default_tail(K: int, lam: float, period_1: float, scale: float = 1.0) -> float:
    """Σ_{k≥K} [4c/(k+1)² + π₁(λ^{-k} + λ^{-k-1})] in closed form."""
    harmonic = 4.0 * scale * float(polygamma(1, K + 1))
    geometric = period_1 * (1.0 + 1.0 / lam) * lam ** -K / (1.0 - 1.0 / lam)
    return harmonic + geometric


def direct_tail(K: int, lam: float, period_1: float, scale: float = 1.0,
                terms: int = 1_000_000) -> float:
    """The same tail by explicit summation of ``terms`` terms.

    The remainder of Σ 1/j² past the summed block is added from its
    asymptotic expansion 1/n + 1/(2n²) + 1/(6n³); the geometric remainder is
    below double precision for any realistic ``terms``.
    """
    k = np.arange(K, K + terms, dtype=float)
    summed = math.fsum(4.0 * scale / (k + 1.0) ** 2)
    summed += math.fsum(period_1 * (lam ** -k + lam ** (-k - 1.0)))
    n = float(K + terms + 1)
    return summed + 4.0 * scale * (1.0 / n + 0.5 / n ** 2 + 1.0 / (6.0 * n ** 3))


def _weighted_scales(weight: WeightFunction, op: OperatorSpec, A2: float,
                     count: int) -> np.ndarray:
    k = np.arange(count)
    with np.errstate(over="ignore"):
        phi = np.asarray(weight(op.lam ** (2.0 * k + 2.0)), dtype=float)
        weighted = (2.0 / A2) * phi / op.lam ** k
    return np.maximum(weighted, 1.0 / (k + 1.0) ** 2)


def _gate_terms(op: OperatorSpec) -> int:
    # λ^{2k+2} must stay finite
    limit = int(math.log(np.finfo(float).max) / math.log(op.lam) / 2.0) - 2
    return max(4, min(GATE_MAX_TERMS, limit))


def weighted_gates(weight: WeightFunction, op: OperatorSpec, A2: float,
                   scale: float = 1.0) -> Dict[str, Any]:
    """Numerical checks that the weighted S_k still give a convergent schedule.

    cauchy: the excess of S_k over the default 1/(k+1)² has a power-law tail
    with exponent above 1 (or vanishes) and its last term is at most 1e-6.
    divergence: g_k = φ(λ^{2k+2}) - A₂ λ^k S_k is nonincreasing over the last
    half of the range and ends below g_0.
    """
    count = _gate_terms(op)
    S = scale * _weighted_scales(weight, op, A2, count)
    k = np.arange(count)
    excess = S - scale / (k + 1.0) ** 2
    half = k >= count // 2
    positive = half & (excess > 0)
    if np.count_nonzero(positive) >= 2:
        slope = float(np.polyfit(np.log(k[positive] + 1.0), np.log(excess[positive]), 1)[0])
        exponent = -slope
    else:
        exponent = math.inf
    cauchy = exponent > 1.0 and float(excess[-1]) <= GATE_TOLERANCE
    with np.errstate(over="ignore", invalid="ignore"):
        g = np.asarray(weight(op.lam ** (2.0 * k + 2.0)), dtype=float) - A2 * op.lam ** k * S
    tail_g = g[half]
    finite = np.all(np.isfinite(tail_g))
    divergence = bool(finite and np.all(np.diff(tail_g) <= 0) and tail_g[-1] < g[0])
    weight_report = weight.validate()
    return {
        "terms": count,
        "excess_exponent": exponent,
        "last_excess": float(excess[-1]),
        "cauchy": bool(cauchy),
        "g_first": float(g[0]),
        "g_last": float(g[-1]),
        "divergence": divergence,
        "weight_valid": weight_report.passed,
        "weight_failed": weight_report.failed(),
        "passed": bool(cauchy and divergence and weight_report.passed),
    }


def _schedule_A2(candidate: HeteroclinicCandidate) -> float:
    A2 = min(candidate.A0, candidate.A1)
    if not (math.isfinite(A2) and A2 > 0):
        raise DomainError(f"candidate has no positive decay rates (A0={candidate.A0}, A1={candidate.A1})")
    return A2


def schedule_from_records(candidate: HeteroclinicCandidate, op: OperatorSpec,
                          records: Sequence[Tuple[float, float, float]], rule: str = "default",
                          scale: float = 1.0, tail: Optional[float] = None,
                          gates: Optional[Dict[str, Any]] = None) -> Schedule:
    """Schedule from explicit (S_k, S_{1,k}, S_{2,k}) triples."""
    if not records:
        raise DomainError("a schedule needs at least one bridge")
    period_1 = candidate.source.period_1
    T, built = 0.0, []
    for k, (S_k, S1k, S2k) in enumerate(records):
        if not (S1k > 0 and S2k > 0):
            raise DomainError(f"anchor times must be positive at k={k}")
        built.append(ScheduleRecord(k=k, S_k=float(S_k), S1k=float(S1k), S2k=float(S2k), T_k=T))
        T = T + S1k + S2k
    K = len(built)
    tail = default_tail(K, op.lam, period_1, scale) if tail is None else tail
    return Schedule(lam=op.lam, period_1=period_1, records=tuple(built), T_end=T,
                    T_inf=T + tail, tail=tail, rule=rule, scale=scale, gates=dict(gates or {}))


def make_schedule(candidate: HeteroclinicCandidate, op: OperatorSpec, K_max: int,
                  rule: str = "default", weight: Optional[WeightFunction] = None,
                  scale: float = 1.0) -> Schedule:
    """Choose S_k, take the anchors of the bridge at scale λ^k S_k, and accumulate T_k.

    Default rule: S_k = c/(k+1)². Weighted rule:
    S_k = c·max{(2/A₂) φ(λ^{2k+2}) / λ^k, 1/(k+1)²}, accepted only when
    :func:`weighted_gates` pass.

    Raises:
        DomainError: On bad arguments
        ScheduleRejected: When a weighted-rule gate fails
    """
    if K_max < 1:
        raise DomainError("K_max ≥ 1 required")
    if abs(op.lam - candidate.lam) > 0:
        raise DomainError(f"operator λ={op.lam} differs from candidate λ={candidate.lam}")
    period_1 = candidate.source.period_1
    k = np.arange(K_max)
    gates: Dict[str, Any] = {}
    if rule == "default":
        S_values = scale / (k + 1.0) ** 2
        tail = default_tail(K_max, op.lam, period_1, scale)
    elif rule == "weighted":
        if weight is None:
            raise DomainError("the weighted rule needs a weight")
        A2 = _schedule_A2(candidate)
        gates = weighted_gates(weight, op, A2, scale)
        if not gates["passed"]:
            logger.error("Weighted schedule rejected", **{k_: v for k_, v in gates.items()
                                                           if k_ != "weight_failed"})
            raise ScheduleRejected("weighted S_k rule failed its convergence gates", gates)
        count = gates["terms"]
        all_S = scale * _weighted_scales(weight, op, A2, count)
        S_values = all_S[:K_max]
        ks = np.arange(K_max, count)
        tail = float(np.sum(4.0 * all_S[K_max:]
                            + period_1 * (op.lam ** -ks + op.lam ** (-ks - 1.0))))
        gates["tail_truncated_at"] = count
    else:
        raise DomainError(f"unknown S_k rule {rule}")

    records = []
    for index, S_k in enumerate(S_values):
        lam_k = op.lam_k(index)
        S1, S2 = bridge_anchors(candidate, lam_k * float(S_k))
        records.append((float(S_k), S1 / lam_k, S2 / lam_k))
    schedule = schedule_from_records(candidate, op, records, rule=rule, scale=scale,
                                     tail=tail, gates=gates)
    logger.info("Schedule built", rule=rule, K_max=K_max, T_end=schedule.T_end,
                T_inf=schedule.T_inf, scale=scale)
    return schedule


@dataclass(frozen=True, eq=False)
class GluedSolution:
    """u(t) = u_k(t - T_k - S_{1,k}) and f(t) = f_k(t - T_k - S_{1,k}) on [T_k, T_{k+1}].

    Every value, junctions included, is read from a piece: T_k belongs to
    piece k and T_{K_max} to the last piece.
    """
    schedule: Schedule
    candidate: HeteroclinicCandidate
    pieces: Tuple[RescaledBridge, ...]
    op: OperatorSpec

    @property
    def H0(self) -> float:
        return self.candidate.H0

    @property
    def T_end(self) -> float:
        return self.schedule.T_end

    def piece_index(self, t) -> np.ndarray:
        T = self.schedule.times
        index = np.searchsorted(T, np.asarray(t, dtype=float), side="right") - 1
        return np.clip(index, 0, self.schedule.K_max - 1)

    def local_time(self, k: int, t):
        record = self.schedule.records[k]
        return np.asarray(t, dtype=float) - record.T_k - record.S1k

    def coefficients(self, t) -> Tuple[np.ndarray, np.ndarray]:
        """(k, rows) with rows (u_k, u_k', u_{k+1}, u_{k+1}') at each t in [0, T_end]."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t < 0) or np.any(t > self.T_end):
            raise DomainError(f"t outside [0, {self.T_end}]")
        index = self.piece_index(t)
        rows = np.empty((4, t.size))
        for k in np.unique(index):
            mask = index == k
            rows[:, mask] = self.pieces[k].coefficients(self.local_time(int(k), t[mask]))
        return index, rows

    def _vector(self, t: float, row_a: int, row_b: int) -> SpectralVector:
        index, rows = self.coefficients(float(t))
        k = int(index[0])
        return SpectralVector.from_mapping({k: rows[row_a, 0], k + 1: rows[row_b, 0]})

    def u(self, t: float) -> SpectralVector:
        return self._vector(t, 0, 2)

    def du(self, t: float) -> SpectralVector:
        return self._vector(t, 1, 3)

    def forcing_coefficients(self, t) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(k, f_k, f_{k+1}); zero from T_end on."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t < 0):
            raise DomainError("t < 0")
        index = self.piece_index(t)
        fa, fb = np.zeros(t.size), np.zeros(t.size)
        inside = t < self.T_end
        for k in np.unique(index[inside]):
            mask = inside & (index == k)
            a, b = self.pieces[k].forcing_coefficients(self.local_time(int(k), t[mask]))
            fa[mask], fb[mask] = a, b
        return index, fa, fb

    def f(self, t: float) -> SpectralVector:
        index, fa, fb = self.forcing_coefficients(float(t))
        k = int(index[0])
        return SpectralVector.from_mapping({k: fa[0], k + 1: fb[0]})


def junction_states(solution: GluedSolution) -> List[Dict[str, Any]]:
    """Exact states (u, u') = (0, H₀ e_k) at each T_k from the anchor identities."""
    return [{"k": k, "T_k": float(T), "u": SpectralVector.zero(),
             "du": SpectralVector.basis(k, solution.H0)}
            for k, T in enumerate(solution.schedule.times)]


def junction_velocities(solution: GluedSolution) -> List[Dict[str, Any]]:
    """One-sided u'(T_k) read from the pieces.

    ``left`` comes from piece k-1 at its anchor S_{2,k-1}, ``right`` from
    piece k at -S_{1,k}; each is None where no piece exists on that side.
    """
    K = solution.schedule.K_max
    out = []
    for j, T_j in enumerate(solution.schedule.times):
        left = right = None
        if j > 0:
            piece = solution.pieces[j - 1]
            rows = piece.coefficients(solution.schedule.records[j - 1].S2k)
            left = SpectralVector.from_mapping({j - 1: float(rows[1]), j: float(rows[3])})
        if j < K:
            piece = solution.pieces[j]
            rows = piece.coefficients(-solution.schedule.records[j].S1k)
            right = SpectralVector.from_mapping({j: float(rows[1]), j + 1: float(rows[3])})
        out.append({"k": j, "T_k": float(T_j), "left": left, "right": right,
                    "du": right if right is not None else left})
    return out


def assemble(candidate: HeteroclinicCandidate, schedule: Schedule,
             cutoff: Optional[CutoffFunction] = None,
             integrator: Optional[IntegratorConfig] = None, workers: int = 1) -> GluedSolution:
    """Build and rescale the bridges of every scheduled interval.

    Raises:
        BridgeConstructionError: Carrying the index of the failed bridge
    """
    cutoff = cutoff or make_cutoff()
    op = OperatorSpec(schedule.lam)
    scales = [op.lam_k(r.k) * r.S_k for r in schedule.records]
    try:
        profiles = build_bridges(candidate, scales, cutoff, integrator, workers)
    except KirchhoffLabError as e:
        failed = _first_failure(candidate, scales, cutoff, integrator)
        raise BridgeConstructionError(failed, str(e), {"scales": scales}) from e
    pieces = tuple(rescale_bridge(p, r.k, r.S_k, op) for p, r in zip(profiles, schedule.records))
    logger.info("Solution assembled", K_max=schedule.K_max, T_end=schedule.T_end)
    return GluedSolution(schedule=schedule, candidate=candidate, pieces=pieces, op=op)


def _first_failure(candidate, scales, cutoff, integrator) -> int:
    for k, S in enumerate(scales):
        try:
            build_bridges(candidate, [S], cutoff, integrator)
        except KirchhoffLabError:
            return k
    return -1


def _piece_state(piece: RescaledBridge, local: float, h: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(u, u', u'') coefficient pairs of one piece, u'' by central differences."""
    rows = piece.coefficients(local)
    plus = piece.coefficients(local + h)
    minus = piece.coefficients(local - h)
    ddu = (plus[[1, 3]] - minus[[1, 3]]) / (2.0 * h)
    return rows[[0, 2]], rows[[1, 3]], ddu


def _full(k: int, pair: np.ndarray, size: int) -> np.ndarray:
    out = np.zeros(size)
    out[k:k + 2] = pair
    return out


def junction_check(solution: GluedSolution, tol: float = 1e-7,
                   second_tol: float = 1e-6) -> VerificationReport:
    """Compare one-sided limits of u, u', u'' at every T_k with the anchor states.

    Interior junctions compare the pieces on both sides; T_0 and T_{K_max}
    compare the only adjacent piece with (0, H₀ e_k). Second derivatives are
    also checked to vanish.
    """
    K = solution.schedule.K_max
    size = K + 2
    H0 = solution.H0
    clauses: List[ClauseResult] = []
    for j, record_T in enumerate(solution.schedule.times):
        exact_u = np.zeros(size)
        exact_du = np.zeros(size)
        exact_du[j] = H0
        sides = []
        if j > 0:
            piece = solution.pieces[j - 1]
            h = FD_STEP / piece.lam_k
            u, du, ddu = _piece_state(piece, solution.schedule.records[j - 1].S2k, h)
            sides.append((_full(j - 1, u, size), _full(j - 1, du, size), _full(j - 1, ddu, size)))
        if j < K:
            piece = solution.pieces[j]
            h = FD_STEP / piece.lam_k
            u, du, ddu = _piece_state(piece, -solution.schedule.records[j].S1k, h)
            sides.append((_full(j, u, size), _full(j, du, size), _full(j, ddu, size)))
        state_gap = max(max(np.max(np.abs(u - exact_u)), np.max(np.abs(du - exact_du)))
                        for u, du, _ in sides)
        if len(sides) == 2:
            state_gap = max(state_gap, float(np.max(np.abs(sides[0][0] - sides[1][0]))),
                            float(np.max(np.abs(sides[0][1] - sides[1][1]))))
        second = max(float(np.max(np.abs(ddu))) for _, _, ddu in sides)
        clauses.append(ClauseResult.compare(f"junction_{j}", float(state_gap), tol,
                                            detail=f"T_{j}={record_T:.15g}"))
        clauses.append(ClauseResult.compare(
            f"junction_{j}_second", second, second_tol,
            detail=f"|u''| absolute; λ^k-scaled {second / solution.op.lam_k(max(j - 1, 0)):.3g}"))
    report = VerificationReport(subject="junctions", clauses=clauses,
                                context={"tol": tol, "second_tol": second_tol, "K_max": K})
    for clause in report.clauses:
        telemetry.CLAUSE_STATUS.labels("junctions", clause.clause).set(
            1.0 if clause.status == VerdictStatus.PASS else 0.0)
    logger.info("Junctions checked", status=report.status.value, failed=report.failed())
    return report


@dataclass(frozen=True)
class BlowupDiagnostics:
    """Energy series at sample times plus the exact junction law."""
    alpha: float
    series: pd.DataFrame
    junctions: pd.DataFrame
    log_slope: float


def energy_quantity(solution: GluedSolution, alpha: float, t) -> Tuple[np.ndarray, np.ndarray]:
    """(k, |A^α u'(t)|² + |A^{α+1/2} u(t)|²)."""
    index, rows = solution.coefficients(t)
    lam = solution.op.lam
    k = index.astype(float)
    first = lam ** (4 * k * alpha) * (rows[1] ** 2 + lam ** (2 * k) * rows[0] ** 2)
    second = lam ** (4 * (k + 1) * alpha) * (rows[3] ** 2 + lam ** (2 * (k + 1)) * rows[2] ** 2)
    return index, first + second


def blowup_diagnostics(solution: GluedSolution, alpha: float,
                       times: Optional[Sequence[float]] = None,
                       samples_per_interval: int = 200) -> BlowupDiagnostics:
    """|A^α u'|² + |A^{α+1/2}u|² on samples, and the junction law.

    ``measured`` is |A^α u'(T_k)|² with u'(T_k) read from the adjacent piece
    (piece k, or the last piece at T_{K_max}); ``measured_left`` and
    ``measured_right`` keep both one-sided values. ``exact`` is H₀²λ^{4kα}.
    ``inner_next`` is ⟨u'(T_k), u'(T_{k+1})⟩ from the measured velocities.
    """
    if not alpha > 0:
        raise DomainError("α > 0 required")
    if times is None:
        T = solution.schedule.times
        times = np.concatenate([np.linspace(T[k], T[k + 1], samples_per_interval, endpoint=False)
                                for k in range(len(T) - 1)] + [T[-1:]])
    times = np.asarray(times, dtype=float)
    index, values = energy_quantity(solution, alpha, times)
    series = pd.DataFrame({"t": times, "k": index, "energy": values})

    op, H0 = solution.op, solution.H0
    states = junction_velocities(solution)

    def energy(vec: Optional[SpectralVector]) -> float:
        return apply_power_norm_sq(vec, op, alpha) if vec is not None else math.nan

    rows = []
    for j, state in enumerate(states):
        du = state["du"]
        inner = du.dot(states[j + 1]["du"]) if j + 1 < len(states) else math.nan
        rows.append({"k": j, "T_k": state["T_k"], "measured": energy(du),
                     "measured_left": energy(state["left"]),
                     "measured_right": energy(state["right"]),
                     "exact": H0 ** 2 * op.lam ** (4 * j * alpha), "inner_next": inner})
    junctions = pd.DataFrame(rows, columns=["k", "T_k", "measured", "measured_left",
                                            "measured_right", "exact", "inner_next"])
    if len(junctions) > 1:
        log_slope = float(np.polyfit(junctions["k"], np.log(junctions["measured"]), 1)[0])
    else:
        log_slope = math.nan
    logger.info("Blow-up diagnostics", alpha=alpha, last_junction=float(junctions["measured"].iloc[-1]),
                log_slope=log_slope)
    return BlowupDiagnostics(alpha=alpha, series=series, junctions=junctions, log_slope=log_slope)


def apply_power_norm_sq(vec: SpectralVector, op: OperatorSpec, alpha: float) -> float:
    """|A^α vec|²."""
    return float(sum(c * c * op.lam ** (4 * k * alpha) for k, c in vec.entries))


@dataclass(frozen=True)
class ForcingProfile:
    """Per-interval sup of the weighted norm of f, the bound curve and the verdict."""
    table: pd.DataFrame
    decreasing: bool
    ratio: float
    bound_diverges: bool
    verdict: VerdictStatus


def forcing_profile(solution: GluedSolution, weight: WeightFunction,
                    samples_per_interval: int = 1000,
                    A2: Optional[float] = None, B2: Optional[float] = None) -> ForcingProfile:
    """sup over [T_k, T_{k+1}] of ||f(t)|| in the weighted norm, by dense sampling.

    f_k is supported where S_k < |t - T_k - S_{1,k}| < 2S_k, so the samples
    cover those two windows. PASS when the series is nonincreasing from its
    peak on and ends below 1e-3 times its first value.
    """
    op = solution.op
    first_profile = solution.pieces[0].profile
    A2 = first_profile.A2 if A2 is None else A2
    B2 = first_profile.B2 if B2 is None else B2
    half = max(samples_per_interval // 2, 2)
    rows = []
    for piece, record in zip(solution.pieces, solution.schedule.records):
        S_k = piece.S_k
        local = np.concatenate([np.linspace(-2.0 * S_k, -S_k, half),
                                np.linspace(S_k, 2.0 * S_k, half)])
        fa, fb = piece.forcing_coefficients(local)
        log_norm = norm_log_pair(record.k, fa, fb, op, weight)
        log_sup = float(np.max(log_norm))
        weight_exponent = float(weight(op.eigenvalue(record.k + 1)))
        if math.isfinite(A2) and math.isfinite(B2):
            log_bound = fk_log_bound(record.k, S_k, op, weight_exponent, A2, B2)
        else:
            log_bound = math.nan
        rows.append({"k": record.k, "T_k": record.T_k, "T_k1": record.T_k + record.length,
                     "S_k": S_k, "log_sup_norm": log_sup,
                     "sup_norm": math.exp(log_sup) if log_sup < 700 else math.inf,
                     "log_bound_sq": log_bound,
                     "within_bound": bool(2.0 * log_sup <= log_bound) if math.isfinite(log_bound)
                     else None})
    table = pd.DataFrame(rows)
    series = table["log_sup_norm"].to_numpy()
    finite = series[np.isfinite(series)]
    if finite.size >= 2:
        peak = int(np.argmax(series))
        decreasing = bool(peak < len(series) - 1 and np.all(np.diff(series[peak:]) <= 0))
        ratio = float(np.exp(series[-1] - series[0])) if np.isfinite(series[-1]) else 0.0
    else:
        decreasing, ratio = False, math.nan
    bounds = table["log_bound_sq"].to_numpy()
    bound_diverges = bool(np.all(np.isfinite(bounds)) and len(bounds) >= 2
                          and bounds[-1] > bounds[-2] and bounds[-1] > bounds[0])
    verdict = VerdictStatus.PASS if decreasing and ratio < 1e-3 else VerdictStatus.FAIL
    logger.info("Forcing profile", weight=weight.label, decreasing=decreasing, ratio=ratio,
                bound_diverges=bound_diverges, verdict=verdict.value)
    return ForcingProfile(table=table, decreasing=decreasing, ratio=ratio,
                          bound_diverges=bound_diverges, verdict=verdict)


def residual_check(solution: GluedSolution, samples: int = 1000, seed: int = 0,
                   tol: float = 1e-6) -> ClauseResult:
    """Finite-difference residual of u'' + m(|A^{1/2}u|²)Au - f at random times.

    Times within 1e-3 of a junction are skipped. The absolute residual is
    compared with ``tol``; the detail also names the worst piece and its
    residual divided by λ^k.
    """
    rng = np.random.default_rng(seed)
    T = solution.schedule.times
    times = np.sort(rng.uniform(0.0, solution.T_end, samples))
    near = np.min(np.abs(times[:, None] - T[None, :]), axis=1) < JUNCTION_EXCLUSION
    times = times[~near]
    index = solution.piece_index(times)
    worst, worst_k = 0.0, -1
    for k in np.unique(index):
        mask = index == k
        piece = solution.pieces[int(k)]
        res = float(np.max(np.abs(piece.residual(solution.local_time(int(k), times[mask])))))
        if res > worst:
            worst, worst_k = res, int(k)
    scaled = worst / solution.op.lam_k(worst_k) if worst_k >= 0 else 0.0
    return ClauseResult.compare("global_residual", worst, tol,
                                detail=f"{times.size} samples, seed {seed}; worst piece {worst_k}, "
                                       f"λ^k-scaled {scaled:.3g}")


def solution_frame(solution: GluedSolution, alphas: Sequence[float], weight: WeightFunction,
                   samples_per_interval: int = 1000) -> pd.DataFrame:
    """Table t, k, energy_alpha_<α> per α, forcing_norm."""
    T = solution.schedule.times
    times = np.concatenate([np.linspace(T[k], T[k + 1], samples_per_interval, endpoint=False)
                            for k in range(len(T) - 1)] + [T[-1:]])
    index, fa, fb = solution.forcing_coefficients(times)
    frame = pd.DataFrame({"t": times, "k": index})
    for alpha in alphas:
        frame[f"energy_alpha_{alpha:g}"] = energy_quantity(solution, alpha, times)[1]
    log_norm = np.array([norm_log_pair(int(k), a, b, solution.op, weight)
                         for k, a, b in zip(index, fa, fb)], dtype=float)
    with np.errstate(over="ignore"):
        frame["forcing_norm"] = np.exp(log_norm)
    return frame

