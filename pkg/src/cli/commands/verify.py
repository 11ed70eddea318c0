"""
``verify``: oracle checks of the configured model, plus the candidate if one exists.

The oracles:
    - model invariants (m ≥ μ₁, M increasing, M ≥ μ₁σ, M(0) = 0)
    - period quadrature against a first-return integration
    - for constant m ≡ c: π₁ = 2π/√c and the closed-form sine solution
    - Hamiltonian drift of an unforced two-mode run
    - closed-form schedule tail against explicit summation
    - decay-fit recovery of a synthetic exponential rate
"""

import math

import numpy as np
import structlog

from src.cli.commands.base import Artifacts, CommandContext, model_from_config, summarize
from src.core.blowup import default_tail, direct_tail
from src.core.dynamics import integrate
from src.core.heteroclinic import fit_decay, load_candidate, verify_candidate
from src.core.nonlinearity import NonlinearityFamily, NonlinearityModel, check_model
from src.core.simple_modes import first_return_time, mode_period
from src.core.utils import timed, write_json
from src.models.config import RunConfig
from src.models.reports import ClauseResult, RunSummary, VerificationReport

logger = structlog.get_logger()

PERIOD_TOL = 1e-10
RETURN_TOL = 1e-8
SINE_TOL = 1e-9
DRIFT_TOL = 1e-9
TAIL_TOL = 1e-9
FIT_RTOL = 0.01
DRIFT_SPAN = 100.0
SYNTHETIC_RATE = 0.1


def model_report(model: NonlinearityModel, H0: float) -> VerificationReport:
    """Model invariants and the period oracles."""
    upper = min(model.sigma_cap, 10.0 * H0 * H0 / model.mu1)
    margins = check_model(model, np.linspace(0.0, upper, 2001))
    clauses = [ClauseResult.compare(name, max(0.0, -margin), 1e-12)
               for name, margin in margins.items()]

    period = mode_period(model, H0)
    returned = first_return_time(model, H0)
    clauses.append(ClauseResult.compare("period_vs_first_return",
                                        abs(period - returned) / period, RETURN_TOL))
    if model.family == NonlinearityFamily.CONSTANT:
        c = model.params[0]
        clauses.append(ClauseResult.compare("harmonic_period",
                                            abs(period - 2.0 * math.pi / math.sqrt(c)), PERIOD_TOL))
    return VerificationReport(subject="model", clauses=clauses,
                              context={"family": model.family.value, "H0": H0})


def dynamics_report(model: NonlinearityModel, config: RunConfig) -> VerificationReport:
    """Energy conservation and, for constant m, the closed-form solution."""
    H0, lam = config.H0, config.lam
    clauses = []
    if model.family == NonlinearityFamily.CONSTANT:
        c = model.params[0]
        root = math.sqrt(c)
        trajectory = integrate(model, lam, [0.0, H0, 0.0, 0.0], (0.0, 10.0), config.integrator)
        t = np.linspace(0.0, 10.0, 501)
        v, dv, w, dw = trajectory.state(t)
        error = max(float(np.max(np.abs(v - H0 * np.sin(root * t) / root))),
                    float(np.max(np.abs(dv - H0 * np.cos(root * t)))),
                    float(np.max(np.abs(w))), float(np.max(np.abs(dw))))
        clauses.append(ClauseResult.compare("harmonic_solution", error, SINE_TOL))

    angle = 0.3
    initial = [0.0, H0 * math.cos(angle), 0.0, H0 * math.sin(angle)]
    trajectory = integrate(model, lam, initial, (0.0, DRIFT_SPAN), config.integrator)
    clauses.append(ClauseResult.compare("hamiltonian_drift", trajectory.max_relative_drift,
                                        DRIFT_TOL, detail=f"span {DRIFT_SPAN:g}"))
    return VerificationReport(subject="dynamics", clauses=clauses,
                              context={"H0": H0, "lam": lam})


def pipeline_report(model: NonlinearityModel, config: RunConfig) -> VerificationReport:
    """Schedule tail and decay-fit oracles."""
    period_1 = mode_period(model, config.H0)
    K = config.glue.K_max
    closed = default_tail(K, config.lam, period_1, config.glue.scale)
    direct = direct_tail(K, config.lam, period_1, config.glue.scale)

    times = -np.arange(0.0, 20.0 * 2.0 * math.pi, 2.0 * math.pi / 200.0)
    values = np.exp(SYNTHETIC_RATE * times) * np.sin(times) ** 2
    fit = fit_decay(times, values, 2.0 * math.pi)
    clauses = [
        ClauseResult.compare("tail_closed_form", abs(closed - direct), TAIL_TOL),
        ClauseResult.compare("decay_fit_rate", abs(fit.rate - SYNTHETIC_RATE) / SYNTHETIC_RATE,
                             FIT_RTOL, detail=f"fitted {fit.rate:.6g}"),
    ]
    return VerificationReport(subject="pipeline", clauses=clauses,
                              context={"K_max": K, "closed": closed, "direct": direct})


@timed("verify")
def run(ctx: CommandContext) -> RunSummary:
    """Write verify.json."""
    config = ctx.config
    model = model_from_config(config)
    reports = [model_report(model, config.H0), dynamics_report(model, config),
               pipeline_report(model, config)]

    path = ctx.resolve_candidate()
    if path.is_file():
        candidate = load_candidate(path)
        reports.append(verify_candidate(candidate,
                                        accept_defect=config.search.accept_defect
                                        if candidate.accepted else None))
    else:
        logger.info("No candidate to verify", path=str(path))

    artifacts = Artifacts()
    payload = {"reports": [r.summary() for r in reports],
               "candidate": str(path) if path.is_file() else None}
    artifacts.add("verify", write_json(payload, ctx.path("verify.json")))
    return summarize("verify", reports, artifacts)
