"""
``glue``: schedule, assemble and diagnose the blow-up solution.
"""

import math

import numpy as np
import pandas as pd
import structlog

from src.cli.commands.base import Artifacts, CommandContext, require_candidate, summarize
from src.core.blowup import (
    assemble,
    blowup_diagnostics,
    default_tail,
    direct_tail,
    forcing_profile,
    junction_check,
    make_schedule,
    residual_check,
    solution_frame,
)
from src.core.bridge import make_cutoff
from src.core.spectral import OperatorSpec, weight_from_spec
from src.core.utils import export_series, timed, write_json
from src.models.reports import ClauseResult, RunSummary, VerdictStatus, VerificationReport

logger = structlog.get_logger()

TAIL_TOL = 1e-9
JUNCTION_LAW_RTOL = 1e-10
INTERVAL_SLACK = 1e-12


def _schedule_report(schedule) -> VerificationReport:
    clauses = []
    worst = max(r.length - schedule.interval_bound(r.k) for r in schedule.records)
    if schedule.rule == "default":
        clauses.append(ClauseResult.compare("interval_lengths", worst, INTERVAL_SLACK,
                                            detail="max of (T_{k+1}-T_k) - length bound"))
        direct = direct_tail(schedule.K_max, schedule.lam, schedule.period_1, schedule.scale)
        closed = default_tail(schedule.K_max, schedule.lam, schedule.period_1, schedule.scale)
        clauses.append(ClauseResult.compare("tail_closed_form", abs(direct - closed), TAIL_TOL))
    else:
        clauses.append(ClauseResult.flag("weighted_gates", bool(schedule.gates.get("passed"))))
    return VerificationReport(subject="schedule", clauses=clauses,
                              context={"rule": schedule.rule, "K_max": schedule.K_max,
                                       "T_inf": schedule.T_inf})


def _blowup_report(diagnostics) -> VerificationReport:
    clauses = []
    for item in diagnostics:
        table = item.junctions
        sides = table[["measured_left", "measured_right"]].to_numpy()
        rel = float(np.nanmax(np.abs(sides - table[["exact"]].to_numpy())
                              / table[["exact"]].to_numpy()))
        clauses.append(ClauseResult.compare(f"junction_law_alpha_{item.alpha:g}", rel,
                                            JUNCTION_LAW_RTOL))
        inner = table["inner_next"].dropna().abs()
        clauses.append(ClauseResult.compare(f"orthogonal_velocities_alpha_{item.alpha:g}",
                                            float(inner.max()) if len(inner) else 0.0, 0.0))
    return VerificationReport(subject="blowup", clauses=clauses)


@timed("glue")
def run(ctx: CommandContext) -> RunSummary:
    """Write schedule.json, solution.csv, forcing.csv and verdicts.json."""
    config = ctx.config
    glue = config.glue
    candidate = require_candidate(ctx, allow_subthreshold=glue.allow_subthreshold)
    op = OperatorSpec(config.lam)
    artifacts = Artifacts()

    weight = weight_from_spec(glue.weight) if glue.weight is not None else None
    schedule = make_schedule(candidate, op, glue.K_max, rule=glue.rule, weight=weight,
                             scale=glue.scale)
    artifacts.add("schedule", write_json(schedule.to_dict(), ctx.path("schedule.json")))

    workers = max(glue.workers, ctx.workers)
    solution = assemble(candidate, schedule, make_cutoff(), config.integrator, workers)

    reports = [_schedule_report(schedule),
               junction_check(solution, tol=glue.junction_tol)]
    diagnostics = [blowup_diagnostics(solution, alpha, samples_per_interval=200)
                   for alpha in glue.alphas]
    reports.append(_blowup_report(diagnostics))

    forcing_rows, forcing_clauses = [], []
    for spec in glue.norms:
        norm_weight = weight_from_spec(spec)
        profile = forcing_profile(solution, norm_weight, glue.samples_per_interval)
        forcing_rows.append(profile.table.assign(weight=norm_weight.label))
        forcing_clauses.append(ClauseResult(
            clause=f"forcing_decay_{norm_weight.label}", status=profile.verdict,
            value=profile.ratio, tolerance=1e-3,
            detail=f"nonincreasing from peak: {profile.decreasing}; "
                   f"bound diverges: {profile.bound_diverges}"))
        within = profile.table["within_bound"].dropna()
        if len(within):
            forcing_clauses.append(ClauseResult.flag(
                f"forcing_bound_{norm_weight.label}", bool(within.all()),
                detail="per-interval sup against the bound curve"))
    reports.append(VerificationReport(subject="forcing", clauses=forcing_clauses))

    if glue.residual_samples > 0:
        reports.append(VerificationReport(
            subject="global_residual",
            clauses=[residual_check(solution, glue.residual_samples, seed=config.seed)]))

    frame = solution_frame(solution, glue.alphas, weight_from_spec(glue.norms[0]),
                           glue.samples_per_interval)
    artifacts.add("solution", export_series(frame, ctx.path("solution.csv")))
    forcing = pd.concat(forcing_rows, ignore_index=True) if forcing_rows else pd.DataFrame()
    artifacts.add("forcing", export_series(forcing, ctx.path("forcing.csv")))

    junction_tables = {f"alpha_{d.alpha:g}": d.junctions.to_dict(orient="records")
                       for d in diagnostics}
    payload = {
        "T_end": schedule.T_end,
        "T_inf": schedule.T_inf,
        "log_slopes": {f"alpha_{d.alpha:g}": d.log_slope for d in diagnostics},
        "expected_log_slopes": {f"alpha_{d.alpha:g}": 4.0 * d.alpha * math.log(config.lam)
                                for d in diagnostics},
        "junctions": junction_tables,
        "reports": [r.summary() for r in reports],
    }
    artifacts.add("verdicts", write_json(payload, ctx.path("verdicts.json")))
    logger.info("Glue finished", K_max=schedule.K_max, T_inf=schedule.T_inf,
                failed=[r.subject for r in reports if r.status == VerdictStatus.FAIL])
    return summarize("glue", reports, artifacts)
