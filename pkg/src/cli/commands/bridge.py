"""
``bridge``: build and check the bridge profiles for every configured scale S.
"""

import structlog

from src.cli.commands.base import Artifacts, CommandContext, require_candidate, summarize
from src.core.bridge import bridge_frame, build_bridges, make_cutoff, sup_forcing, verify_bridge
from src.core.utils import export_series, timed, write_json
from src.models.reports import RunSummary

logger = structlog.get_logger()


@timed("bridge")
def run(ctx: CommandContext) -> RunSummary:
    """Write bridge_S<S>.csv per scale and bridge_verdicts.json.

    Any candidate is accepted here, including a sub-threshold one: the
    closed-form forcing must match the residual of the blend regardless.
    """
    config = ctx.config
    candidate = require_candidate(ctx, allow_subthreshold=True)
    cutoff = make_cutoff()
    profiles = build_bridges(candidate, config.bridge.S, cutoff, config.integrator, ctx.workers)
    artifacts = Artifacts()
    reports, rows = [], []
    for profile in profiles:
        report = verify_bridge(profile, config.bridge, config.integrator)
        reports.append(report)
        name = f"bridge_S{profile.S:g}.csv"
        artifacts.add(f"bridge_S{profile.S:g}",
                      export_series(bridge_frame(profile, config.bridge.samples), ctx.path(name)))
        bound = profile.bound_constants
        rows.append({
            "S": profile.S,
            "S1": profile.S1,
            "S2": profile.S2,
            "sup_forcing": sup_forcing(profile),
            "sup_bound": bound.sup_bound(profile.S) if bound else None,
            "A2": bound.A2 if bound else None,
            "B2": bound.B2 if bound else None,
            "status": report.status.value,
        })

    payload = {
        "candidate": str(ctx.resolve_candidate()),
        "accepted_candidate": candidate.accepted,
        "gamma": cutoff.gamma,
        "scales": rows,
        "reports": [r.summary() for r in reports],
    }
    artifacts.add("bridge_verdicts", write_json(payload, ctx.path("bridge_verdicts.json")))
    logger.info("Bridges written", scales=list(config.bridge.S),
                failed=[r.subject for r in reports if not r.passed])
    return summarize("bridge", reports, artifacts)
