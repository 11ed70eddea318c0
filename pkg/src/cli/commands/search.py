"""
``search``: shoot for a heteroclinic connection and export the candidate.

Finding nothing is a valid outcome (exit 0, ``found: false``); only an
accepted candidate that then fails its own checks counts as a verification
failure.
"""

import structlog

from src.cli.commands.base import (
    CANDIDATE_FILE,
    Artifacts,
    CommandContext,
    model_from_config,
    summarize,
)
from src.core.heteroclinic import save_candidate, search, verify_candidate
from src.core.utils import timed, write_json
from src.models.reports import RunSummary

logger = structlog.get_logger()


@timed("search")
def run(ctx: CommandContext) -> RunSummary:
    """Write search_result.json and candidate.json when something was kept."""
    config = ctx.config
    model = model_from_config(config)
    search_config = config.search
    if ctx.workers > search_config.workers:
        search_config = search_config.model_copy(update={"workers": ctx.workers})
    outcome = search(model, config.H0, config.lam, search_config, seed=config.search_seed,
                     integrator=config.integrator)
    artifacts = Artifacts()
    reports = []
    report = outcome.report

    kept = outcome.candidate or outcome.subthreshold
    if kept is not None:
        path = save_candidate(kept, ctx.path(CANDIDATE_FILE), dt=search_config.export_dt)
        artifacts.add("candidate", path)
        report = report.model_copy(update={"candidate_path": str(path)})
    elif ctx.path(CANDIDATE_FILE).is_file():
        # stale file from an earlier run must not feed bridge/glue
        ctx.path(CANDIDATE_FILE).unlink()
        logger.warning("Removed stale candidate", path=str(ctx.path(CANDIDATE_FILE)))
    if outcome.candidate is not None:
        reports.append(verify_candidate(outcome.candidate,
                                        accept_defect=search_config.accept_defect))

    payload = report.model_dump(mode="json")
    payload["candidate"] = "present" if outcome.candidate is not None else "absent"
    payload["subthreshold_saved"] = outcome.candidate is None and outcome.subthreshold is not None
    payload["verification"] = [r.summary() for r in reports]
    artifacts.add("search_result", write_json(payload, ctx.path("search_result.json")))

    message = None if report.found else f"candidate absent: {report.reason}"
    return summarize("search", reports, artifacts, message)
