"""
``modes``: tabulate the source and target simple modes and their Floquet data.
"""

import numpy as np
import structlog

from src.cli.commands.base import Artifacts, CommandContext, model_from_config, summarize
from src.core.nonlinearity import effective_bounds
from src.core.simple_modes import (
    SimpleMode,
    first_return_time,
    floquet_multipliers,
    floquet_scan,
    sample_mode,
)
from src.core.utils import export_series, timed, write_json
from src.models.reports import ClauseResult, RunSummary, VerificationReport

logger = structlog.get_logger()

ENERGY_TOL = 1e-10
RETURN_TOL = 1e-8
DETERMINANT_TOL = 1e-8


@timed("modes")
def run(ctx: CommandContext) -> RunSummary:
    """Write mode_source.csv, mode_target.csv, floquet.json and, if configured, floquet_scan.csv."""
    config = ctx.config
    model = model_from_config(config)
    source = SimpleMode.build(model, config.H0)
    target = source.rescaled(config.lam)
    artifacts = Artifacts()

    periods, samples = config.modes.periods, config.modes.samples
    source_frame = sample_mode(source, periods, samples)
    target_frame = sample_mode(target, periods * config.lam, samples)
    artifacts.add("mode_source", export_series(source_frame, ctx.path("mode_source.csv")))
    artifacts.add("mode_target", export_series(target_frame, ctx.path("mode_target.csv")))

    floquet = floquet_multipliers(model, config.H0, config.lam)
    bounds = effective_bounds(model, config.H0)
    returned = first_return_time(model, config.H0)

    energy = max(float(np.max(np.abs(source_frame["energy_residual"]))),
                 float(np.max(np.abs(target_frame["energy_residual"]))))
    report = VerificationReport(
        subject="modes",
        clauses=[
            ClauseResult.compare("energy_residual", energy, ENERGY_TOL * max(1.0, config.H0 ** 2)),
            ClauseResult.compare("period_vs_first_return",
                                 abs(returned - source.period_1) / source.period_1, RETURN_TOL),
            ClauseResult.compare("monodromy_determinant", abs(floquet.determinant - 1.0),
                                 DETERMINANT_TOL),
        ],
        context={"H0": config.H0, "lam": config.lam, "family": model.family.value},
    )

    payload = {
        "family": model.family.value,
        "params": list(model.params),
        "H0": config.H0,
        "lam": config.lam,
        "period_1": source.period_1,
        "period_lam": target.period,
        "first_return_time": returned,
        "z_max_1": source.z_max_1,
        "multipliers": [[mu.real, mu.imag] for mu in floquet.multipliers],
        "max_modulus": floquet.max_modulus,
        "unstable": floquet.unstable,
        "determinant": floquet.determinant,
        "trace": float(np.trace(floquet.monodromy)),
        "bounds": {"H1": bounds.H1, "mu1": bounds.mu1, "mu2": bounds.mu2, "L": bounds.L,
                   "sigma_ball": bounds.sigma_ball, "sigma_reach": bounds.sigma_reach},
        "report": report.summary(),
    }
    artifacts.add("floquet", write_json(payload, ctx.path("floquet.json")))

    if config.modes.scan_range is not None:
        lo, hi = config.modes.scan_range
        lambdas = np.linspace(lo, hi, config.modes.scan_points)
        scan = floquet_scan(model, config.H0, lambdas, workers=ctx.workers)
        artifacts.add("floquet_scan", export_series(scan, ctx.path("floquet_scan.csv")))

    logger.info("Modes written", period_1=source.period_1, unstable=floquet.unstable,
                max_modulus=floquet.max_modulus)
    return summarize("modes", [report], artifacts)
