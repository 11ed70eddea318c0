"""
Shared plumbing for the CLI subcommands.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import structlog

from src.core.exceptions import MissingCandidateError
from src.core.heteroclinic import HeteroclinicCandidate, load_candidate
from src.core.nonlinearity import NonlinearityModel, build_model
from src.models.config import RunConfig
from src.models.reports import RunSummary, VerdictStatus, VerificationReport

logger = structlog.get_logger()

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VERIFICATION_FAILED = 2

CANDIDATE_FILE = "candidate.json"


@dataclass(frozen=True)
class CommandContext:
    """Resolved inputs of one CLI invocation."""
    config: RunConfig
    output_dir: Path
    candidate_path: Optional[Path] = None
    workers: int = 1

    def path(self, name: str) -> Path:
        """Artifact path inside the output directory."""
        return self.output_dir / name

    def resolve_candidate(self) -> Path:
        """--candidate, then config candidate_path, then <output_dir>/candidate.json."""
        return (self.candidate_path or self.config.candidate_path
                or self.output_dir / CANDIDATE_FILE)


@dataclass
class Artifacts:
    """Files written by a command, keyed by role."""
    files: Dict[str, str] = field(default_factory=dict)

    def add(self, role: str, path: Path) -> Path:
        self.files[role] = str(path)
        return path


def model_from_config(config: RunConfig) -> NonlinearityModel:
    """Build the nonlinearity named in the run config."""
    block = config.nonlinearity
    return build_model(block.family, block.params, block.table_path)


def require_candidate(ctx: CommandContext, allow_subthreshold: bool = False) -> HeteroclinicCandidate:
    """Load the candidate file downstream commands depend on.

    Raises:
        MissingCandidateError: If the file is absent, or holds a rejected
            candidate while ``allow_subthreshold`` is off
    """
    path = ctx.resolve_candidate()
    if not Path(path).is_file():
        raise MissingCandidateError(f"missing candidate: {path} does not exist; run `search` first")
    candidate = load_candidate(path)
    if not candidate.accepted:
        if not allow_subthreshold:
            raise MissingCandidateError(
                f"missing candidate: {path} holds a sub-threshold candidate "
                "(set glue.allow_subthreshold to use it)")
        logger.warning("Using a sub-threshold candidate", path=str(path), defect=candidate.defect)
    return candidate


def summarize(command: str, reports: List[VerificationReport], artifacts: Artifacts,
              message: Optional[str] = None) -> RunSummary:
    """Fold report verdicts into the command status and exit code."""
    failed = [r.subject for r in reports if not r.passed]
    if failed:
        status, code = VerdictStatus.FAIL, EXIT_VERIFICATION_FAILED
        message = message or "verification failed: " + ", ".join(failed)
    elif any(r.status == VerdictStatus.WARN for r in reports):
        status, code = VerdictStatus.WARN, EXIT_OK
    else:
        status, code = VerdictStatus.PASS, EXIT_OK
    return RunSummary(command=command, status=status, exit_code=code, artifacts=artifacts.files,
                      reports=[r.summary() for r in reports], message=message)
