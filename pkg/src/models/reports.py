"""
Pydantic report models emitted by the verification operations and the CLI.
"""

from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class VerdictStatus(str, Enum):
    """Verdict options."""
    PASS = "pass"
    FAIL = "fail"
    WARN = "warn"


class ClauseResult(BaseModel):
    """One checked clause with the tolerance it was checked against."""
    clause: str = Field(..., description="Clause name")
    status: VerdictStatus = Field(..., description="Clause verdict")
    value: Optional[float] = Field(None, description="Worst measured value")
    tolerance: Optional[float] = Field(None, description="Tolerance the value was compared with")
    margin: Optional[float] = Field(None, description="tolerance - value; negative on failure")
    detail: Optional[str] = Field(None, description="Free text explanation")

    @classmethod
    def compare(cls, clause: str, value: float, tolerance: float,
                detail: Optional[str] = None) -> "ClauseResult":
        """PASS when value <= tolerance."""
        value = float(value)
        passed = value <= tolerance
        return cls(clause=clause, status=VerdictStatus.PASS if passed else VerdictStatus.FAIL,
                   value=value, tolerance=float(tolerance), margin=float(tolerance) - value,
                   detail=detail)

    @classmethod
    def flag(cls, clause: str, passed: bool, detail: Optional[str] = None,
             value: Optional[float] = None, tolerance: Optional[float] = None) -> "ClauseResult":
        """Boolean clause."""
        return cls(clause=clause, status=VerdictStatus.PASS if passed else VerdictStatus.FAIL,
                   value=value, tolerance=tolerance, detail=detail)


class VerificationReport(BaseModel):
    """Per-clause verdicts for one subject (candidate, bridge, schedule, ...)."""
    subject: str = Field(..., description="What was verified")
    clauses: List[ClauseResult] = Field(default_factory=list)
    context: Dict[str, Any] = Field(default_factory=dict, description="Parameters of the check")

    @property
    def status(self) -> VerdictStatus:
        if any(c.status == VerdictStatus.FAIL for c in self.clauses):
            return VerdictStatus.FAIL
        if any(c.status == VerdictStatus.WARN for c in self.clauses):
            return VerdictStatus.WARN
        return VerdictStatus.PASS

    @property
    def passed(self) -> bool:
        return self.status != VerdictStatus.FAIL

    def clause(self, name: str) -> ClauseResult:
        """Look up a clause by name."""
        for item in self.clauses:
            if item.clause == name:
                return item
        raise KeyError(name)

    def failed(self) -> List[str]:
        return [c.clause for c in self.clauses if c.status == VerdictStatus.FAIL]

    def summary(self) -> Dict[str, Any]:
        """JSON-ready dump including the aggregate status."""
        payload = self.model_dump(mode="json")
        payload["status"] = self.status.value
        return payload


class SearchReport(BaseModel):
    """Outcome of a heteroclinic search."""
    found: bool = Field(..., description="Whether a candidate was accepted")
    best_defect: float = Field(..., description="Smallest shooting distance found")
    accept_defect: float = Field(..., description="Acceptance threshold")
    best_phase: Optional[float] = None
    best_eps: Optional[float] = None
    best_time: Optional[float] = None
    max_multiplier: float = Field(..., description="Largest Floquet multiplier modulus of the source")
    seeding: str = Field(..., description="unstable-manifold | transverse-fallback")
    evaluations: int = Field(..., description="Shooting distance evaluations")
    grid_best_defect: Optional[float] = Field(None, description="Best distance on the coarse grid")
    reason: Optional[str] = Field(None, description="Why no candidate was accepted")
    fit_reasons: List[str] = Field(default_factory=list)
    candidate_path: Optional[str] = None


class RunSummary(BaseModel):
    """What a CLI command did."""
    command: str
    status: VerdictStatus
    exit_code: int
    artifacts: Dict[str, str] = Field(default_factory=dict)
    reports: List[Dict[str, Any]] = Field(default_factory=list)
    message: Optional[str] = None
