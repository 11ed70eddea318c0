"""
Pydantic configuration models for the Kirchhoff blow-up lab.
"""

import math
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import structlog
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from ruamel.yaml import YAML
from ruamel.yaml.error import YAMLError

from src.core.exceptions import ConfigError
from src.core.nonlinearity import NonlinearityFamily

logger = structlog.get_logger()


class _Block(BaseModel):
    """Common settings: unknown keys are errors, values immutable."""
    model_config = ConfigDict(extra="forbid", frozen=True)


# === Numerical blocks ===

class IntegratorConfig(_Block):
    """Adaptive Runge-Kutta settings."""
    rtol: float = Field(1e-11, gt=0, description="Relative tolerance")
    atol: float = Field(1e-12, gt=0, description="Absolute tolerance")
    max_step: float = Field(math.inf, gt=0, description="Largest allowed step")
    max_steps: int = Field(1_000_000, gt=0, description="Step budget per integration")
    drift_tolerance: float = Field(1e-9, gt=0, description="Relative Hamiltonian drift before a warning")


class SearchConfig(_Block):
    """Heteroclinic shooting search settings."""
    eps_range: Tuple[float, float] = Field((1e-6, 1e-3), description="Seed displacement range")
    eps_grid: int = Field(4, ge=1, description="Log-spaced ε values per sign")
    eps_signs: Literal["both", "positive"] = Field("both", description="Seed branches")
    phase_grid: int = Field(16, ge=1, description="Source phases on the coarse grid")
    horizon: float = Field(60.0, gt=0, description="Forward shooting horizon")
    tail_fraction: float = Field(0.25, gt=0, le=1, description="Final share of the horizon scanned")
    target_phase_grid: int = Field(64, ge=4, description="Target phases per distance evaluation")
    optimizer_budget: int = Field(60, ge=0, description="Function evaluations per local refinement")
    random_starts: int = Field(2, ge=0, description="Extra seeded starting points for refinement")
    accept_defect: float = Field(1e-4, gt=0, description="Acceptance threshold δ_accept")
    backward_periods: float = Field(6.0, gt=0, description="Source periods integrated backward")
    export_dt: float = Field(0.01, gt=0, description="Sampling step of exported candidates")
    save_subthreshold: bool = Field(False, description="Also export the best rejected candidate")
    seed: Optional[int] = Field(None, description="Overrides the run seed")
    workers: int = Field(1, ge=1, description="Process pool size for grid evaluation")

    @field_validator("eps_range")
    @classmethod
    def validate_eps_range(cls, v):
        lo, hi = v
        if not 0 < lo <= hi:
            raise ValueError("eps_range must satisfy 0 < lo <= hi")
        return v


class NonlinearityConfig(_Block):
    """Choice of m."""
    family: NonlinearityFamily = Field(..., description="constant | affine | pohozaev | tabulated")
    params: List[float] = Field(default_factory=list, description="Family parameters")
    table_path: Optional[Path] = Field(None, description="CSV with σ, m(σ) columns")

    @model_validator(mode="after")
    def validate_table(self):
        if self.family == NonlinearityFamily.TABULATED:
            if self.table_path is None:
                raise ValueError("table_path is required for the tabulated family")
            if not Path(self.table_path).is_file():
                raise ValueError(f"table_path {self.table_path} does not exist")
        return self


class ModesConfig(_Block):
    """Output of the ``modes`` command."""
    periods: float = Field(2.0, gt=0)
    samples: int = Field(400, ge=2)
    scan_range: Optional[Tuple[float, float]] = Field(None, description="λ range for a Floquet scan")
    scan_points: int = Field(41, ge=2)

    @field_validator("scan_range")
    @classmethod
    def validate_scan_range(cls, v):
        if v is not None and not 1.0 <= v[0] <= v[1]:
            raise ValueError("scan_range must satisfy 1 <= lo <= hi")
        return v


class BridgeConfig(_Block):
    """Bridge construction and checks."""
    S: List[float] = Field(default_factory=lambda: [2.0, 4.0, 8.0], description="Half-transition scales")
    samples: int = Field(1000, ge=10)
    residual_tol: float = Field(1e-6, gt=0)
    reintegration_tol: float = Field(1e-7, gt=0)
    anchor_tol: float = Field(1e-9, gt=0)

    @field_validator("S")
    @classmethod
    def validate_scales(cls, v):
        if not v or any(s <= 0 for s in v):
            raise ValueError("S must be a nonempty list of positive reals")
        return v


class WeightSpec(_Block):
    """Norm weight: Gevrey (r, s), subexponential c√σ/log(e⁴+σ)², or zero."""
    kind: Literal["gevrey", "subexponential", "zero"] = "gevrey"
    r: float = Field(1.0, gt=0)
    s: float = Field(2.0, gt=0)
    c: float = Field(1.0, gt=0)


class GlueConfig(_Block):
    """Schedule, assembly and diagnostics."""
    K_max: int = Field(12, ge=1)
    rule: Literal["default", "weighted"] = "default"
    weight: Optional[WeightSpec] = None
    scale: float = Field(1.0, gt=0, description="Global S_k multiplier")
    alphas: List[float] = Field(default_factory=lambda: [0.5, 1.0])
    norms: List[WeightSpec] = Field(default_factory=lambda: [WeightSpec(kind="gevrey", r=1.0, s=2.0)])
    samples_per_interval: int = Field(1000, ge=10)
    junction_tol: float = Field(1e-7, gt=0)
    residual_samples: int = Field(1000, ge=0)
    allow_subthreshold: bool = False
    workers: int = Field(1, ge=1)

    @field_validator("alphas")
    @classmethod
    def validate_alphas(cls, v):
        if any(a <= 0 for a in v):
            raise ValueError("alphas must be positive")
        return v

    @model_validator(mode="after")
    def validate_weight(self):
        if self.rule == "weighted" and self.weight is None:
            raise ValueError("the weighted rule needs a weight block")
        return self


class RunConfig(_Block):
    """Complete run configuration."""
    nonlinearity: NonlinearityConfig
    H0: float = Field(..., gt=0, description="Energy level")
    lam: float = Field(..., description="Frequency ratio λ > 1")
    seed: int = Field(0, description="Random seed")
    output_dir: Path = Field(Path("output"), description="Artifact directory")
    candidate_path: Optional[Path] = Field(None, description="Candidate JSON for bridge/glue")
    integrator: IntegratorConfig = Field(default_factory=IntegratorConfig)
    modes: ModesConfig = Field(default_factory=ModesConfig)
    search: SearchConfig = Field(default_factory=SearchConfig)
    bridge: BridgeConfig = Field(default_factory=BridgeConfig)
    glue: GlueConfig = Field(default_factory=GlueConfig)

    @field_validator("lam")
    @classmethod
    def validate_lam(cls, v):
        if not v > 1.0:
            raise ValueError("λ>1 required")
        return v

    @property
    def search_seed(self) -> int:
        return self.search.seed if self.search.seed is not None else self.seed


def _resolve_paths(raw: Dict[str, Any], base: Path) -> Dict[str, Any]:
    data = dict(raw)
    block = data.get("nonlinearity")
    if isinstance(block, dict) and block.get("table_path"):
        path = Path(block["table_path"])
        data["nonlinearity"] = {**block, "table_path": path if path.is_absolute() else base / path}
    if data.get("candidate_path"):
        path = Path(data["candidate_path"])
        data["candidate_path"] = path if path.is_absolute() else base / path
    return data


def parse_config(raw: Dict[str, Any], base: Union[str, Path] = ".") -> RunConfig:
    """Validate a mapping into a RunConfig.

    Raises:
        ConfigError: Naming every offending key path
    """
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    try:
        return RunConfig.model_validate(_resolve_paths(raw, Path(base)))
    except ValidationError as e:
        paths, lines = [], []
        for err in e.errors():
            path = ".".join(str(part) for part in err["loc"]) or "<root>"
            paths.append(path)
            lines.append(f"{path}: {err['msg']}")
        raise ConfigError("invalid config: " + "; ".join(lines), paths) from e


def load_config(path: Union[str, Path]) -> RunConfig:
    """Read, default and validate a YAML run config.

    Args:
        path: Config file

    Returns:
        RunConfig
    """
    config_path = Path(path)
    try:
        with open(config_path, "r", encoding="utf-8") as fh:
            raw = YAML(typ="safe").load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {config_path}: {e}") from e
    except YAMLError as e:
        raise ConfigError(f"cannot parse config {config_path}: {e}") from e
    config = parse_config(raw or {}, config_path.parent)
    logger.info("Config loaded", path=str(config_path),
                family=config.nonlinearity.family.value, H0=config.H0, lam=config.lam)
    return config
