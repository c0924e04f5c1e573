from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from pairrank.config import SEED

METHOD_IDS = ("MLE", "KWPM", "KWPMs", "KWPR", "RMLE", "B", "WB")
DEFAULT_SAMPLE_SIZES = (1000, 5000, 10000, 50000, 100000)


class SolverOptions(BaseModel):
    model_config = ConfigDict(frozen=True)

    tol: float = Field(1e-10, gt=0)
    max_iter: int = Field(100, ge=1)
    theta_cap: float = Field(30.0, gt=0)
    strict: bool = False


class LassoOptions(BaseModel):
    model_config = ConfigDict(frozen=True)

    tol: float = Field(1e-6, gt=0)
    max_iter: int = Field(20000, ge=1)
    group_tol: float = Field(1e-6, gt=0)
    polish_every: int = Field(25, ge=1)


class GridSpec(BaseModel):
    """Fixed support grid for the mixing distribution."""

    model_config = ConfigDict(frozen=True)

    n_atoms: int = Field(301, ge=2)
    span: float = Field(3.0, ge=0)
    lo: Optional[float] = None
    hi: Optional[float] = None

    @model_validator(mode="after")
    def _check_bounds(self):
        if (self.lo is None) != (self.hi is None):
            raise ValueError("lo and hi must be given together")
        if self.lo is not None and not self.lo < self.hi:
            raise ValueError("lo must be below hi")
        return self


class NpmleOptions(BaseModel):
    model_config = ConfigDict(frozen=True)

    method: Literal["cnm", "em"] = "cnm"
    tol: float = Field(1e-6, gt=0)
    max_iter: int = Field(500, ge=1)
    em_max_iter: int = Field(100000, ge=1)


class PosteriorOptions(BaseModel):
    model_config = ConfigDict(frozen=True)

    bandwidth: Optional[float] = Field(None, gt=0)
    tie_rule: Literal["weak", "half"] = "weak"
    smoothed_prior: bool = False
    threads: int = Field(1, ge=1)


class AbilityLawSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["LogNormalShift", "DiracMixture"]
    shift: float = 2.0
    scale: float = Field(1.0, ge=0)
    atoms: List[float] = [4.0, 8.0]
    probs: List[float] = [0.8, 0.2]
    noise_sd: float = Field(1.0 / 3.0, ge=0)

    @model_validator(mode="after")
    def _check_mixture(self):
        if len(self.atoms) != len(self.probs):
            raise ValueError("atoms and probs differ in length")
        if abs(sum(self.probs) - 1.0) > 1e-9 or min(self.probs) < 0:
            raise ValueError("probs must be a probability vector")
        return self


class SimConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    p_plus_1: int = Field(100, ge=2)
    sample_sizes: List[int] = list(DEFAULT_SAMPLE_SIZES)
    replications: int = Field(100, ge=1)
    laws: List[AbilityLawSpec] = [
        AbilityLawSpec(kind="LogNormalShift"),
        AbilityLawSpec(kind="DiracMixture"),
    ]
    designs: List[Literal["RS", "LS"]] = ["RS", "LS"]
    methods: List[str] = list(METHOD_IDS)
    ls_window: int = Field(5, ge=1)
    rmle_grid_size: int = Field(11, ge=2)
    seed: int = SEED
    threads: int = Field(1, ge=1)

    @field_validator("sample_sizes")
    @classmethod
    def _positive_sizes(cls, v: List[int]) -> List[int]:
        if not v or min(v) < 1:
            raise ValueError("sample_sizes must be a nonempty list of positive integers")
        return v

    @field_validator("methods")
    @classmethod
    def _known_methods(cls, v: List[str]) -> List[str]:
        unknown = [m for m in v if m not in METHOD_IDS + ("ORACLE",)]
        if unknown:
            raise ValueError(f"unknown methods {unknown}")
        return v


class FitSummary(BaseModel):
    """JSON form of a Bradley-Terry fit."""

    labels: List[str]
    theta: List[float]
    se: List[float]
    loglik: float
    converged: bool


class DatasetSummary(BaseModel):
    players: int
    pairs: int
    total_matches: int
    components: int
    component_sizes: List[int]


class RunManifest(BaseModel):
    command: str
    config_hash: str
    seed: Optional[int]
    library_version: str
    input_digests: Dict[str, str]
    timestamp: str
    metadata: Dict[str, str] = {}
