from pydantic import BaseModel, Field, field_validator, model_validator
from typing import List, Optional, Dict, Any, Tuple, Literal

import numpy as np

from app.config import SWEEP_SETTINGS
from app.models.coherence import MEASURES
from app.models.linalg import DensityMatrix

class StateFile(BaseModel):
    """Density matrix as a d x d array of [re, im] pairs"""
    dim: int = Field(..., ge=1)
    matrix: List[List[Tuple[float, float]]]

    @model_validator(mode="after")
    def check_shape(self):
        if len(self.matrix) != self.dim or any(len(row) != self.dim for row in self.matrix):
            raise ValueError(f"matrix must be {self.dim} x {self.dim}")
        return self

    def to_density_matrix(self) -> DensityMatrix:
        entries = np.array(self.matrix, dtype=float)
        return DensityMatrix(entries[..., 0] + 1j * entries[..., 1])

    @classmethod
    def from_density_matrix(cls, rho: DensityMatrix) -> "StateFile":
        matrix = [[(float(v.real), float(v.imag)) for v in row] for row in rho.matrix]
        return cls(dim=rho.dim, matrix=matrix)

def _check_measures(measures: List[str]) -> List[str]:
    unknown = sorted(set(m.lower() for m in measures) - set(MEASURES))
    if unknown:
        raise ValueError(f"unknown measures {unknown}; choose from {list(MEASURES)}")
    return [m.lower() for m in measures]

class SweepSpec(BaseModel):
    """Parameter sweep over one of the state families"""
    family: Literal["plus-mix", "plus3-mix", "bloch-grid", "custom-file"]
    nu_steps: int = Field(SWEEP_SETTINGS["nu_steps"], ge=2)
    beta_steps: int = Field(SWEEP_SETTINGS["beta_steps"], ge=2)
    gamma_steps: int = Field(SWEEP_SETTINGS["gamma_steps"], ge=2)
    measures: List[str] = ["cmax", "cr", "cmin", "cg"]
    state_path: Optional[str] = None  # custom-file only
    allow_heuristic: bool = False
    seed: int = 0

    @field_validator("measures")
    @classmethod
    def check_measures(cls, v):
        return _check_measures(v)

    @model_validator(mode="after")
    def check_family(self):
        if self.family == "custom-file" and not self.state_path:
            raise ValueError("custom-file sweeps need state_path")
        return self

class ComputeRequest(BaseModel):
    """Request body for a single-state computation"""
    state: StateFile
    measures: Optional[List[str]] = None
    allow_heuristic: bool = False
    seed: Optional[int] = None

    @field_validator("measures")
    @classmethod
    def check_measures(cls, v):
        return None if v is None else _check_measures(v)

class ConvexRoofValueModel(BaseModel):
    """Convex-roof measure; exact is False for upper bounds"""
    value: float
    exact: bool

class CoherenceReportModel(BaseModel):
    """Model for a coherence report"""
    dim: int
    measures: List[str]
    c_r: Optional[float] = None
    c_g: Optional[float] = None
    c_min: Optional[float] = None
    c_max: Optional[float] = None
    c_f: Optional[ConvexRoofValueModel] = None
    c_0: Optional[ConvexRoofValueModel] = None
    route_disagreement: float
    flagged: bool
    routes: Dict[str, Dict[str, float]]
    solver_diagnostics: Dict[str, Any]

class SweepResponse(BaseModel):
    """Rows of a sweep in column order"""
    family: str
    columns: List[str]
    rows: List[Dict[str, float]]
