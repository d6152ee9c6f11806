from enum import StrEnum

from pydantic import BaseModel, Field, field_validator

from app.core.config import settings
from app.schemas.optimizer import ObjectiveMode


class ExperimentMethod(StrEnum):
    EXACT = "exact"
    QAOA = "qaoa"
    RQAOA = "rqaoa"


class ExperimentSpec(BaseModel):
    """Sweep over problems x methods x reps (x num_min_var for rqaoa), `runs` seeded runs per cell"""

    problems: list[str] = Field(..., min_length=1, description="Problem JSON files, relative to the spec file")
    methods: list[ExperimentMethod] = Field(default_factory=lambda: [ExperimentMethod.QAOA], min_length=1)
    reps: list[int] = Field(default_factory=lambda: [1], min_length=1)
    num_min_var: list[int] | None = Field(default=None, description="RQAOA thresholds; default N - 2")
    shots: int = Field(default=settings.DEFAULT_SHOTS, ge=1)
    runs: int = Field(default=settings.DEFAULT_RUNS, ge=1)
    restarts: int = Field(default=settings.DEFAULT_RESTARTS, ge=1)
    max_evaluations: int | None = Field(default=None, ge=1)
    base_seed: int = Field(default=0, ge=0)
    out_dir: str = "results"
    mode: ObjectiveMode = ObjectiveMode.EXACT

    @field_validator("reps", "num_min_var")
    @classmethod
    def _positive_entries(cls, values: list[int] | None) -> list[int] | None:
        if values is not None and any(v < 1 for v in values):
            raise ValueError("entries must be >= 1")
        return values


class ExperimentRow(BaseModel):
    """One (cell, run) measurement; field order is the CSV column order"""

    method: ExperimentMethod
    problem: str
    qubits: int
    reps: int | None = None  # blank for exact
    num_min_var: int | None = None  # blank for exact and qaoa
    run: int
    seed: int
    p_best: float
    p_adm: float
    objective: float
    wall_time_ms: float
