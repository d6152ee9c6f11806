from enum import StrEnum

from pydantic import BaseModel, ConfigDict, Field

from app.core.config import settings


class ObjectiveMode(StrEnum):
    EXACT = "exact"  # expectation computed from the statevector
    SAMPLED = "sampled"  # mean energy of `shots_per_evaluation` samples


class OptimizerConfig(BaseModel):
    """Classical optimizer settings for the QAOA parameter search"""

    model_config = ConfigDict(frozen=True)

    restarts: int = Field(default=settings.DEFAULT_RESTARTS, ge=1)
    max_evaluations: int | None = Field(
        default=None, ge=1, description="Objective evaluations per restart; defaults to MAX_EVALUATIONS_PER_REP * reps"
    )
    tolerance: float = Field(default=settings.OPTIMIZER_TOLERANCE, gt=0)
    seed: int = Field(default=0, ge=0)
    mode: ObjectiveMode = ObjectiveMode.EXACT
    shots_per_evaluation: int = Field(default=settings.DEFAULT_SHOTS, ge=1)

    def evaluation_budget(self, reps: int) -> int:
        return self.max_evaluations or settings.MAX_EVALUATIONS_PER_REP * reps
