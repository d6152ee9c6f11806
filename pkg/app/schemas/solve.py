from enum import StrEnum

from pydantic import BaseModel, Field

from app.core.config import settings
from app.schemas.optimizer import ObjectiveMode
from app.schemas.problem import ProsumerProblem
from app.schemas.results import CircuitResources, QaoaResult, RqaoaResult


class SolveMethod(StrEnum):
    QAOA = "qaoa"
    RQAOA = "rqaoa"


class TransformRequest(BaseModel):
    """Problem to compile, with the repetition count used for the resource estimate"""

    problem: ProsumerProblem
    reps: int = Field(default=1, ge=1)


class VariableEntry(BaseModel):
    """One qubit of the compiled model"""

    index: int
    kind: str  # "load" or "slack"
    user: int
    hour: int
    load: int | None = None
    bit: int | None = None
    weight: int | None = None


class TransformResponse(BaseModel):
    """
    Compiled model; coefficients are exact decimal or 'p/q' strings.

    The Ising model sits at the top level (n, linear, quadratic, offset) next to
    penalty_A and the registry; the QUBO it came from is nested under `qubo`.
    """

    n: int
    linear: dict[str, str]
    quadratic: dict[str, str]
    offset: str
    num_qubits: int
    num_load_vars: int
    num_slack_vars: int
    penalty_A: str
    registry: list[VariableEntry]
    qubo: dict
    resources: CircuitResources


class ScheduleEntry(BaseModel):
    schedule_bits: str
    cost: str


class ExactResponse(BaseModel):
    """Exhaustive oracle results for a problem"""

    num_schedule_bits: int
    num_qubits: int
    admissible_count: int
    min_cost: str | None = None
    optimal: list[str]
    admissible: list[ScheduleEntry]
    ground_energy: str
    ground_states: list[str]
    decoded_ground_states: list[str]  # Schedule bits of each ground state
    consistent: bool  # Ground states decode exactly to the optimal schedules
    wall_time_ms: float


class SolveRequest(BaseModel):
    """Problem plus solver options, shared by the CLI and POST /solve"""

    problem: ProsumerProblem
    method: SolveMethod = SolveMethod.QAOA
    reps: int = Field(default=1, ge=1)
    shots: int = Field(default=settings.DEFAULT_SHOTS, ge=1)
    restarts: int = Field(default=settings.DEFAULT_RESTARTS, ge=1)
    seed: int = Field(default=0, ge=0)
    mode: ObjectiveMode = ObjectiveMode.EXACT
    num_min_var: int | None = Field(default=None, ge=1, description="RQAOA only; defaults to N - 2")
    max_evaluations: int | None = Field(default=None, ge=1)


class SolveResponse(BaseModel):
    method: SolveMethod
    resources: CircuitResources
    qaoa: QaoaResult | None = None
    rqaoa: RqaoaResult | None = None
