from pydantic import BaseModel, Field

from app.schemas.optimizer import ObjectiveMode


class CircuitResources(BaseModel):
    """Gate counts of the QAOA circuit for a spin model"""

    num_qubits: int
    reps: int
    hadamard_gates: int
    rx_gates: int
    rz_gates: int
    zz_gates: int
    zz_layers: int  # Parallel layers of two-qubit rotations per repetition
    depth_bound: int


class RestartTrace(BaseModel):
    """Outcome of one Nelder-Mead restart"""

    restart: int
    initial: list[float]
    value: float
    evaluations: int
    converged: bool
    message: str


class RankedSolution(BaseModel):
    """Admissible schedule observed in the measurement sample"""

    schedule_bits: str
    count: int
    cost: str


class QaoaResult(BaseModel):
    """Optimized QAOA run with its measurement statistics"""

    num_qubits: int
    reps: int
    gammas: list[float]
    betas: list[float]
    objective: float
    mode: ObjectiveMode
    shots: int
    seed: int
    counts: dict[str, int]
    p_best: float = Field(..., ge=0, le=1)
    p_adm: float = Field(..., ge=0, le=1)
    ground_energy: float
    most_frequent: str
    most_frequent_energy: float
    evaluations: int
    restarts: list[RestartTrace]
    top_solutions: list[RankedSolution] = Field(default_factory=list)
    wall_time_ms: float


class EliminationStep(BaseModel):
    """One correlation-driven substitution z_removed = sign * z_kept (original variable indices)"""

    kept: int
    removed: int
    sign: int
    correlation: float
    num_vars_before: int


class LevelResult(BaseModel):
    """QAOA optimization at one recursion level"""

    level: int
    num_vars: int
    objective: float
    gammas: list[float]
    betas: list[float]
    evaluations: int


class RqaoaResult(BaseModel):
    """Recursive QAOA outcome: one solution over all original variables"""

    num_qubits: int
    num_min_var: int
    reps: int
    seed: int
    bitstring: str
    energy: str
    ground_energy: str
    trace: list[EliminationStep]
    levels: list[LevelResult]
    admissible: bool
    optimal: bool
    cost: str | None = None
    p_best: float
    p_adm: float
    evaluations: int
    wall_time_ms: float
