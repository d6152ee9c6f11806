"""
QAOA variational loop.

Builds the ansatz on the statevector simulator, tunes (gammas, betas) with
Nelder-Mead restarts, samples the final state and scores the sample against
the exhaustive oracle (P_best, P_adm).
"""

import logging
import time
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from app.core.config import settings
from app.core.exceptions import MetricsContractError
from app.schemas.optimizer import ObjectiveMode, OptimizerConfig
from app.schemas.problem import ProsumerProblem
from app.schemas.results import QaoaResult, RankedSolution, RestartTrace
from app.services.bruteforce_service import DiagonalSpectrum, bitstring_to_index, diagonal, ground_states_of
from app.services.problem_service import Schedule, enumerate_admissible, is_admissible, schedule_cost
from app.services.simulator_service import (
    Statevector,
    apply_cost_layer,
    apply_mixer_layer,
    expectation,
    sample,
    uniform_state,
)
from app.services.transform_service import SpinModel, VariableRegistry, compile_problem, format_exact

logger = logging.getLogger(__name__)


# ============================================================================
# Parameters and ansatz
# ============================================================================


@dataclass(frozen=True)
class QaoaParams:
    gammas: tuple[float, ...]
    betas: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.gammas) != len(self.betas):
            raise ValueError(f"Got {len(self.gammas)} gammas and {len(self.betas)} betas")
        if not self.gammas:
            raise ValueError("QAOA needs at least one repetition")

    @property
    def reps(self) -> int:
        return len(self.gammas)

    @classmethod
    def zeros(cls, reps: int) -> "QaoaParams":
        return cls((0.0,) * reps, (0.0,) * reps)

    @classmethod
    def from_vector(cls, vector: Iterable[float]) -> "QaoaParams":
        """[gamma_1..gamma_p, beta_1..beta_p] -> params"""
        values = [float(v) for v in vector]
        half = len(values) // 2
        return cls(tuple(values[:half]), tuple(values[half:]))

    def to_vector(self) -> np.ndarray:
        return np.array(self.gammas + self.betas, dtype=np.float64)


def ansatz_from_diagonal(diag: DiagonalSpectrum, params: QaoaParams) -> Statevector:
    state = uniform_state(diag.num_qubits)
    for gamma, beta in zip(params.gammas, params.betas, strict=True):
        state = apply_cost_layer(state, diag, gamma)
        state = apply_mixer_layer(state, beta)
    return state


def ansatz_state(model: SpinModel, params: QaoaParams) -> Statevector:
    """Uniform superposition followed by reps alternations of cost and mixer layers."""
    return ansatz_from_diagonal(diagonal(model, settings.STATEVECTOR_QUBIT_LIMIT), params)


def _sampled_energy(state: Statevector, diag: DiagonalSpectrum, shots: int, seed: int | Sequence[int]) -> float:
    counts = sample(state, shots, seed)
    total = sum(count * diag.values[bitstring_to_index(bits)] for bits, count in counts.items())
    return float(total / shots)


def objective(
    model: SpinModel,
    params: QaoaParams,
    mode: ObjectiveMode = ObjectiveMode.EXACT,
    shots: int = settings.DEFAULT_SHOTS,
    seed: int | Sequence[int] = 0,
    diag: DiagonalSpectrum | None = None,
) -> float:
    """
    Energy of the ansatz state.

    Args:
        model: Spin model
        params: Ansatz angles
        mode: Exact expectation or mean energy of `shots` samples
        shots: Samples per evaluation in sampled mode
        seed: Sampling seed in sampled mode
        diag: Precomputed diagonal of `model`

    Returns:
        Objective value
    """
    diag = diag if diag is not None else diagonal(model, settings.STATEVECTOR_QUBIT_LIMIT)
    state = ansatz_from_diagonal(diag, params)
    if mode is ObjectiveMode.SAMPLED:
        return _sampled_energy(state, diag, shots, seed)
    return expectation(state, diag)


# ============================================================================
# Classical optimizer
# ============================================================================


@dataclass(frozen=True)
class OptimizationOutcome:
    params: QaoaParams
    value: float
    trace: list[RestartTrace]
    evaluations: int


class _RestartObjective:
    """Objective callable for one restart; counts evaluations and seeds sampled-mode shots per call."""

    def __init__(self, model: SpinModel, diag: DiagonalSpectrum, config: OptimizerConfig, restart: int):
        self.model = model
        self.diag = diag
        self.config = config
        self.restart = restart
        self.evaluations = 0

    def __call__(self, x: np.ndarray) -> float:
        self.evaluations += 1
        params = QaoaParams.from_vector(x)
        if self.config.mode is ObjectiveMode.SAMPLED:
            seed = [self.config.seed, self.restart, self.evaluations]
            value = objective(
                self.model, params, ObjectiveMode.SAMPLED, self.config.shots_per_evaluation, seed, self.diag
            )
        else:
            value = objective(self.model, params, ObjectiveMode.EXACT, diag=self.diag)
        logger.debug(f"Restart {self.restart} evaluation {self.evaluations}: {value:.6f}")
        return value


def optimize(
    model: SpinModel, reps: int, config: OptimizerConfig, diag: DiagonalSpectrum | None = None
) -> OptimizationOutcome:
    """
    Nelder-Mead over the 2 * reps angles with random restarts.

    Restart r draws gammas uniformly in [0, 2 pi) and betas in [0, pi) from a
    generator seeded with (seed, r). Non-convergence is reported in the trace.

    Returns:
        The best restart's parameters and value, every restart's trace and the total evaluation count
    """
    if reps < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")
    diag = diag if diag is not None else diagonal(model, settings.STATEVECTOR_QUBIT_LIMIT)

    if model.is_constant():
        params = QaoaParams.zeros(reps)
        value = objective(model, params, ObjectiveMode.EXACT, diag=diag)
        trace = [
            RestartTrace(
                restart=0,
                initial=params.to_vector().tolist(),
                value=value,
                evaluations=1,
                converged=True,
                message="constant model",
            )
        ]
        return OptimizationOutcome(params, value, trace, 1)

    budget = config.evaluation_budget(reps)
    best: tuple[float, QaoaParams] | None = None
    trace: list[RestartTrace] = []
    total_evaluations = 0

    for restart in range(config.restarts):
        rng = np.random.default_rng([config.seed, restart])
        x0 = np.concatenate([rng.uniform(0, 2 * np.pi, reps), rng.uniform(0, np.pi, reps)])
        fun = _RestartObjective(model, diag, config, restart)
        result = minimize(
            fun,
            x0,
            method="Nelder-Mead",
            options={"maxfev": budget, "fatol": config.tolerance, "adaptive": True},
        )
        value = float(result.fun)
        total_evaluations += fun.evaluations
        trace.append(
            RestartTrace(
                restart=restart,
                initial=x0.tolist(),
                value=value,
                evaluations=fun.evaluations,
                converged=bool(result.success),
                message=str(result.message),
            )
        )
        logger.info(
            f"🔄 Restart {restart + 1}/{config.restarts}: value={value:.6f} "
            f"after {fun.evaluations} evaluations{'' if result.success else ' (not converged)'}"
        )

        if best is None or value < best[0]:
            best = (value, QaoaParams.from_vector(result.x))

    assert best is not None
    return OptimizationOutcome(best[1], best[0], trace, total_evaluations)


# ============================================================================
# Metrics
# ============================================================================


def compute_metrics(
    counts: Mapping[str, int], optimal: Iterable[str], admissible: Iterable[str]
) -> tuple[float, float]:
    """
    Fractions of shots landing in the optimal and in the admissible set.

    Raises:
        MetricsContractError: Empty counts, or an optimal bitstring outside the admissible set
    """
    total = sum(counts.values())
    if total <= 0:
        raise MetricsContractError("Cannot compute success metrics on empty counts")
    optimal, admissible = set(optimal), set(admissible)
    if not optimal <= admissible:
        raise MetricsContractError(f"{len(optimal - admissible)} optimal bitstrings are not admissible")

    best = sum(count for bits, count in counts.items() if bits in optimal)
    adm = sum(count for bits, count in counts.items() if bits in admissible)
    return best / total, adm / total


def project_counts(counts: Mapping[str, int], width: int) -> dict[str, int]:
    """Merge counts over the first `width` bits (the schedule part of a full bitstring)."""
    projected: Counter[str] = Counter()
    for bits, count in counts.items():
        projected[bits[:width]] += count
    return dict(sorted(projected.items()))


def ranked_solutions(
    counts: Mapping[str, int], problem: ProsumerProblem, registry: VariableRegistry, top: int = 10
) -> list[RankedSolution]:
    """Distinct admissible schedules in the sample, cheapest first, then most frequent."""
    ranked = []
    for bits, count in project_counts(counts, registry.num_load_vars).items():
        schedule = Schedule.from_bits(problem, bits)
        if is_admissible(problem, schedule):
            ranked.append((schedule_cost(problem, schedule), -count, bits))
    ranked.sort()
    return [
        RankedSolution(schedule_bits=bits, count=-neg_count, cost=format_exact(cost))
        for cost, neg_count, bits in ranked[:top]
    ]


@dataclass(frozen=True)
class ReferenceSets:
    """Oracle sets a sample is scored against, over `width`-bit prefixes."""

    width: int
    optimal: set[str]
    admissible: set[str]


def problem_reference(problem: ProsumerProblem, registry: VariableRegistry) -> ReferenceSets:
    scored = enumerate_admissible(problem)
    admissible = {item.schedule.bitstring() for item in scored}
    optimal = {item.schedule.bitstring() for item in scored if item.cost == scored[0].cost} if scored else set()
    return ReferenceSets(registry.num_load_vars, optimal, admissible)


def _most_frequent(counts: Mapping[str, int]) -> str:
    return min(counts, key=lambda bits: (-counts[bits], bits))


# ============================================================================
# End-to-end run
# ============================================================================


def run_qaoa(
    target: ProsumerProblem | SpinModel,
    reps: int,
    shots: int = settings.DEFAULT_SHOTS,
    config: OptimizerConfig | None = None,
) -> QaoaResult:
    """
    Optimize, sample the final state with `shots` and score the sample.

    For a problem, shots are scored on their schedule bits: a shot counts as
    admissible (optimal) when its decoded schedule is admissible (optimal).
    For a bare spin model, optimal means a ground state and every observed
    bitstring counts as admissible.

    Args:
        target: Problem instance or spin model
        reps: Number of cost/mixer alternations
        shots: Final measurement shots
        config: Optimizer settings (defaults to OptimizerConfig())

    Returns:
        QaoaResult with the optimized angles, counts and success metrics
    """
    config = config or OptimizerConfig()
    problem, registry = None, None
    if isinstance(target, ProsumerProblem):
        problem = target
        _, model, registry = compile_problem(problem)
    else:
        model = target

    diag = diagonal(model, settings.STATEVECTOR_QUBIT_LIMIT)
    ground = ground_states_of(diag)

    start = time.perf_counter()
    outcome = optimize(model, reps, config, diag)
    state = ansatz_from_diagonal(diag, outcome.params)
    counts = sample(state, shots, config.seed)
    wall_time_ms = (time.perf_counter() - start) * 1000

    if problem is not None and registry is not None:
        reference = problem_reference(problem, registry)
        top_solutions = ranked_solutions(counts, problem, registry)
    else:
        reference = ReferenceSets(model.num_vars, set(ground.bitstrings), set(counts) | set(ground.bitstrings))
        top_solutions = []

    p_best, p_adm = compute_metrics(project_counts(counts, reference.width), reference.optimal, reference.admissible)
    most_frequent = _most_frequent(counts)

    logger.info(
        f"✅ QAOA reps={reps} on {model.num_vars} qubits: objective={outcome.value:.6f}, "
        f"P_best={p_best:.4f}, P_adm={p_adm:.4f} ({wall_time_ms:.0f} ms)"
    )
    return QaoaResult(
        num_qubits=model.num_vars,
        reps=reps,
        gammas=list(outcome.params.gammas),
        betas=list(outcome.params.betas),
        objective=outcome.value,
        mode=config.mode,
        shots=shots,
        seed=config.seed,
        counts=counts,
        p_best=p_best,
        p_adm=p_adm,
        ground_energy=float(ground.energy),
        most_frequent=most_frequent,
        most_frequent_energy=float(diag.energy(bitstring_to_index(most_frequent))),
        evaluations=outcome.evaluations,
        restarts=outcome.trace,
        top_solutions=top_solutions,
        wall_time_ms=wall_time_ms,
    )

