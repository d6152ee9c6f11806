"""
Recursive QAOA.

Each level optimizes QAOA on the current spin model, measures <Z_i Z_j> on
every coupled pair of the final state, and substitutes z_j = sign * z_i for
the most correlated pair. Once num_min_var variables remain (or no coupling is
left) the reduced model is solved exhaustively and the eliminated spins are
recovered through the trace in reverse.
"""

import logging
import time
from dataclasses import dataclass
from fractions import Fraction

from app.core.config import settings
from app.core.exceptions import NoQuadraticTermsError
from app.schemas.optimizer import OptimizerConfig
from app.schemas.problem import ProsumerProblem
from app.schemas.results import EliminationStep, LevelResult, RqaoaResult
from app.services.bruteforce_service import diagonal, ground_states
from app.services.problem_service import is_admissible, schedule_cost
from app.services.qaoa_service import ansatz_from_diagonal, optimize, problem_reference
from app.services.simulator_service import Statevector, zz_expectation
from app.services.transform_service import (
    SpinModel,
    compile_problem,
    decode_solution,
    format_exact,
    spin_energy,
    spins_to_bitstring,
)

logger = logging.getLogger(__name__)

# Correlations closer than this are treated as equal (tie-break) or as zero (sign +1)
CORRELATION_TOLERANCE = 1e-12


@dataclass(frozen=True)
class CorrelationEdge:
    i: int
    j: int
    value: float

    @property
    def sign(self) -> int:
        return 1 if self.value >= -CORRELATION_TOLERANCE else -1


def max_correlation_edge(state: Statevector, model: SpinModel) -> CorrelationEdge:
    """
    Coupled pair with the largest |<Z_i Z_j>|; ties go to the lexicographically smallest pair.

    Raises:
        NoQuadraticTermsError: The model has no coupling left
    """
    if not model.quadratic:
        raise NoQuadraticTermsError(f"Model over {model.num_vars} variables has no quadratic terms")

    best: CorrelationEdge | None = None
    for i, j in sorted(model.quadratic):
        value = zz_expectation(state, i, j)
        if best is None or abs(value) > abs(best.value) + CORRELATION_TOLERANCE:
            best = CorrelationEdge(i, j, value)
    assert best is not None
    return best


@dataclass(frozen=True)
class Reduction:
    model: SpinModel
    remap: dict[int, int]  # old index -> new index, for every surviving variable


def eliminate(model: SpinModel, i: int, j: int, sign: int) -> Reduction:
    """
    Enforce z_j = sign * z_i and drop variable j.

    a_i gains sign * a_j, the (i, j) coupling folds into the offset, every other
    coupling of j moves onto i (merging with an existing (i, k) edge), and the
    indices above j shift down by one. For every assignment with z_j = sign * z_i
    the reduced energy equals the original energy exactly.
    """
    n = model.num_vars
    if i == j:
        raise ValueError("Cannot eliminate a variable against itself")
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"Pair ({i}, {j}) out of range for {n} variables")
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")

    remap = {k: (k if k < j else k - 1) for k in range(n) if k != j}
    reduced = SpinModel(num_vars=n - 1, offset=model.offset)

    for k, a in model.linear.items():
        if k == j:
            reduced.add_linear(remap[i], sign * a)
        else:
            reduced.add_linear(remap[k], a)

    for (p, q), b in model.quadratic.items():
        if {p, q} == {i, j}:
            reduced.offset += sign * b
        elif j in (p, q):
            other = p if q == j else q
            reduced.add_quadratic(remap[i], remap[other], sign * b)
        else:
            reduced.add_quadratic(remap[p], remap[q], b)

    return Reduction(reduced, remap)


def back_substitute(num_vars: int, survivors: dict[int, int], trace: list[EliminationStep]) -> list[int]:
    """
    Full spin assignment from the survivors' spins (original index -> spin).

    Steps are undone last to first, so a kept variable that was itself removed
    later is already resolved when its step is replayed.
    """
    spins: list[int | None] = [None] * num_vars
    for label, spin in survivors.items():
        spins[label] = spin
    for step in reversed(trace):
        kept = spins[step.kept]
        assert kept is not None
        spins[step.removed] = step.sign * kept
    assert all(spin is not None for spin in spins)
    return [int(spin) for spin in spins]  # type: ignore[arg-type]


def run_rqaoa(
    target: ProsumerProblem | SpinModel,
    num_min_var: int | None = None,
    reps: int = 1,
    config: OptimizerConfig | None = None,
) -> RqaoaResult:
    """
    Reduce the model by correlation-driven substitutions, then finish exhaustively.

    Level k re-optimizes QAOA from scratch with seed config.seed + k. When a level
    has no coupling left the loop stops early and the classical finish handles
    the remaining (independent) variables, so the trace can be shorter than
    N - num_min_var.

    Args:
        target: Problem instance or spin model
        num_min_var: Variables left for the classical finish (default N - 2, at least 1)
        reps: QAOA repetitions at every level
        config: Optimizer settings

    Returns:
        RqaoaResult with one bitstring over all original variables
    """
    config = config or OptimizerConfig()
    problem, registry = None, None
    if isinstance(target, ProsumerProblem):
        problem = target
        _, model, registry = compile_problem(problem)
    else:
        model = target

    n = model.num_vars
    if num_min_var is None:
        num_min_var = max(1, n - 2)
    if not 1 <= num_min_var < n:
        raise ValueError(f"num_min_var must be in [1, {n - 1}], got {num_min_var}")

    start = time.perf_counter()
    current = model
    labels = list(range(n))  # current index -> original index
    trace: list[EliminationStep] = []
    levels: list[LevelResult] = []
    evaluations = 0

    level = 0
    while current.num_vars > num_min_var:
        if not current.quadratic:
            logger.warning(
                f"⚠️ No couplings left at {current.num_vars} variables, finishing classically "
                f"before reaching num_min_var={num_min_var}"
            )
            break

        level_config = config.model_copy(update={"seed": config.seed + level})
        diag = diagonal(current, settings.STATEVECTOR_QUBIT_LIMIT)
        outcome = optimize(current, reps, level_config, diag)
        evaluations += outcome.evaluations
        state = ansatz_from_diagonal(diag, outcome.params)

        edge = max_correlation_edge(state, current)
        if abs(edge.value) <= CORRELATION_TOLERANCE:
            logger.warning(f"⚠️ Zero correlation on every coupled pair at level {level}, using sign +1")

        levels.append(
            LevelResult(
                level=level,
                num_vars=current.num_vars,
                objective=outcome.value,
                gammas=list(outcome.params.gammas),
                betas=list(outcome.params.betas),
                evaluations=outcome.evaluations,
            )
        )
        trace.append(
            EliminationStep(
                kept=labels[edge.i],
                removed=labels[edge.j],
                sign=edge.sign,
                correlation=edge.value,
                num_vars_before=current.num_vars,
            )
        )
        logger.info(
            f"🔄 Level {level}: z{labels[edge.j]} = {'+' if edge.sign > 0 else '-'}z{labels[edge.i]} "
            f"(<ZZ>={edge.value:+.4f}), {current.num_vars - 1} variables left"
        )

        current = eliminate(current, edge.i, edge.j, edge.sign).model
        labels.pop(edge.j)
        level += 1

    finish = ground_states(current)
    finish_bits = finish.bitstrings[0]
    survivors = {label: 1 - 2 * int(bit) for label, bit in zip(labels, finish_bits, strict=True)}
    spins = back_substitute(n, survivors, trace)
    bitstring = spins_to_bitstring(spins)
    energy = spin_energy(model, spins)
    ground_energy = ground_states(model).energy
    wall_time_ms = (time.perf_counter() - start) * 1000

    cost: Fraction | None = None
    if problem is not None and registry is not None:
        schedule = decode_solution(registry, bitstring).schedule
        admissible = bool(is_admissible(problem, schedule))
        optimal = schedule.bitstring() in problem_reference(problem, registry).optimal
        cost = schedule_cost(problem, schedule)
    else:
        admissible = True
        optimal = energy == ground_energy

    logger.info(
        f"✅ RQAOA on {n} qubits: {len(trace)} eliminations, energy={energy} "
        f"(ground {ground_energy}), admissible={admissible}, optimal={optimal} ({wall_time_ms:.0f} ms)"
    )
    return RqaoaResult(
        num_qubits=n,
        num_min_var=num_min_var,
        reps=reps,
        seed=config.seed,
        bitstring=bitstring,
        energy=format_exact(energy),
        ground_energy=format_exact(ground_energy),
        trace=trace,
        levels=levels,
        admissible=admissible,
        optimal=optimal,
        cost=format_exact(cost) if cost is not None else None,
        p_best=1.0 if optimal else 0.0,
        p_adm=1.0 if admissible else 0.0,
        evaluations=evaluations,
        wall_time_ms=wall_time_ms,
    )
