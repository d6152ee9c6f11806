"""Facade used by the CLI and the HTTP routers: transform, exact oracle and solve."""

import logging
import time
from functools import lru_cache

from app.schemas.optimizer import OptimizerConfig
from app.schemas.problem import ProsumerProblem
from app.schemas.solve import (
    ExactResponse,
    ScheduleEntry,
    SolveMethod,
    SolveRequest,
    SolveResponse,
    TransformRequest,
    TransformResponse,
    VariableEntry,
)
from app.services.bruteforce_service import ground_states
from app.services.problem_service import enumerate_admissible, ensure_valid
from app.services.qaoa_service import run_qaoa
from app.services.rqaoa_service import run_rqaoa
from app.services.simulator_service import circuit_resources
from app.services.transform_service import (
    QuadraticBinaryModel,
    compile_problem,
    decode_solution,
    format_exact,
)

logger = logging.getLogger(__name__)


def qubo_to_json(model: QuadraticBinaryModel) -> dict:
    return {
        "n": model.num_vars,
        "linear": {str(i): format_exact(c) for i, c in sorted(model.linear.items())},
        "quadratic": {f"{i},{j}": format_exact(c) for (i, j), c in sorted(model.quadratic.items())},
        "constant": format_exact(model.constant),
    }


class SolveService:
    """
    Runs the three user-facing operations on a validated problem.

    Every method raises InvalidProblemError for an invalid instance and
    SizeLimitExceededError when an exhaustive scan or statevector is too large.
    """

    def transform(self, request: TransformRequest) -> TransformResponse:
        ensure_valid(request.problem)
        qubo, spin, registry = compile_problem(request.problem)
        return TransformResponse(
            **spin.to_json(),
            num_qubits=registry.num_vars,
            num_load_vars=registry.num_load_vars,
            num_slack_vars=registry.num_vars - registry.num_load_vars,
            penalty_A=format_exact(qubo.penalty),
            registry=[VariableEntry(**row) for row in registry.to_json()],
            qubo=qubo_to_json(qubo),
            resources=circuit_resources(spin, request.reps),
        )

    def exact(self, problem: ProsumerProblem) -> ExactResponse:
        """Admissible set by enumeration, ground states by brute force, and their agreement."""
        ensure_valid(problem)
        start = time.perf_counter()
        _, spin, registry = compile_problem(problem)

        scored = enumerate_admissible(problem)
        min_cost = scored[0].cost if scored else None
        optimal = [item.schedule.bitstring() for item in scored if item.cost == min_cost]

        ground = ground_states(spin)
        decoded = sorted({decode_solution(registry, bits).schedule.bitstring() for bits in ground.bitstrings})
        consistent = decoded == sorted(optimal)
        wall_time_ms = (time.perf_counter() - start) * 1000

        if not consistent:
            logger.warning(f"⚠️ Ground states decode to {decoded}, optimal schedules are {optimal}")
        logger.info(
            f"✅ Exact oracle: {len(scored)} admissible schedules, min cost {min_cost}, "
            f"{len(ground.bitstrings)} ground states ({wall_time_ms:.0f} ms)"
        )
        return ExactResponse(
            num_schedule_bits=problem.num_schedule_bits,
            num_qubits=spin.num_vars,
            admissible_count=len(scored),
            min_cost=format_exact(min_cost) if min_cost is not None else None,
            optimal=optimal,
            admissible=[
                ScheduleEntry(schedule_bits=item.schedule.bitstring(), cost=format_exact(item.cost)) for item in scored
            ],
            ground_energy=format_exact(ground.energy),
            ground_states=ground.bitstrings,
            decoded_ground_states=decoded,
            consistent=consistent,
            wall_time_ms=wall_time_ms,
        )

    def solve(self, request: SolveRequest) -> SolveResponse:
        ensure_valid(request.problem)
        config = OptimizerConfig(
            restarts=request.restarts,
            max_evaluations=request.max_evaluations,
            seed=request.seed,
            mode=request.mode,
            shots_per_evaluation=request.shots,
        )
        _, spin, _ = compile_problem(request.problem)
        resources = circuit_resources(spin, request.reps)

        if request.method is SolveMethod.RQAOA:
            result = run_rqaoa(request.problem, request.num_min_var, request.reps, config)
            return SolveResponse(method=request.method, resources=resources, rqaoa=result)

        result = run_qaoa(request.problem, request.reps, request.shots, config)
        return SolveResponse(method=request.method, resources=resources, qaoa=result)


@lru_cache
def get_solve_service() -> SolveService:
    """Get cached solve service instance"""
    return SolveService()
