import logging

from fastapi import APIRouter, Depends, HTTPException

from app.core.exceptions import DimensionMismatchError, InvalidProblemError, SizeLimitExceededError
from app.schemas.problem import ProsumerProblem
from app.schemas.solve import ExactResponse, SolveRequest, SolveResponse, TransformRequest, TransformResponse
from app.services.solve_service import SolveService, get_solve_service

logger = logging.getLogger(__name__)

router = APIRouter(tags=["Solver"])


def _http_error(exc: Exception) -> HTTPException:
    if isinstance(exc, InvalidProblemError):
        return HTTPException(status_code=422, detail=exc.violations)
    if isinstance(exc, SizeLimitExceededError):
        return HTTPException(status_code=413, detail=str(exc))
    return HTTPException(status_code=422, detail=str(exc))


# Endpoints are sync: the work is CPU-bound and FastAPI runs them in its threadpool


@router.post("/transform", response_model=TransformResponse)
def transform(request: TransformRequest, service: SolveService = Depends(get_solve_service)):
    """Compile a problem into its QUBO and Ising model with the variable map and circuit resources."""
    try:
        return service.transform(request)
    except (InvalidProblemError, SizeLimitExceededError) as e:
        raise _http_error(e) from e


@router.post("/exact", response_model=ExactResponse)
def exact(problem: ProsumerProblem, service: SolveService = Depends(get_solve_service)):
    """Exhaustive admissible set, optimal schedules and Ising ground states."""
    try:
        return service.exact(problem)
    except (InvalidProblemError, SizeLimitExceededError) as e:
        raise _http_error(e) from e


@router.post("/solve", response_model=SolveResponse)
def solve(request: SolveRequest, service: SolveService = Depends(get_solve_service)):
    """
    Run QAOA or Recursive QAOA on a problem.

    Returns the optimized angles, measurement counts and P_best / P_adm for
    QAOA, or the single returned schedule with its elimination trace for RQAOA.
    """
    try:
        return service.solve(request)
    except (InvalidProblemError, SizeLimitExceededError, DimensionMismatchError, ValueError) as e:
        logger.warning(f"⚠️ Solve request rejected: {e}")
        raise _http_error(e) from e
