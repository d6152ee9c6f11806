from pathlib import Path

import pytest

from app.schemas.problem import ProsumerProblem
from app.services.problem_service import load_problem
from app.services.transform_service import SpinModel

FIXTURES_DIR = Path(__file__).resolve().parent.parent / "fixtures"


def worked_example(hours: int) -> ProsumerProblem:
    """One user, e_max 3 kW: a 2 kW load on for 1 h and a 1 kW load on for 2 h."""
    return load_problem(FIXTURES_DIR / f"prosumer_h{hours}.json")


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES_DIR


@pytest.fixture
def problem_h2() -> ProsumerProblem:
    return worked_example(2)


@pytest.fixture
def problem_h4() -> ProsumerProblem:
    return worked_example(4)


@pytest.fixture(params=[2, 3, 4, 5], ids=lambda h: f"H{h}")
def any_worked_example(request) -> ProsumerProblem:
    return worked_example(request.param)


@pytest.fixture
def three_spin_model() -> SpinModel:
    """E(z) = z0 + 2 z2 - 4 z0 z1 - 2 z1 z2; diagonal (-3, -3, 9, 1, 3, 3, -1, -9)."""
    return SpinModel.from_terms(3, [1, 0, 2], {(0, 1): -4, (1, 2): -2})
