"""
Domain service for the prosumer scheduling problem.

Evaluates schedules against the objective (daily energy cost) and the two
constraint families (per-user hourly power limit, per-load working time), and
enumerates the admissible set exhaustively as a verification oracle.
"""

import itertools
import logging
from dataclasses import dataclass
from enum import StrEnum
from fractions import Fraction
from pathlib import Path

from app.core.config import settings
from app.core.exceptions import DimensionMismatchError, InvalidProblemError, SizeLimitExceededError
from app.schemas.problem import ProsumerProblem

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Schedule:
    """
    On/off state of every load at every hour.

    states[u][l][h] is 1 when load l of user u is on at hour h. The canonical
    flattening is (user, load, hour) in declaration order with hour fastest.
    """

    states: tuple[tuple[tuple[int, ...], ...], ...]

    @classmethod
    def from_bits(cls, problem: ProsumerProblem, bits: str | list[int] | tuple[int, ...]) -> "Schedule":
        values = [int(b) for b in bits]
        if len(values) != problem.num_schedule_bits:
            raise DimensionMismatchError(
                f"Expected {problem.num_schedule_bits} schedule bits, got {len(values)}"
            )
        hours = problem.hours
        it = iter(values)
        states = tuple(
            tuple(tuple(next(it) for _ in range(hours)) for _ in user.loads) for user in problem.users
        )
        return cls(states)

    @classmethod
    def all_off(cls, problem: ProsumerProblem) -> "Schedule":
        return cls.from_bits(problem, [0] * problem.num_schedule_bits)

    def bits(self) -> tuple[int, ...]:
        return tuple(bit for user in self.states for load in user for bit in load)

    def bitstring(self) -> str:
        return "".join(str(bit) for bit in self.bits())


class ConstraintKind(StrEnum):
    POWER_LIMIT = "power_limit"  # sum of active loads <= e_max, per user and hour
    WORKING_TIME = "working_time"  # load on for exactly working_time hours


@dataclass(frozen=True)
class ConstraintViolation:
    kind: ConstraintKind
    user: int
    load: int | None
    hour: int | None
    value: int
    bound: int

    def describe(self) -> str:
        if self.kind is ConstraintKind.POWER_LIMIT:
            return f"user {self.user} draws {self.value} kW at hour {self.hour}, above e_max {self.bound}"
        return f"user {self.user} load {self.load} is on for {self.value} h, expected {self.bound}"


@dataclass(frozen=True)
class AdmissibilityReport:
    admissible: bool
    violations: list[ConstraintViolation]

    def __bool__(self) -> bool:
        return self.admissible


@dataclass(frozen=True)
class ScoredSchedule:
    schedule: Schedule
    cost: Fraction


def validate_problem(problem: ProsumerProblem) -> list[str]:
    """
    Check the instance invariants.

    Returns:
        Human-readable violations; an empty list means the problem is valid.
    """
    violations: list[str] = []

    if problem.hours < 1:
        violations.append(f"hours must be >= 1, got {problem.hours}")
    if len(problem.prices) != problem.hours:
        violations.append(f"expected {problem.hours} prices, got {len(problem.prices)}")
    for h, price in enumerate(problem.prices):
        if price < 0:
            violations.append(f"price at hour {h} is negative ({price})")
    if not problem.users:
        violations.append("problem has no users")

    for u, user in enumerate(problem.users):
        if user.e_max < 1:
            violations.append(f"user {u}: e_max must be >= 1, got {user.e_max}")
        if not user.loads:
            violations.append(f"user {u} has no loads")
        for li, load in enumerate(user.loads):
            if load.energy < 1:
                violations.append(f"user {u} load {li}: energy must be >= 1, got {load.energy}")
            if load.working_time < 1:
                violations.append(f"user {u} load {li}: working_time must be >= 1, got {load.working_time}")
            elif load.working_time > problem.hours:
                violations.append(
                    f"user {u} load {li}: working_time exceeds hours ({load.working_time} > {problem.hours})"
                )

    return violations


def ensure_valid(problem: ProsumerProblem) -> ProsumerProblem:
    """Raise InvalidProblemError carrying the full report when the problem is invalid."""
    if violations := validate_problem(problem):
        raise InvalidProblemError(violations)
    return problem


def load_problem(path: str | Path) -> ProsumerProblem:
    """Read and validate a problem JSON file"""
    problem = ProsumerProblem.model_validate_json(Path(path).read_text(encoding="utf-8"))
    return ensure_valid(problem)


def _check_dimensions(problem: ProsumerProblem, schedule: Schedule) -> None:
    if len(schedule.states) != len(problem.users):
        raise DimensionMismatchError(f"Schedule has {len(schedule.states)} users, problem has {len(problem.users)}")
    for u, (user, user_states) in enumerate(zip(problem.users, schedule.states, strict=True)):
        if len(user_states) != len(user.loads):
            raise DimensionMismatchError(
                f"Schedule has {len(user_states)} loads for user {u}, problem has {len(user.loads)}"
            )
        for li, load_states in enumerate(user_states):
            if len(load_states) != problem.hours:
                raise DimensionMismatchError(
                    f"Schedule has {len(load_states)} hours for user {u} load {li}, problem has {problem.hours}"
                )


def schedule_cost(problem: ProsumerProblem, schedule: Schedule) -> Fraction:
    """Daily energy cost in euro-cents: sum over hours of price times the power of active loads."""
    _check_dimensions(problem, schedule)
    cost = Fraction(0)
    for user, user_states in zip(problem.users, schedule.states, strict=True):
        for load, load_states in zip(user.loads, user_states, strict=True):
            cost += sum(
                Fraction(price * load.energy) for price, on in zip(problem.prices, load_states, strict=True) if on
            )
    return cost


def is_admissible(problem: ProsumerProblem, schedule: Schedule) -> AdmissibilityReport:
    """Evaluate both constraint families and list every violated constraint."""
    _check_dimensions(problem, schedule)
    violations: list[ConstraintViolation] = []

    for u, (user, user_states) in enumerate(zip(problem.users, schedule.states, strict=True)):
        for h in range(problem.hours):
            drawn = sum(load.energy * states[h] for load, states in zip(user.loads, user_states, strict=True))
            if drawn > user.e_max:
                violations.append(ConstraintViolation(ConstraintKind.POWER_LIMIT, u, None, h, drawn, user.e_max))

        for li, (load, states) in enumerate(zip(user.loads, user_states, strict=True)):
            on_hours = sum(states)
            if on_hours != load.working_time:
                violations.append(
                    ConstraintViolation(ConstraintKind.WORKING_TIME, u, li, None, on_hours, load.working_time)
                )

    return AdmissibilityReport(admissible=not violations, violations=violations)


def _user_patterns(problem: ProsumerProblem, u: int) -> list[tuple[tuple[int, ...], ...]]:
    """All per-load on/off patterns of one user meeting working times and the user's power limit."""
    user = problem.users[u]
    per_load = []
    for load in user.loads:
        if load.working_time < 0 or load.working_time > problem.hours:
            return []
        per_load.append(
            [
                tuple(1 if h in hours_on else 0 for h in range(problem.hours))
                for hours_on in itertools.combinations(range(problem.hours), load.working_time)
            ]
        )

    patterns = []
    for combo in itertools.product(*per_load):
        if all(
            sum(load.energy * states[h] for load, states in zip(user.loads, combo, strict=True)) <= user.e_max
            for h in range(problem.hours)
        ):
            patterns.append(combo)
    return patterns


def enumerate_admissible(problem: ProsumerProblem, limit: int | None = None) -> list[ScoredSchedule]:
    """
    Exhaustive admissible set, sorted by cost then by bitstring.

    Working-time patterns are generated directly as hour combinations and pruned
    per user by the power limit, so the scan visits admissible candidates only;
    the result equals filtering all 2^(H * loads) assignments through is_admissible.

    Args:
        problem: Problem instance
        limit: Maximum number of schedule bits (defaults to EXHAUSTIVE_LIMIT_BITS)

    Returns:
        Admissible schedules paired with their cost
    """
    limit = settings.EXHAUSTIVE_LIMIT_BITS if limit is None else limit
    if problem.num_schedule_bits > limit:
        raise SizeLimitExceededError(
            f"Exhaustive enumeration over {problem.num_schedule_bits} bits exceeds the limit of {limit}"
        )

    per_user = [_user_patterns(problem, u) for u in range(len(problem.users))]
    scored = []
    for combo in itertools.product(*per_user):
        schedule = Schedule(tuple(combo))
        scored.append(ScoredSchedule(schedule, schedule_cost(problem, schedule)))

    scored.sort(key=lambda item: (item.cost, item.schedule.bitstring()))
    logger.debug(f"Enumerated {len(scored)} admissible schedules over {problem.num_schedule_bits} bits")
    return scored


def optimal_schedules(problem: ProsumerProblem, limit: int | None = None) -> tuple[Fraction | None, list[Schedule]]:
    """
    Minimum cost and every schedule attaining it.

    Returns:
        (min cost, schedules); (None, []) when no admissible schedule exists
    """
    scored = enumerate_admissible(problem, limit)
    if not scored:
        return None, []
    best = scored[0].cost
    return best, [item.schedule for item in scored if item.cost == best]
