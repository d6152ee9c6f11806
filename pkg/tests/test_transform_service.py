import itertools
from fractions import Fraction

import numpy as np
import pytest

from app.core.exceptions import DimensionMismatchError, InvalidProblemError
from app.schemas.problem import Load, ProsumerProblem, User
from app.services.bruteforce_service import ground_states
from app.services.problem_service import Schedule, is_admissible, optimal_schedules, schedule_cost
from app.services.transform_service import (
    DecodedSolution,
    LoadVar,
    QuadraticBinaryModel,
    SlackVar,
    SpinModel,
    bits_to_spins,
    build_qubo,
    build_registry,
    compile_problem,
    decode_solution,
    encode_solution,
    format_exact,
    penalty_coefficient,
    qubo_to_spin,
    slack_weights,
    spin_energy,
    spins_to_bitstring,
)
from tests.conftest import worked_example


@pytest.fixture
def slack_problem() -> ProsumerProblem:
    """Two 2 kW loads under e_max 3: the power limit is binding and needs slack bits (1, 2) per hour."""
    return ProsumerProblem(
        hours=2,
        prices=[10, 12],
        users=[User(e_max=3, loads=[Load(energy=2, working_time=1), Load(energy=2, working_time=1)])],
    )


@pytest.fixture
def two_user_problem() -> ProsumerProblem:
    """e_max 2 gives slack weights (1, 1), so residual 1 has two encodings; the second user needs no slack."""
    return ProsumerProblem(
        hours=2,
        prices=[3, 5],
        users=[
            User(e_max=2, loads=[Load(energy=1, working_time=1), Load(energy=2, working_time=1)]),
            User(e_max=1, loads=[Load(energy=1, working_time=1)]),
        ],
    )


# ============================================================================
# Registry and slack encoding
# ============================================================================


@pytest.mark.parametrize(
    "e_max, expected",
    [(1, (1,)), (2, (1, 1)), (3, (1, 2)), (4, (1, 2, 1)), (5, (1, 2, 2)), (8, (1, 2, 4, 1))],
)
def test_slack_weights(e_max, expected):
    assert slack_weights(e_max) == expected


def test_slack_encoding_reaches_exactly_zero_to_e_max():
    for e_max in range(1, 65):
        weights = slack_weights(e_max)
        reachable = {
            sum(w for w, bit in zip(weights, bits, strict=True) if bit)
            for bits in itertools.product([0, 1], repeat=len(weights))
        }
        assert reachable == set(range(e_max + 1)), e_max


def test_worked_example_needs_no_slack(any_worked_example):
    registry = build_registry(any_worked_example)
    assert registry.num_vars == 2 * any_worked_example.hours
    assert registry.num_load_vars == registry.num_vars
    assert {row["kind"] for row in registry.to_json()} == {"load"}


def test_registry_orders_loads_then_slack(slack_problem):
    registry = build_registry(slack_problem)

    assert registry.num_vars == 8
    assert registry.entries[:4] == (LoadVar(0, 0, 0), LoadVar(0, 0, 1), LoadVar(0, 1, 0), LoadVar(0, 1, 1))
    assert registry.entries[4:] == (
        SlackVar(0, 0, 1, 1),
        SlackVar(0, 0, 2, 2),
        SlackVar(0, 1, 1, 1),
        SlackVar(0, 1, 2, 2),
    )
    assert [i for i, _ in registry.slack_bits(0, 1)] == [6, 7]
    assert registry.load_index(0, 1, 0) == 2


# ============================================================================
# Penalty and QUBO
# ============================================================================


@pytest.mark.parametrize("hours, expected", [(2, 127), (4, 262), (5, 334)])
def test_penalty_coefficient(hours, expected):
    assert penalty_coefficient(worked_example(hours)) == expected


def test_penalty_with_zero_prices_is_one():
    problem = ProsumerProblem(hours=2, prices=[0, 0], users=[User(e_max=1, loads=[Load(energy=1, working_time=1)])])
    assert penalty_coefficient(problem) == 1


def test_single_load_single_hour_qubo():
    problem = ProsumerProblem(hours=1, prices=[10], users=[User(e_max=1, loads=[Load(energy=1, working_time=1)])])
    qubo, _ = build_qubo(problem)

    assert qubo.penalty == 11
    assert qubo.value("1") == 10
    assert qubo.value("0") == 11


def test_build_qubo_rejects_invalid_problem():
    problem = ProsumerProblem(hours=1, prices=[10], users=[User(e_max=1, loads=[Load(energy=1, working_time=2)])])
    with pytest.raises(InvalidProblemError):
        build_qubo(problem)


def test_qubo_value_is_cost_plus_scaled_residuals(problem_h4):
    qubo, _ = build_qubo(problem_h4)
    for bits in itertools.product([0, 1], repeat=8):
        schedule = Schedule.from_bits(problem_h4, bits)
        residual_2kw = sum(bits[:4]) - 1
        residual_1kw = sum(bits[4:]) - 2
        expected = schedule_cost(problem_h4, schedule) + 262 * (residual_2kw**2 + residual_1kw**2)
        assert qubo.value(bits) == expected


# ============================================================================
# Ising form
# ============================================================================


def test_four_hour_ising_coefficients(problem_h4):
    _, spin, _ = compile_problem(problem_h4)

    expected_linear = [-283, -283, -284, -285, Fraction(-21, 2), Fraction(-21, 2), -11, Fraction(-23, 2)]
    assert spin.linear_vector() == expected_linear
    # Couplings only arise between the hours of one load (no slack, so no power-limit terms)
    expected_pairs = [(i, j) for block in (range(4), range(4, 8)) for i, j in itertools.combinations(block, 2)]
    assert sorted(spin.quadratic) == expected_pairs
    assert set(spin.quadratic.values()) == {131}


def test_spin_energy_equals_qubo_value_everywhere(any_worked_example, slack_problem):
    for problem in (any_worked_example, slack_problem):
        qubo, spin, _ = compile_problem(problem)
        for bits in itertools.product([0, 1], repeat=qubo.num_vars):
            assert qubo.value(bits) == spin_energy(spin, bits_to_spins(bits))


def test_random_qubo_to_spin_equivalence():
    rng = np.random.default_rng(7)
    qubo = QuadraticBinaryModel(num_vars=6, constant=Fraction(3, 7))
    for i in range(6):
        qubo.add_linear(i, Fraction(int(rng.integers(-20, 20)), int(rng.integers(1, 5))))
    for i, j in itertools.combinations(range(6), 2):
        qubo.add_quadratic(i, j, Fraction(int(rng.integers(-20, 20)), int(rng.integers(1, 5))))

    spin = qubo_to_spin(qubo)
    for bits in itertools.product([0, 1], repeat=6):
        assert qubo.value(bits) == spin_energy(spin, bits_to_spins(bits))


def test_empty_qubo_gives_zero_spin_model():
    spin = qubo_to_spin(QuadraticBinaryModel(num_vars=3))
    assert spin.is_constant()
    assert spin.offset == 0


def _residuals_match_schedule(problem: ProsumerProblem, decoded: DecodedSolution) -> bool:
    """Admissible, and every slack register holds e_max minus the power drawn at its hour."""
    if not is_admissible(problem, decoded.schedule):
        return False
    for (u, h), residual in decoded.residuals.items():
        user = problem.users[u]
        user_states = decoded.schedule.states[u]
        drawn = sum(load.energy * states[h] for load, states in zip(user.loads, user_states, strict=True))
        if residual != user.e_max - drawn:
            return False
    return True


def _assert_penalty_gap(problem: ProsumerProblem) -> None:
    qubo, registry = build_qubo(problem)
    feasible, infeasible = [], []
    for bits in itertools.product([0, 1], repeat=registry.num_vars):
        decoded = decode_solution(registry, bits)
        consistent = _residuals_match_schedule(problem, decoded)
        (feasible if consistent else infeasible).append(qubo.value(bits))
        if consistent:
            assert qubo.value(bits) == schedule_cost(problem, decoded.schedule)
    assert feasible and infeasible
    assert min(infeasible) > max(feasible)


def test_penalty_separates_admissible_from_inadmissible(any_worked_example, slack_problem):
    for problem in (any_worked_example, slack_problem):
        _assert_penalty_gap(problem)


def test_penalty_gap_with_repeated_slack_weights(two_user_problem):
    assert slack_weights(2) == (1, 1)
    _, registry = build_qubo(two_user_problem)
    assert registry.num_vars == 10
    assert registry.num_vars - registry.num_load_vars == 4

    _assert_penalty_gap(two_user_problem)


def test_ground_energy_matches_optimal_cost_with_repeated_slack_weights(two_user_problem):
    _, spin, registry = compile_problem(two_user_problem)
    ground = ground_states(spin)
    min_cost, optimal = optimal_schedules(two_user_problem)

    assert ground.energy == min_cost == 14
    decoded = {decode_solution(registry, bits).schedule for bits in ground.bitstrings}
    assert decoded == set(optimal)
    # residual 1 has two encodings under weights (1, 1)
    assert len(ground.bitstrings) > len(optimal)


def test_spin_energy_on_three_spin_model(three_spin_model):
    assert spin_energy(three_spin_model, [1, 1, 1]) == -3
    assert spin_energy(three_spin_model, [-1, -1, -1]) == -9
    with pytest.raises(DimensionMismatchError):
        spin_energy(three_spin_model, [1, 1])


def test_from_terms_normalizes_and_merges_pairs():
    model = SpinModel.from_terms(3, {0: 1, 2: 0}, {(1, 0): 2, (0, 1): 3, (2, 1): -1, (1, 1): 5})
    assert model.linear == {0: 1}
    assert model.quadratic == {(0, 1): 5, (1, 2): -1}
    assert model.offset == 5
    with pytest.raises(IndexError):
        model.add_quadratic(0, 3, Fraction(1))


def test_spin_json_uses_exact_strings(problem_h4):
    _, spin, _ = compile_problem(problem_h4)
    payload = spin.to_json()
    assert payload["n"] == 8
    assert payload["linear"]["4"] == "-10.5"
    assert payload["quadratic"]["0,1"] == "131"


@pytest.mark.parametrize(
    "value, text",
    [(Fraction(131), "131"), (Fraction(-21, 2), "-10.5"), (Fraction(1, 8), "0.125"), (Fraction(-1, 4), "-0.25"), (Fraction(1, 3), "1/3")],
)
def test_format_exact(value, text):
    assert format_exact(value) == text


# ============================================================================
# Decoding
# ============================================================================


def test_decode_optimal_bitstring(problem_h4):
    registry = build_registry(problem_h4)
    decoded = decode_solution(registry, "10001100")
    assert decoded.schedule.states == (((1, 0, 0, 0), (1, 1, 0, 0)),)
    assert decoded.residuals == {}
    assert decode_solution(registry, "0" * 8).schedule == Schedule.all_off(problem_h4)


def test_decode_reassembles_slack_residuals(slack_problem):
    registry = build_registry(slack_problem)
    decoded = decode_solution(registry, "1001" + "01" + "11")
    assert decoded.residuals == {(0, 0): 2, (0, 1): 3}
    with pytest.raises(DimensionMismatchError):
        decode_solution(registry, "1001")


def test_encode_inverts_decode(slack_problem):
    _, registry = build_qubo(slack_problem)
    for bits in itertools.product("01", repeat=registry.num_vars):
        bitstring = "".join(bits)
        decoded = decode_solution(registry, bitstring)
        assert encode_solution(slack_problem, registry, decoded.schedule, decoded.residuals) == bitstring


def test_encode_fills_consistent_slack(slack_problem):
    registry = build_registry(slack_problem)
    schedule = Schedule.from_bits(slack_problem, "1001")
    bits = encode_solution(slack_problem, registry, schedule)
    # 2 kW drawn each hour leaves a residual of 1: slack bits (1, 0)
    assert bits == "1001" + "10" + "10"
    assert spins_to_bitstring(bits_to_spins(bits)) == bits
