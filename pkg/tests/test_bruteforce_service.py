import itertools
from fractions import Fraction

import numpy as np
import pytest

from app.core.exceptions import SizeLimitExceededError
from app.services.bruteforce_service import (
    bitstring_to_index,
    diagonal,
    ground_states,
    index_to_bitstring,
    spin_column,
)
from app.services.problem_service import optimal_schedules
from app.services.transform_service import SpinModel, bits_to_spins, compile_problem, decode_solution, spin_energy
from tests.oracles import hamiltonian_matrix


def test_three_spin_diagonal(three_spin_model):
    spectrum = diagonal(three_spin_model)
    assert spectrum.energies == [-3, -3, 9, 1, 3, 3, -1, -9]
    assert spectrum.values.tolist() == [-3.0, -3.0, 9.0, 1.0, 3.0, 3.0, -1.0, -9.0]


def test_three_spin_ground_state(three_spin_model):
    ground = ground_states(three_spin_model)
    assert ground.energy == -9
    assert ground.indices == [7]
    assert ground.bitstrings == ["111"]


def test_diagonal_matches_dense_hamiltonian(three_spin_model):
    np.testing.assert_allclose(np.diag(hamiltonian_matrix(three_spin_model)).real, diagonal(three_spin_model).values)


def test_diagonal_keeps_rational_energies():
    model = SpinModel.from_terms(2, [Fraction(1, 2), Fraction(-1, 3)], {(0, 1): Fraction(1, 4)}, offset=Fraction(1, 6))
    spectrum = diagonal(model)
    for index in range(4):
        spins = bits_to_spins(index_to_bitstring(index, 2))
        assert spectrum.energy(index) == spin_energy(model, spins)


def test_spin_column_convention():
    assert spin_column(3, 0).tolist() == [1, 1, 1, 1, -1, -1, -1, -1]
    assert spin_column(3, 2).tolist() == [1, -1, 1, -1, 1, -1, 1, -1]
    assert bitstring_to_index("110") == 6
    assert index_to_bitstring(6, 3) == "110"


def test_constant_model_is_degenerate():
    ground = ground_states(SpinModel.from_terms(2, offset=4))
    assert ground.energy == 4
    assert ground.bitstrings == ["00", "01", "10", "11"]


def test_ground_states_decode_to_optimal_schedules(any_worked_example):
    _, spin, registry = compile_problem(any_worked_example)
    cost, schedules = optimal_schedules(any_worked_example)
    ground = ground_states(spin)

    assert ground.energy == cost
    decoded = sorted(decode_solution(registry, bits).schedule.bitstring() for bits in ground.bitstrings)
    assert decoded == sorted(schedule.bitstring() for schedule in schedules)


def test_diagonal_agrees_with_spin_energy_on_worked_example(problem_h2):
    _, spin, _ = compile_problem(problem_h2)
    spectrum = diagonal(spin)
    for index, bits in enumerate(itertools.product([0, 1], repeat=4)):
        assert spectrum.energy(index) == spin_energy(spin, bits_to_spins(bits))


def test_diagonal_respects_size_limit(three_spin_model):
    with pytest.raises(SizeLimitExceededError):
        diagonal(three_spin_model, limit=2)
