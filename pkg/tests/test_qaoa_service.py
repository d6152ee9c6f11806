import statistics

import numpy as np
import pytest

from app.core.exceptions import MetricsContractError
from app.schemas.optimizer import ObjectiveMode, OptimizerConfig
from app.services.bruteforce_service import diagonal
from app.services.problem_service import Schedule, is_admissible
from app.services.qaoa_service import (
    QaoaParams,
    ansatz_state,
    compute_metrics,
    objective,
    optimize,
    project_counts,
    ranked_solutions,
    run_qaoa,
)
from app.services.simulator_service import energy_variance, uniform_state
from app.services.transform_service import SpinModel, build_registry
from tests.oracles import assert_equal_up_to_phase, cost_circuit, hadamard_circuit, mixer_circuit

SINGLE_SPIN = SpinModel.from_terms(1, [1])


# ============================================================================
# Ansatz and objective
# ============================================================================


def test_params_vector_layout():
    params = QaoaParams.from_vector([0.1, 0.2, 0.3, 0.4])
    assert params.gammas == (0.1, 0.2)
    assert params.betas == (0.3, 0.4)
    assert params.to_vector().tolist() == [0.1, 0.2, 0.3, 0.4]
    with pytest.raises(ValueError):
        QaoaParams((0.1,), ())


def test_zero_angles_give_uniform_state(three_spin_model):
    state = ansatz_state(three_spin_model, QaoaParams.zeros(3))
    np.testing.assert_allclose(state.amplitudes, uniform_state(3).amplitudes, atol=1e-12)


def test_ansatz_matches_dense_circuit(three_spin_model):
    params = QaoaParams((0.4, -1.2), (0.9, 0.25))
    zero = np.zeros(8, dtype=np.complex128)
    zero[0] = 1
    expected = hadamard_circuit(3) @ zero
    for gamma, beta in zip(params.gammas, params.betas, strict=True):
        expected = mixer_circuit(beta, 3) @ (cost_circuit(three_spin_model, gamma) @ expected)

    assert_equal_up_to_phase(ansatz_state(three_spin_model, params).amplitudes, expected)
    assert ansatz_state(three_spin_model, params).is_normalized()


@pytest.mark.parametrize("gamma, beta", [(np.pi / 4, 3 * np.pi / 4), (3 * np.pi / 4, np.pi / 4)])
def test_single_spin_reaches_its_ground_state(gamma, beta):
    params = QaoaParams((gamma,), (beta,))
    probabilities = ansatz_state(SINGLE_SPIN, params).probabilities()
    np.testing.assert_allclose(probabilities, [0, 1], atol=1e-12)
    assert objective(SINGLE_SPIN, params) == pytest.approx(-1)


def test_single_spin_at_equal_quarter_angles_is_excited():
    # E(gamma, beta) = sin(2 gamma) sin(2 beta) for this model
    assert objective(SINGLE_SPIN, QaoaParams((np.pi / 4,), (np.pi / 4,))) == pytest.approx(1)


def test_objective_at_zero_angles_is_uniform_mean(three_spin_model):
    assert abs(objective(three_spin_model, QaoaParams.zeros(2))) < 1e-12


def test_objective_is_bounded_by_ground_energy(three_spin_model):
    rng = np.random.default_rng(0)
    for _ in range(20):
        params = QaoaParams.from_vector(rng.uniform(0, 2 * np.pi, 4))
        assert objective(three_spin_model, params) >= -9 - 1e-9


def test_exact_objective_is_repeatable(three_spin_model):
    params = QaoaParams((0.3,), (1.1,))
    assert objective(three_spin_model, params) == objective(three_spin_model, params)


def test_sampled_objective_tracks_exact_value(three_spin_model):
    params = QaoaParams((0.4,), (0.3,))
    shots = 20_000
    sampled = objective(three_spin_model, params, ObjectiveMode.SAMPLED, shots=shots, seed=5)
    exact = objective(three_spin_model, params)
    spread = np.sqrt(energy_variance(ansatz_state(three_spin_model, params), diagonal(three_spin_model)) / shots)

    assert sampled == objective(three_spin_model, params, ObjectiveMode.SAMPLED, shots=shots, seed=5)
    assert abs(sampled - exact) < 5 * spread


# ============================================================================
# Optimizer
# ============================================================================


def test_optimizer_finds_single_spin_minimum():
    outcome = optimize(SINGLE_SPIN, reps=1, config=OptimizerConfig(restarts=3, seed=0))
    assert outcome.value <= -0.99
    assert len(outcome.trace) == 3
    assert outcome.evaluations == sum(restart.evaluations for restart in outcome.trace)
    assert outcome.value == min(restart.value for restart in outcome.trace)


def test_constant_model_needs_one_evaluation():
    outcome = optimize(SpinModel.from_terms(2, offset=7), reps=2, config=OptimizerConfig())
    assert outcome.value == pytest.approx(7)
    assert outcome.evaluations == 1


def test_evaluation_budget_is_respected(three_spin_model):
    config = OptimizerConfig(restarts=2, max_evaluations=25, seed=1)
    outcome = optimize(three_spin_model, reps=2, config=config)
    # a shrink step may overrun the budget by one simplex
    assert all(restart.evaluations <= 25 + 4 for restart in outcome.trace)


def test_optimizer_is_deterministic(three_spin_model):
    config = OptimizerConfig(restarts=2, seed=9)
    first = optimize(three_spin_model, reps=2, config=config)
    second = optimize(three_spin_model, reps=2, config=config)
    assert first.params == second.params
    assert first.value == second.value


# ============================================================================
# Metrics
# ============================================================================


def test_metrics_arithmetic():
    assert compute_metrics({"a": 10}, {"a"}, {"a"}) == (1.0, 1.0)
    counts = {"opt": 100, "adm": 200, "bad": 700}
    assert compute_metrics(counts, {"opt"}, {"opt", "adm"}) == pytest.approx((0.1, 0.3))


def test_metrics_contract():
    with pytest.raises(MetricsContractError):
        compute_metrics({}, {"a"}, {"a"})
    with pytest.raises(MetricsContractError):
        compute_metrics({"a": 1}, {"a", "b"}, {"a"})


def test_project_counts_merges_slack_bits():
    assert project_counts({"0110": 3, "0111": 4, "1000": 1}, 3) == {"011": 7, "100": 1}


def test_ranked_solutions_orders_by_cost_then_frequency(problem_h2):
    registry = build_registry(problem_h2)
    counts = {"0111": 5, "1011": 9, "1111": 30, "1000": 2}
    ranked = ranked_solutions(counts, problem_h2, registry)
    assert [(item.schedule_bits, item.count, item.cost) for item in ranked] == [("1011", 9, "84"), ("0111", 5, "84")]


# ============================================================================
# End-to-end runs
# ============================================================================


def test_run_on_spin_model(three_spin_model):
    config = OptimizerConfig(restarts=2, seed=3)
    result = run_qaoa(three_spin_model, reps=2, shots=2048, config=config)

    assert sum(result.counts.values()) == 2048
    assert result.p_adm == 1.0
    assert 0 <= result.p_best <= result.p_adm
    assert result.ground_energy == -9
    assert result.most_frequent_energy >= result.ground_energy
    assert (result.most_frequent_energy == result.ground_energy) == (result.most_frequent == "111")
    assert len(result.gammas) == len(result.betas) == 2


def test_run_on_problem_scores_schedule_bits(problem_h2):
    config = OptimizerConfig(restarts=2, seed=0)
    result = run_qaoa(problem_h2, reps=2, shots=1024, config=config)

    assert result.num_qubits == 4
    assert 0 <= result.p_best <= result.p_adm <= 1
    for solution in result.top_solutions:
        assert is_admissible(problem_h2, Schedule.from_bits(problem_h2, solution.schedule_bits))
        assert solution.cost == "84"


def test_run_is_reproducible(problem_h2):
    config = OptimizerConfig(restarts=2, seed=4)
    first = run_qaoa(problem_h2, reps=1, shots=512, config=config)
    second = run_qaoa(problem_h2, reps=1, shots=512, config=config)
    assert first.model_dump(exclude={"wall_time_ms"}) == second.model_dump(exclude={"wall_time_ms"})


# ============================================================================
# Statistical acceptance (pytest -m slow)
# ============================================================================


def _median_p_best(problem, reps: int, runs: int = 20) -> float:
    return statistics.median(
        run_qaoa(problem, reps, 4096, OptimizerConfig(restarts=5, seed=seed)).p_best for seed in range(runs)
    )


@pytest.mark.slow
def test_noiseless_success_grows_with_repetitions(problem_h2):
    deep = _median_p_best(problem_h2, reps=20)
    shallow = _median_p_best(problem_h2, reps=2)
    assert deep >= 0.8
    assert deep > shallow



@pytest.mark.slow
def test_deep_circuit_success_rates_on_four_hours(problem_h4):
    results = [
        run_qaoa(problem_h4, 50, 4096, OptimizerConfig(restarts=10, seed=seed, max_evaluations=2500))
        for seed in range(20)
    ]
    p_adm = statistics.median(result.p_adm for result in results)
    p_best = statistics.median(result.p_best for result in results)
    assert 0.4 <= p_adm <= 0.8
    assert 0.03 <= p_best <= 0.2
