"""
Exact statevector engine for the QAOA ansatz.

Layers: uniform superposition (Hadamard on every qubit), cost phase
exp(-i * gamma * H_C) applied as a diagonal multiply, and the mixer Rx(2 * beta)
on every qubit. Basis indexing follows bruteforce_service (qubit 0 is the most
significant bit, bit 1 means z = -1).

A diagonal phase multiply equals the Rz / ZZ-rotation gate sequence of the
circuit up to the global phase exp(-i * gamma * offset).
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from app.core.config import settings
from app.core.exceptions import DimensionMismatchError, SizeLimitExceededError
from app.schemas.results import CircuitResources
from app.services.bruteforce_service import DiagonalSpectrum, index_to_bitstring, spin_column
from app.services.transform_service import SpinModel

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class Statevector:
    """2^N complex128 amplitudes of an N-qubit register"""

    amplitudes: np.ndarray

    @property
    def num_qubits(self) -> int:
        return int(self.amplitudes.size).bit_length() - 1

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        return float(np.sqrt(self.probabilities().sum()))

    def is_normalized(self, tolerance: float | None = None) -> bool:
        tolerance = settings.NORM_TOLERANCE if tolerance is None else tolerance
        return abs(self.norm() - 1.0) <= tolerance


def _check_size(n: int, limit: int | None) -> None:
    limit = settings.STATEVECTOR_QUBIT_LIMIT if limit is None else limit
    if n < 1:
        raise ValueError(f"A register needs at least one qubit, got {n}")
    if n > limit:
        raise SizeLimitExceededError(f"Statevector over {n} qubits exceeds the limit of {limit}")


def uniform_state(n: int, limit: int | None = None) -> Statevector:
    _check_size(n, limit)
    dim = 2**n
    return Statevector(np.full(dim, 1 / np.sqrt(dim), dtype=np.complex128))


def basis_state(n: int, index: int, limit: int | None = None) -> Statevector:
    _check_size(n, limit)
    amplitudes = np.zeros(2**n, dtype=np.complex128)
    amplitudes[index] = 1.0
    return Statevector(amplitudes)


def _check_diagonal(state: Statevector, diag: DiagonalSpectrum) -> None:
    if len(diag) != state.amplitudes.size:
        raise DimensionMismatchError(
            f"Diagonal has {len(diag)} entries, state has {state.amplitudes.size} amplitudes"
        )


def apply_cost_layer(state: Statevector, diag: DiagonalSpectrum, gamma: float) -> Statevector:
    """amplitude[b] * exp(-i * gamma * E[b])"""
    _check_diagonal(state, diag)
    return Statevector(state.amplitudes * np.exp(-1j * gamma * diag.values))


def apply_mixer_layer(state: Statevector, beta: float) -> Statevector:
    """Rx(2 beta) = [[cos b, -i sin b], [-i sin b, cos b]] on every qubit."""
    n = state.num_qubits
    c, s = np.cos(beta), np.sin(beta)
    amplitudes = state.amplitudes.copy()
    for qubit in range(n):
        view = amplitudes.reshape(2**qubit, 2, 2 ** (n - qubit - 1))
        zero = view[:, 0, :].copy()
        one = view[:, 1, :]
        view[:, 0, :] = c * zero - 1j * s * one
        view[:, 1, :] = c * one - 1j * s * zero
    return Statevector(amplitudes)


def expectation(state: Statevector, diag: DiagonalSpectrum) -> float:
    _check_diagonal(state, diag)
    return float(np.dot(state.probabilities(), diag.values))


def energy_variance(state: Statevector, diag: DiagonalSpectrum) -> float:
    _check_diagonal(state, diag)
    probs = state.probabilities()
    mean = float(np.dot(probs, diag.values))
    return float(np.dot(probs, (diag.values - mean) ** 2))


def sample(state: Statevector, shots: int, seed: int | Sequence[int]) -> dict[str, int]:
    """
    Multinomial measurement counts drawn with numpy's PCG64 generator.

    Returns:
        bitstring -> count for every observed outcome, in ascending bitstring order
    """
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    if not state.is_normalized():
        logger.warning(f"⚠️ Sampling a state with norm {state.norm():.12f}, renormalizing")
    probs = state.probabilities()
    probs = probs / probs.sum()
    rng = np.random.default_rng(seed)
    draws = rng.multinomial(shots, probs)
    n = state.num_qubits
    return {index_to_bitstring(int(i), n): int(draws[i]) for i in np.flatnonzero(draws)}


def zz_expectation(state: Statevector, i: int, j: int) -> float:
    """<Z_i Z_j> on the state, in [-1, 1]."""
    n = state.num_qubits
    if i == j:
        raise ValueError("zz_expectation needs two distinct qubits")
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"Qubit pair ({i}, {j}) out of range for {n} qubits")
    parity = spin_column(n, i) * spin_column(n, j)
    return float(np.dot(state.probabilities(), parity))


def circuit_resources(model: SpinModel, reps: int) -> CircuitResources:
    """
    Gate counts of the QAOA circuit: N Hadamards, then per repetition one Rz per
    linear term, one ZZ rotation per coupling and one Rx per qubit.

    ZZ rotations on disjoint qubits share a layer; layers come from a greedy edge
    colouring, so depth_bound is an upper bound on the circuit depth.
    """
    n = model.num_vars
    colours: dict[tuple[int, int], int] = {}
    used: dict[int, set[int]] = {q: set() for q in range(n)}
    for i, j in sorted(model.quadratic):
        colour = 0
        while colour in used[i] or colour in used[j]:
            colour += 1
        colours[(i, j)] = colour
        used[i].add(colour)
        used[j].add(colour)
    zz_layers = max(colours.values()) + 1 if colours else 0
    rz_layer = 1 if model.linear else 0

    return CircuitResources(
        num_qubits=n,
        reps=reps,
        hadamard_gates=n,
        rx_gates=n * reps,
        rz_gates=len(model.linear) * reps,
        zz_gates=len(model.quadratic) * reps,
        zz_layers=zz_layers,
        depth_bound=1 + reps * (rz_layer + zz_layers + 1),
    )
