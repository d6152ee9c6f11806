"""
Exact oracle over spin models: the full diagonal of the Ising Hamiltonian and its ground states.

Basis index convention (shared by the simulator): qubit 0 is the most
significant bit of the index, bit 0 means z = +1 and bit 1 means z = -1.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache

import numpy as np

from app.core.config import settings
from app.core.exceptions import SizeLimitExceededError
from app.services.transform_service import SpinModel

logger = logging.getLogger(__name__)


def index_to_bitstring(index: int, num_qubits: int) -> str:
    return format(index, f"0{num_qubits}b") if num_qubits else ""


def bitstring_to_index(bits: str) -> int:
    return int(bits, 2) if bits else 0


def spin_column(num_qubits: int, qubit: int) -> np.ndarray:
    """z_qubit for every basis index, as a read-only int64 vector of +1/-1."""
    if num_qubits <= 16:
        return _cached_spin_column(num_qubits, qubit)
    return _build_spin_column(num_qubits, qubit)


@lru_cache(maxsize=512)
def _cached_spin_column(num_qubits: int, qubit: int) -> np.ndarray:
    return _build_spin_column(num_qubits, qubit)


def _build_spin_column(num_qubits: int, qubit: int) -> np.ndarray:
    indices = np.arange(2**num_qubits, dtype=np.int64)
    column = 1 - 2 * ((indices >> (num_qubits - 1 - qubit)) & 1)
    column.flags.writeable = False
    return column


@dataclass(frozen=True, eq=False)
class DiagonalSpectrum:
    """
    Energies of all 2^N basis states as exact fractions numerators / denominator.

    numerators has dtype int64, or object (Python ints) when int64 could overflow.
    """

    num_qubits: int
    numerators: np.ndarray
    denominator: int
    offset: Fraction

    def __len__(self) -> int:
        return len(self.numerators)

    def energy(self, index: int) -> Fraction:
        return Fraction(int(self.numerators[index]), self.denominator)

    @property
    def energies(self) -> list[Fraction]:
        return [Fraction(int(n), self.denominator) for n in self.numerators]

    @cached_property
    def values(self) -> np.ndarray:
        """Float64 view used by the simulator."""
        return np.asarray(self.numerators, dtype=np.float64) / self.denominator


def _common_denominator(model: SpinModel) -> int:
    denominators = [c.denominator for c in model.linear.values()]
    denominators += [c.denominator for c in model.quadratic.values()]
    denominators.append(model.offset.denominator)
    return math.lcm(*denominators)


def diagonal(model: SpinModel, limit: int | None = None) -> DiagonalSpectrum:
    """
    Accumulate E(z) term by term over every basis state.

    Args:
        model: Spin model
        limit: Maximum number of qubits (defaults to EXHAUSTIVE_LIMIT_BITS)
    """
    limit = settings.EXHAUSTIVE_LIMIT_BITS if limit is None else limit
    n = model.num_vars
    if n > limit:
        raise SizeLimitExceededError(f"Diagonal over {n} qubits exceeds the limit of {limit}")

    denominator = _common_denominator(model)
    scaled_linear = {i: int(c * denominator) for i, c in model.linear.items()}
    scaled_quadratic = {pair: int(c * denominator) for pair, c in model.quadratic.items()}
    scaled_offset = int(model.offset * denominator)

    bound = abs(scaled_offset) + sum(map(abs, scaled_linear.values())) + sum(map(abs, scaled_quadratic.values()))
    dtype = np.int64 if bound < 2**62 else object

    numerators = np.full(2**n, scaled_offset, dtype=dtype)
    columns: dict[int, np.ndarray] = {}

    def column(i: int) -> np.ndarray:
        if i not in columns:
            columns[i] = spin_column(n, i).astype(dtype)
        return columns[i]

    for i, a in scaled_linear.items():
        numerators += a * column(i)
    for (i, j), b in scaled_quadratic.items():
        numerators += b * (column(i) * column(j))

    return DiagonalSpectrum(num_qubits=n, numerators=numerators, denominator=denominator, offset=model.offset)


@dataclass(frozen=True)
class GroundStates:
    energy: Fraction
    bitstrings: list[str]
    indices: list[int]


def ground_states_of(spectrum: DiagonalSpectrum) -> GroundStates:
    numerators = spectrum.numerators
    minimum = numerators.min()
    indices = [int(i) for i in np.flatnonzero(numerators == minimum)]
    return GroundStates(
        energy=Fraction(int(minimum), spectrum.denominator),
        bitstrings=[index_to_bitstring(i, spectrum.num_qubits) for i in indices],
        indices=indices,
    )


def ground_states(model: SpinModel, limit: int | None = None) -> GroundStates:
    """Minimum energy and all argmin basis states in ascending index order."""
    return ground_states_of(diagonal(model, limit))
