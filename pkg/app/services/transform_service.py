"""
Compiler from the prosumer problem to a penalized QUBO and to an Ising spin model.

The power-limit inequalities become equalities through binary slack variables,
both constraint families are added as squared residuals scaled by the penalty
coefficient A = 1 + C_up - C_low, and the binary model is rewritten over spins
with x = (1 - z) / 2. All coefficients are exact fractions.
"""

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from fractions import Fraction

from app.core.exceptions import DimensionMismatchError
from app.schemas.problem import ProsumerProblem
from app.services.problem_service import Schedule, ensure_valid

logger = logging.getLogger(__name__)

Pair = tuple[int, int]


# ============================================================================
# Variable registry
# ============================================================================


@dataclass(frozen=True)
class LoadVar:
    user: int
    load: int
    hour: int

    def label(self) -> str:
        return f"x[u{self.user},l{self.load},h{self.hour}]"


@dataclass(frozen=True)
class SlackVar:
    user: int
    hour: int
    bit: int
    weight: int

    def label(self) -> str:
        return f"y[u{self.user},h{self.hour},m{self.bit}]"


def slack_weights(e_max: int) -> tuple[int, ...]:
    """
    Weights of the binary expansion of a residual in [0, e_max].

    With N_res = e_max + 1 values and M = ceil(log2 N_res) bits, bit m < M
    weighs 2^(m-1) and bit M weighs N_res - 2^(M-1). The weights sum to e_max
    and every value in [0, e_max] is reachable.
    """
    n_res = e_max + 1
    m = (n_res - 1).bit_length()
    return tuple(2 ** (k - 1) for k in range(1, m)) + (n_res - 2 ** (m - 1),)


def needs_slack(problem: ProsumerProblem, u: int) -> bool:
    """A user whose loads can never exceed e_max has an always-satisfied power constraint."""
    user = problem.users[u]
    return sum(load.energy for load in user.loads) > user.e_max


@dataclass(frozen=True)
class VariableRegistry:
    """
    Bijection between model variables and qubit indices.

    Load variables come first in canonical (user, load, hour) order, then slack
    bits grouped by (user, hour) with bit index ascending. Indices are 0-based.
    """

    hours: int
    loads_per_user: tuple[int, ...]
    entries: tuple[LoadVar | SlackVar, ...]
    _index: dict[LoadVar | SlackVar, int] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        self._index.update({entry: i for i, entry in enumerate(self.entries)})

    @property
    def num_vars(self) -> int:
        return len(self.entries)

    @property
    def num_load_vars(self) -> int:
        return self.hours * sum(self.loads_per_user)

    def index_of(self, entry: LoadVar | SlackVar) -> int:
        return self._index[entry]

    def load_index(self, user: int, load: int, hour: int) -> int:
        return self._index[LoadVar(user, load, hour)]

    def slack_bits(self, user: int, hour: int) -> list[tuple[int, SlackVar]]:
        return [
            (i, entry)
            for i, entry in enumerate(self.entries)
            if isinstance(entry, SlackVar) and entry.user == user and entry.hour == hour
        ]

    def to_json(self) -> list[dict]:
        rows = []
        for i, entry in enumerate(self.entries):
            if isinstance(entry, LoadVar):
                rows.append({"index": i, "kind": "load", "user": entry.user, "load": entry.load, "hour": entry.hour})
            else:
                rows.append(
                    {
                        "index": i,
                        "kind": "slack",
                        "user": entry.user,
                        "hour": entry.hour,
                        "bit": entry.bit,
                        "weight": entry.weight,
                    }
                )
        return rows


def build_registry(problem: ProsumerProblem) -> VariableRegistry:
    entries: list[LoadVar | SlackVar] = [
        LoadVar(u, li, h)
        for u, user in enumerate(problem.users)
        for li in range(len(user.loads))
        for h in range(problem.hours)
    ]
    for u, user in enumerate(problem.users):
        if not needs_slack(problem, u):
            continue
        weights = slack_weights(user.e_max)
        for h in range(problem.hours):
            entries.extend(SlackVar(u, h, m, w) for m, w in enumerate(weights, start=1))

    return VariableRegistry(
        hours=problem.hours,
        loads_per_user=tuple(len(user.loads) for user in problem.users),
        entries=tuple(entries),
    )


# ============================================================================
# Binary and spin models
# ============================================================================


def _normalize_pair(i: int, j: int) -> Pair:
    return (i, j) if i < j else (j, i)


@dataclass
class QuadraticBinaryModel:
    """
    QUBO with exact coefficients: sum linear[i] x_i + sum quadratic[i,j] x_i x_j + constant.

    Quadratic keys are normalized to i < j; self-pairs fold into the linear part
    since x^2 = x. Zero coefficients are not stored.
    """

    num_vars: int
    linear: dict[int, Fraction] = field(default_factory=dict)
    quadratic: dict[Pair, Fraction] = field(default_factory=dict)
    constant: Fraction = Fraction(0)
    penalty: Fraction = Fraction(0)

    def add_linear(self, i: int, coeff: Fraction | int) -> None:
        value = self.linear.get(i, Fraction(0)) + coeff
        if value:
            self.linear[i] = Fraction(value)
        else:
            self.linear.pop(i, None)

    def add_quadratic(self, i: int, j: int, coeff: Fraction | int) -> None:
        if i == j:
            self.add_linear(i, coeff)
            return
        key = _normalize_pair(i, j)
        value = self.quadratic.get(key, Fraction(0)) + coeff
        if value:
            self.quadratic[key] = Fraction(value)
        else:
            self.quadratic.pop(key, None)

    def add_squared(self, terms: Sequence[tuple[int, Fraction | int]], offset: Fraction | int, scale: Fraction | int):
        """Add scale * (sum c_i x_i + offset)^2, expanded with x_i^2 = x_i."""
        for k, (i, ci) in enumerate(terms):
            self.add_linear(i, scale * (ci * ci + 2 * ci * offset))
            for j, cj in terms[k + 1 :]:
                self.add_quadratic(i, j, scale * 2 * ci * cj)
        self.constant += scale * offset * offset

    def value(self, bits: Sequence[int] | str) -> Fraction:
        x = [int(b) for b in bits]
        if len(x) != self.num_vars:
            raise DimensionMismatchError(f"Expected {self.num_vars} bits, got {len(x)}")
        total = self.constant
        total += sum((c for i, c in self.linear.items() if x[i]), Fraction(0))
        total += sum((c for (i, j), c in self.quadratic.items() if x[i] and x[j]), Fraction(0))
        return total


@dataclass
class SpinModel:
    """
    Ising model E(z) = sum a_i z_i + sum_{i<j} b_ij z_i z_j + c over z in {+1, -1}^N.

    Relative to the textbook form "sum h_i z_i - sum J_ij z_i z_j": a_i = h_i and
    b_ij = -J_ij. Spin +1 is bit 0, spin -1 is bit 1.
    """

    num_vars: int
    linear: dict[int, Fraction] = field(default_factory=dict)
    quadratic: dict[Pair, Fraction] = field(default_factory=dict)
    offset: Fraction = Fraction(0)

    @classmethod
    def from_terms(
        cls,
        num_vars: int,
        linear: dict[int, Fraction | int | float] | Iterable[Fraction | int | float] = (),
        quadratic: dict[Pair, Fraction | int | float] | None = None,
        offset: Fraction | int | float = 0,
    ) -> "SpinModel":
        """Build a model normalizing pair order, merging duplicates and dropping zeros."""
        model = cls(num_vars=num_vars, offset=Fraction(offset))
        items = linear.items() if isinstance(linear, dict) else enumerate(linear)
        for i, coeff in items:
            model.add_linear(i, Fraction(coeff))
        for (i, j), coeff in (quadratic or {}).items():
            model.add_quadratic(i, j, Fraction(coeff))
        return model

    def add_linear(self, i: int, coeff: Fraction) -> None:
        if not 0 <= i < self.num_vars:
            raise IndexError(f"Spin index {i} out of range for {self.num_vars} variables")
        value = self.linear.get(i, Fraction(0)) + coeff
        if value:
            self.linear[i] = value
        else:
            self.linear.pop(i, None)

    def add_quadratic(self, i: int, j: int, coeff: Fraction) -> None:
        if i == j:
            # z_i^2 = 1
            self.offset += coeff
            return
        if not (0 <= i < self.num_vars and 0 <= j < self.num_vars):
            raise IndexError(f"Spin pair ({i}, {j}) out of range for {self.num_vars} variables")
        key = _normalize_pair(i, j)
        value = self.quadratic.get(key, Fraction(0)) + coeff
        if value:
            self.quadratic[key] = value
        else:
            self.quadratic.pop(key, None)

    def linear_vector(self) -> list[Fraction]:
        return [self.linear.get(i, Fraction(0)) for i in range(self.num_vars)]

    def is_constant(self) -> bool:
        return not self.linear and not self.quadratic

    def to_json(self) -> dict:
        return {
            "n": self.num_vars,
            "linear": {str(i): format_exact(c) for i, c in sorted(self.linear.items())},
            "quadratic": {f"{i},{j}": format_exact(c) for (i, j), c in sorted(self.quadratic.items())},
            "offset": format_exact(self.offset),
        }


def format_exact(value: Fraction) -> str:
    """Exact decimal string for a fraction whose denominator has only factors 2 and 5, else 'p/q'."""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    d = value.denominator
    twos = fives = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return f"{value.numerator}/{value.denominator}"
    digits = max(twos, fives)
    scaled = abs(value) * 10**digits
    sign = "-" if value < 0 else ""
    whole, frac = divmod(int(scaled), 10**digits)
    return f"{sign}{whole}.{frac:0{digits}d}".rstrip("0").rstrip(".")


# ============================================================================
# Compilation
# ============================================================================


def penalty_coefficient(problem: ProsumerProblem) -> Fraction:
    """A = 1 + C_up - C_low with C_up the all-on cost and C_low the all-off cost (zero)."""
    c_up = sum(
        (Fraction(price * load.energy) for user in problem.users for load in user.loads for price in problem.prices),
        Fraction(0),
    )
    c_low = Fraction(0)
    return 1 + c_up - c_low


def build_qubo(problem: ProsumerProblem) -> tuple[QuadraticBinaryModel, VariableRegistry]:
    """
    Objective plus A times the squared residuals of every constraint.

    Power-limit residuals (sum E_l x_l^h + sum w_m y_m^h - e_max) are added only
    for users that need slack; working-time residuals (sum_h x_l^h - delta_l)
    for every load.
    """
    ensure_valid(problem)
    registry = build_registry(problem)
    penalty = penalty_coefficient(problem)
    model = QuadraticBinaryModel(num_vars=registry.num_vars, penalty=penalty)

    for u, user in enumerate(problem.users):
        for li, load in enumerate(user.loads):
            for h, price in enumerate(problem.prices):
                model.add_linear(registry.load_index(u, li, h), price * load.energy)

    for u, user in enumerate(problem.users):
        if not needs_slack(problem, u):
            continue
        for h in range(problem.hours):
            terms = [(registry.load_index(u, li, h), load.energy) for li, load in enumerate(user.loads)]
            terms += [(i, slack.weight) for i, slack in registry.slack_bits(u, h)]
            model.add_squared(terms, -user.e_max, penalty)

    for u, user in enumerate(problem.users):
        for li, load in enumerate(user.loads):
            terms = [(registry.load_index(u, li, h), 1) for h in range(problem.hours)]
            model.add_squared(terms, -load.working_time, penalty)

    logger.info(
        f"✅ Compiled QUBO: {registry.num_vars} variables "
        f"({registry.num_load_vars} load, {registry.num_vars - registry.num_load_vars} slack), A={penalty}"
    )
    return model, registry


def qubo_to_spin(model: QuadraticBinaryModel) -> SpinModel:
    """Substitute x = (1 - z) / 2; QUBO(x) equals the spin energy at z = 1 - 2x."""
    spin = SpinModel(num_vars=model.num_vars, offset=Fraction(model.constant))
    for i, c in model.linear.items():
        spin.offset += c / 2
        spin.add_linear(i, -c / 2)
    for (i, j), q in model.quadratic.items():
        quarter = q / 4
        spin.offset += quarter
        spin.add_linear(i, -quarter)
        spin.add_linear(j, -quarter)
        spin.add_quadratic(i, j, quarter)
    return spin


def spin_energy(model: SpinModel, spins: Sequence[int]) -> Fraction:
    if len(spins) != model.num_vars:
        raise DimensionMismatchError(f"Expected {model.num_vars} spins, got {len(spins)}")
    energy = model.offset
    energy += sum((c * spins[i] for i, c in model.linear.items()), Fraction(0))
    energy += sum((b * spins[i] * spins[j] for (i, j), b in model.quadratic.items()), Fraction(0))
    return energy


def bits_to_spins(bits: Sequence[int] | str) -> list[int]:
    return [1 - 2 * int(b) for b in bits]


def spins_to_bitstring(spins: Sequence[int]) -> str:
    return "".join("0" if z == 1 else "1" for z in spins)


# ============================================================================
# Decoding
# ============================================================================


@dataclass(frozen=True)
class DecodedSolution:
    schedule: Schedule
    residuals: dict[tuple[int, int], int]  # (user, hour) -> E_res reassembled from slack bits


def decode_solution(registry: VariableRegistry, bits: Sequence[int] | str) -> DecodedSolution:
    values = [int(b) for b in bits]
    if len(values) != registry.num_vars:
        raise DimensionMismatchError(f"Expected {registry.num_vars} bits, got {len(values)}")

    states = tuple(
        tuple(
            tuple(values[registry.load_index(u, li, h)] for h in range(registry.hours)) for li in range(n_loads)
        )
        for u, n_loads in enumerate(registry.loads_per_user)
    )
    residuals: dict[tuple[int, int], int] = {}
    for i, entry in enumerate(registry.entries):
        if isinstance(entry, SlackVar):
            key = (entry.user, entry.hour)
            residuals[key] = residuals.get(key, 0) + entry.weight * values[i]
    return DecodedSolution(Schedule(states), residuals)


def _encode_residual(weights: Sequence[int], residual: int) -> list[int]:
    """Slack bits representing residual; the last (irregular) weight is used only when the low bits cannot."""
    bits = [0] * len(weights)
    low_max = sum(weights[:-1])
    if residual > low_max:
        bits[-1] = 1
        residual -= weights[-1]
    for k in range(len(weights) - 2, -1, -1):
        if residual >= weights[k]:
            bits[k] = 1
            residual -= weights[k]
    if residual != 0:
        raise ValueError("Residual outside the representable range")
    return bits


def encode_solution(
    problem: ProsumerProblem,
    registry: VariableRegistry,
    schedule: Schedule,
    residuals: dict[tuple[int, int], int] | None = None,
) -> str:
    """
    Bitstring for a schedule; missing slack residuals default to e_max minus the drawn power.

    Raises ValueError when a residual cannot be represented (e.g. the schedule
    violates the power limit and no explicit residual is given).
    """
    values = [0] * registry.num_vars
    for u, user_states in enumerate(schedule.states):
        for li, load_states in enumerate(user_states):
            for h, bit in enumerate(load_states):
                values[registry.load_index(u, li, h)] = bit

    for u, user in enumerate(problem.users):
        if not needs_slack(problem, u):
            continue
        for h in range(problem.hours):
            slots = registry.slack_bits(u, h)
            if residuals is not None and (u, h) in residuals:
                residual = residuals[(u, h)]
            else:
                drawn = sum(load.energy * schedule.states[u][li][h] for li, load in enumerate(user.loads))
                residual = user.e_max - drawn
            if residual < 0:
                raise ValueError(f"Negative residual for user {u} at hour {h}")
            for (i, _), bit in zip(slots, _encode_residual([s.weight for _, s in slots], residual), strict=True):
                values[i] = bit

    return "".join(str(v) for v in values)


def compile_problem(problem: ProsumerProblem) -> tuple[QuadraticBinaryModel, SpinModel, VariableRegistry]:
    """Convenience wrapper returning the QUBO, its spin model and the registry."""
    qubo, registry = build_qubo(problem)
    return qubo, qubo_to_spin(qubo), registry
