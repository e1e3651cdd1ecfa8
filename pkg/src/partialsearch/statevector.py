"""Dense statevector with register-aware local operations.

Bit layout: register 1 occupies the least-significant bits of the basis
index and register m the most-significant ones, so a target bitstring written
``x_m ... x_1`` (most significant first) is also the integer index of the
basis state, ``int(bits, 2)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

DEFAULT_MAX_QUBITS = 26
NORM_TOL = 1e-10
LOCAL_NORM_TOL = 1e-9
DEGENERATE_PROB = 1e-14


class StateError(ValueError):
    """Invalid register layout, local state or measurement request."""


class ResourceCapError(StateError):
    """Requested state exceeds the configured qubit cap."""


@dataclass(frozen=True)
class RegisterPartition:
    """Register sizes ordered outermost-first (n_m, ..., n_1)."""
    sizes: tuple[int, ...]
    max_qubits: int = DEFAULT_MAX_QUBITS

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        if not self.sizes:
            raise StateError("partition needs at least one register")
        if any(s < 1 for s in self.sizes):
            raise StateError(f"register sizes must be >= 1, got {self.sizes}")
        if self.n > self.max_qubits:
            raise ResourceCapError(
                f"{self.n} qubits exceeds the cap of {self.max_qubits}")

    @property
    def m(self) -> int:
        return len(self.sizes)

    @property
    def n(self) -> int:
        return sum(self.sizes)

    @property
    def dim(self) -> int:
        return 1 << self.n

    def size(self, i: int) -> int:
        """Qubits in register ``i`` (1 = innermost)."""
        self._check_index(i)
        return self.sizes[self.m - i]

    def offset(self, i: int) -> int:
        """Bit offset of register ``i`` inside the basis index."""
        self._check_index(i)
        return sum(self.sizes[self.m - i + 1:])

    def axis(self, i: int) -> int:
        """Axis of register ``i`` in the (n_m, ..., n_1) tensor view."""
        self._check_index(i)
        return self.m - i

    def shape(self) -> tuple[int, ...]:
        return tuple(1 << s for s in self.sizes)

    def register_value(self, bits: str, i: int) -> int:
        """Integer held by register ``i`` in a full bitstring."""
        if len(bits) != self.n:
            raise StateError(f"bitstring of length {len(bits)} for {self.n} qubits")
        start = self.n - self.offset(i) - self.size(i)
        return int(bits[start:start + self.size(i)], 2)

    def register_bits(self, bits: str, i: int) -> str:
        start = self.n - self.offset(i) - self.size(i)
        return bits[start:start + self.size(i)]

    def inner(self, k: int) -> "RegisterPartition":
        """Partition made of registers k..1."""
        return RegisterPartition(self.sizes[self.m - k:], self.max_qubits)

    def _check_index(self, i: int):
        if not 1 <= i <= self.m:
            raise StateError(f"register index {i} outside 1..{self.m}")


def as_local_state(amplitudes, n_qubits: int | None = None, tol: float = LOCAL_NORM_TOL) -> np.ndarray:
    psi = np.asarray(amplitudes, dtype=np.complex128).ravel()
    if psi.size == 0 or psi.size & (psi.size - 1):
        raise StateError(f"local state length {psi.size} is not a power of two")
    if n_qubits is not None and psi.size != 1 << n_qubits:
        raise StateError(f"local state length {psi.size} does not match {n_qubits} qubits")
    dev = abs(np.linalg.norm(psi) - 1.0)
    if dev > tol:
        raise StateError(f"local state norm deviates from 1 by {dev:.3g}")
    return psi


def uniform_local(n_qubits: int) -> np.ndarray:
    return np.full(1 << n_qubits, (1 << n_qubits) ** -0.5, dtype=np.complex128)


def basis_local(n_qubits: int, value: int) -> np.ndarray:
    psi = np.zeros(1 << n_qubits, dtype=np.complex128)
    psi[value] = 1.0
    return psi


@dataclass
class OpCounter:
    oracle: int = 0
    diffusion: dict[int, int] = field(default_factory=dict)

    def add_diffusion(self, i: int, count: int = 1):
        self.diffusion[i] = self.diffusion.get(i, 0) + count

    def merge(self, other: "OpCounter"):
        self.oracle += other.oracle
        for i, c in other.diffusion.items():
            self.add_diffusion(i, c)


class QuantumState:
    """Normalised amplitude vector over 2^n basis states.

    ``counter`` (if set) tallies every oracle call and partial diffusion.
    With ``check_every_op`` the norm is asserted after each kernel; otherwise
    callers check at round boundaries with :meth:`check_norm`.
    """

    def __init__(self, amplitudes: np.ndarray, partition: RegisterPartition,
                 counter: OpCounter | None = None, check_every_op: bool = False):
        amplitudes = np.asarray(amplitudes, dtype=np.complex128)
        if amplitudes.shape != (partition.dim,):
            raise StateError(
                f"amplitude vector of shape {amplitudes.shape} for {partition.n} qubits")
        self.amplitudes = amplitudes
        self.partition = partition
        self.counter = counter
        self.check_every_op = check_every_op

    def copy(self) -> "QuantumState":
        return QuantumState(self.amplitudes.copy(), self.partition, self.counter, self.check_every_op)

    def norm_deviation(self) -> float:
        return abs(float(np.vdot(self.amplitudes, self.amplitudes).real) - 1.0)

    def check_norm(self, tol: float = NORM_TOL):
        dev = self.norm_deviation()
        if dev > tol:
            raise AssertionError(f"state norm drifted by {dev:.3g} (tolerance {tol:g})")

    def tensor(self) -> np.ndarray:
        """View with one axis per register, outermost first."""
        return self.amplitudes.reshape(self.partition.shape())

    def register_view(self, i: int) -> np.ndarray:
        """(high, d_i, low) view sharing memory with the amplitudes."""
        p = self.partition
        low = 1 << p.offset(i)
        d = 1 << p.size(i)
        return self.amplitudes.reshape(p.dim // (low * d), d, low)

    def to_json(self) -> str:
        """Debug dump: JSON array of [re, im] pairs."""
        return json.dumps([[float(a.real), float(a.imag)] for a in self.amplitudes])

    def _after_op(self):
        if self.check_every_op:
            self.check_norm()


def prepare_product_state(partition: RegisterPartition, locals_: Sequence[np.ndarray],
                          **state_kwargs) -> QuantumState:
    """Tensor product of local states.

    ``locals_`` is ordered like ``partition.sizes`` (outermost register first).
    """
    if len(locals_) != partition.m:
        raise StateError(f"expected {partition.m} local states, got {len(locals_)}")
    amps = np.ones(1, dtype=np.complex128)
    for pos, (size, psi) in enumerate(zip(partition.sizes, locals_)):
        try:
            psi = as_local_state(psi, size)
        except StateError as exc:
            raise StateError(f"register {partition.m - pos}: {exc}") from None
        amps = np.kron(amps, psi)
    return QuantumState(amps, partition, **state_kwargs)


def apply_partial_diffusion(state: QuantumState, register: int, psi: np.ndarray):
    """Apply I - 2|psi><psi| on ``register``, identity elsewhere."""
    psi = as_local_state(psi, state.partition.size(register))
    view = state.register_view(register)
    overlap = np.matmul(psi.conj(), view)  # (high, low)
    view -= 2.0 * psi[None, :, None] * overlap[:, None, :]
    if state.counter is not None:
        state.counter.add_diffusion(register)
    state._after_op()


def target_index(state_or_partition, target: str) -> int:
    p = getattr(state_or_partition, "partition", state_or_partition)
    if len(target) != p.n or set(target) - {"0", "1"}:
        raise StateError(f"target {target!r} is not a {p.n}-bit string")
    return int(target, 2)


def apply_oracle(state: QuantumState, target: str | int):
    """Negate the amplitude of the target basis state."""
    idx = target if isinstance(target, (int, np.integer)) else target_index(state, target)
    state.amplitudes[idx] = -state.amplitudes[idx]
    if state.counter is not None:
        state.counter.oracle += 1
    state._after_op()


def _normalize_registers(partition: RegisterPartition, registers: Iterable[int]) -> list[int]:
    regs = list(registers)
    if not regs:
        raise StateError("register set is empty")
    if len(set(regs)) != len(regs):
        raise StateError(f"duplicate registers in {regs}")
    for i in regs:
        partition._check_index(i)
    return regs


def _marginal(state: QuantumState, regs: Sequence[int]) -> np.ndarray:
    """Joint outcome distribution over ``regs`` (axes in the given order)."""
    p = state.partition
    probs = np.abs(state.tensor()) ** 2
    axes = [p.axis(i) for i in regs]
    other = tuple(a for a in range(p.m) if a not in axes)
    marg = probs.sum(axis=other) if other else probs
    # sum keeps remaining axes in ascending order; reorder to match regs
    kept_order = sorted(axes)
    return np.transpose(marg, [kept_order.index(a) for a in axes])


def outcome_distribution(state: QuantumState, registers: Iterable[int]) -> tuple[list[int], np.ndarray]:
    """Registers (validated) and their joint outcome probabilities, one axis per register."""
    regs = _normalize_registers(state.partition, registers)
    return regs, _marginal(state, regs)


def sample_outcome(marg: np.ndarray, rng: np.random.Generator,
                   cdf: np.ndarray | None = None) -> tuple[tuple[int, ...], float]:
    """Draw one joint outcome from a marginal; returns (values, probability)."""
    flat = marg.ravel()
    if cdf is None:
        cdf = np.cumsum(flat)
    if float(cdf[-1]) < DEGENERATE_PROB:
        raise StateError("state has vanishing total probability")
    pick = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    pick = min(pick, flat.size - 1)
    prob = float(flat[pick])
    if prob < DEGENERATE_PROB:
        raise StateError("sampled an outcome of vanishing probability")
    return tuple(int(v) for v in np.unravel_index(pick, marg.shape)), prob


def collapse(state: QuantumState, registers: Sequence[int], values: Sequence[int],
             prob: float) -> QuantumState:
    """Post-measurement state for a given outcome; inconsistent amplitudes are exactly zero."""
    p = state.partition
    collapsed = np.zeros_like(state.tensor())
    index: list = [slice(None)] * p.m
    for i, v in zip(registers, values):
        index[p.axis(i)] = int(v)
    index = tuple(index)
    collapsed[index] = state.tensor()[index] / np.sqrt(prob)
    return QuantumState(collapsed.reshape(-1), p, state.counter, state.check_every_op)


def format_outcomes(partition: RegisterPartition, registers: Sequence[int],
                    values: Sequence[int]) -> dict[int, str]:
    return {i: format(int(v), f"0{partition.size(i)}b") for i, v in zip(registers, values)}


def measure_registers(state: QuantumState, registers: Iterable[int],
                      rng: np.random.Generator) -> tuple[dict[int, str], QuantumState]:
    """Born-rule measurement of ``registers``; returns outcomes and the collapsed state."""
    regs, marg = outcome_distribution(state, registers)
    values, prob = sample_outcome(marg, rng)
    return format_outcomes(state.partition, regs, values), collapse(state, regs, values, prob)


def reinitialize_registers(state: QuantumState, registers: Iterable[int],
                           locals_: Mapping[int, np.ndarray] | Sequence[np.ndarray],
                           tol: float = 1e-12):
    """Replace registers that hold a definite basis value by their local states.

    ``locals_`` maps register index to its local state, or lists the local
    states in the same order as ``registers``.
    """
    p = state.partition
    regs = _normalize_registers(p, registers)
    if not isinstance(locals_, Mapping):
        if len(locals_) != len(regs):
            raise StateError("one local state per reinitialised register is required")
        locals_ = dict(zip(regs, locals_))
    tens = state.tensor()
    for i in regs:
        ax = p.axis(i)
        marg = (np.abs(tens) ** 2).sum(axis=tuple(a for a in range(p.m) if a != ax))
        value = int(np.argmax(marg))
        if abs(float(marg[value]) - float(marg.sum())) > tol:
            raise StateError(f"register {i} is not in a definite basis state")
        psi = as_local_state(locals_[i], p.size(i))
        kept = np.take(tens, value, axis=ax)
        shape = [1] * p.m
        shape[ax] = psi.size
        tens = np.expand_dims(kept, ax) * psi.reshape(shape)
    state.amplitudes = np.ascontiguousarray(tens).reshape(-1)
    state._after_op()


def probability_of_prefix(state: QuantumState, registers: Iterable[int], bits: Sequence[str]) -> float:
    """Probability that each listed register reads the given bits."""
    p = state.partition
    regs = _normalize_registers(p, registers)
    if len(bits) != len(regs):
        raise StateError("one bitstring per register is required")
    index: list = [slice(None)] * p.m
    for i, b in zip(regs, bits):
        if len(b) != p.size(i):
            raise StateError(f"register {i} holds {p.size(i)} bits, got {b!r}")
        index[p.axis(i)] = int(b, 2)
    sub = state.tensor()[tuple(index)]
    return float(min(1.0, np.sum(np.abs(sub) ** 2)))
