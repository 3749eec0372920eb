"""Exact density-matrix tools and small quantum protocols for Augmented Index.

States are dense numpy arrays over labelled registers of qubits. Entropies
are in bits. ``fidelity`` is the root fidelity ||sqrt(P) sqrt(Q)||_1 and
``bures`` is sqrt(1 - fidelity).

Protocols act on a few workspace qubits whose ownership moves between
the players as messages are sent. Every unitary is controlled by the
acting player's classical input (Alice: x; Bob: k, x[1,k-1] and b), so a
run with Alice's input in superposition is the superposition of the
per-input runs, which is how superposed states are built here.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.stats import unitary_group

from .augindex import BobView, all_strings, f_n
from .probkit import KAPPA, Dist

ALICE = "A"
BOB = "B"
STATE_TOL = 1e-9
MAX_QUBITS = 12


class QuantumError(ValueError):
    pass


class LayoutMismatch(QuantumError):
    pass


class QuantumBudgetExceeded(QuantumError):
    pass


class AlignmentError(RuntimeError):
    """The Uhlmann alignment missed the reduced-state Bures distance."""


def _dims(registers) -> list[int]:
    return [1 << q for _, q in registers]


def _check_registers(registers):
    labels = [r for r, _ in registers]
    if len(set(labels)) != len(labels):
        raise QuantumError(f"duplicate register labels {labels}")
    for r, q in registers:
        if q < 0:
            raise QuantumError(f"register {r!r} has a negative size")


@dataclass(frozen=True)
class DensityState:
    registers: tuple
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        regs = tuple((str(r), int(q)) for r, q in self.registers)
        object.__setattr__(self, "registers", regs)
        _check_registers(regs)
        m = np.asarray(self.matrix, dtype=complex)
        d = int(np.prod(_dims(regs))) if regs else 1
        if m.shape != (d, d):
            raise QuantumError(f"matrix shape {m.shape} does not match registers (dim {d})")
        if not np.allclose(m, m.conj().T, atol=STATE_TOL):
            raise QuantumError("matrix is not Hermitian")
        if abs(np.trace(m).real - 1) > STATE_TOL:
            raise QuantumError(f"trace {np.trace(m).real} is not 1")
        if np.linalg.eigvalsh(m).min() < -STATE_TOL:
            raise QuantumError("matrix has a negative eigenvalue")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def labels(self) -> tuple:
        return tuple(r for r, _ in self.registers)

    def reduce(self, keep: Sequence[str]) -> "DensityState":
        return partial_trace(self, keep)


@dataclass(frozen=True)
class PureState:
    registers: tuple
    vector: np.ndarray = field(repr=False)

    def __post_init__(self):
        regs = tuple((str(r), int(q)) for r, q in self.registers)
        object.__setattr__(self, "registers", regs)
        _check_registers(regs)
        v = np.asarray(self.vector, dtype=complex).reshape(-1)
        d = int(np.prod(_dims(regs))) if regs else 1
        if v.shape != (d,):
            raise QuantumError(f"vector length {v.shape[0]} does not match registers (dim {d})")
        if abs(np.linalg.norm(v) - 1) > 1e-12 * max(1, d) ** 0.5 + 1e-12:
            raise QuantumError(f"vector norm {np.linalg.norm(v)} is not 1")
        object.__setattr__(self, "vector", v)

    @property
    def labels(self) -> tuple:
        return tuple(r for r, _ in self.registers)

    def density(self) -> DensityState:
        return DensityState(self.registers, np.outer(self.vector, self.vector.conj()))

    def reduce(self, keep: Sequence[str]) -> DensityState:
        return partial_trace(self, keep)

    def as_matrix(self, first: Sequence[str]) -> np.ndarray:
        """The amplitudes as a (dim first, dim rest) matrix."""
        first = list(first)
        rest = [r for r in self.labels if r not in first]
        t = self.vector.reshape(_dims(self.registers))
        order = [self.labels.index(r) for r in first + rest]
        t = np.transpose(t, order)
        d1 = int(np.prod([1 << q for r, q in self.registers if r in first]))
        return t.reshape(d1, -1)

    def apply(self, unitary: np.ndarray, on: Sequence[str]) -> "PureState":
        """Apply ``unitary`` to the listed registers (in that order)."""
        on = list(on)
        rest = [r for r in self.labels if r not in on]
        M = self.as_matrix(on)
        if unitary.shape != (M.shape[0], M.shape[0]):
            raise QuantumError("unitary dimension does not match the registers")
        M = unitary @ M
        dims_on = [dict(self.registers)[r] for r in on]
        dims_rest = [dict(self.registers)[r] for r in rest]
        t = M.reshape([1 << q for q in dims_on] + [1 << q for q in dims_rest])
        order = on + rest
        t = np.transpose(t, [order.index(r) for r in self.labels])
        return PureState(self.registers, t.reshape(-1))


def partial_trace(state: DensityState | PureState, keep: Sequence[str]) -> DensityState:
    """Reduced state on ``keep`` (in the state's register order)."""
    keep = list(keep)
    unknown = [r for r in keep if r not in state.labels]
    if unknown:
        raise LayoutMismatch(f"unknown registers {unknown}")
    regs = tuple((r, q) for r, q in state.registers if r in keep)
    if isinstance(state, PureState):
        kept = [r for r, _ in regs]
        M = state.as_matrix(kept)
        return DensityState(regs, M @ M.conj().T)
    dims = _dims(state.registers)
    t = state.matrix.reshape(dims + dims)
    m = len(dims)
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = list(letters[:m])
    col = list(letters[m:2 * m])
    for j, (r, _) in enumerate(state.registers):
        if r not in keep:
            col[j] = row[j]
    out = [row[j] for j, (r, _) in enumerate(state.registers) if r in keep] + \
          [col[j] for j, (r, _) in enumerate(state.registers) if r in keep]
    red = np.einsum("".join(row) + "".join(col) + "->" + "".join(out), t)
    d = int(np.prod(_dims(regs))) if regs else 1
    return DensityState(regs, red.reshape(d, d))


def _matrix(P) -> np.ndarray:
    if isinstance(P, PureState):
        return P.density().matrix
    if isinstance(P, DensityState):
        return P.matrix
    return np.asarray(P, dtype=complex)


def _same_layout(P, Q):
    if isinstance(P, (PureState, DensityState)) and isinstance(Q, (PureState, DensityState)):
        if P.registers != Q.registers:
            raise LayoutMismatch(f"{P.registers} != {Q.registers}")
    a, b = _matrix(P), _matrix(Q)
    if a.shape != b.shape:
        raise LayoutMismatch(f"dimensions {a.shape} and {b.shape} differ")
    return a, b


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(m)
    return (V * np.sqrt(np.clip(w, 0, None))) @ V.conj().T


def trace_distance(P, Q) -> float:
    """Trace norm of P - Q (so orthogonal pure states are at distance 2)."""
    a, b = _same_layout(P, Q)
    return float(np.abs(np.linalg.eigvalsh(a - b)).sum())


def fidelity(P, Q) -> float:
    a, b = _same_layout(P, Q)
    s = np.linalg.svd(_psd_sqrt(a) @ _psd_sqrt(b), compute_uv=False)
    return float(min(1.0, s.sum()))


def bures(P, Q) -> float:
    return math.sqrt(max(0.0, 1.0 - fidelity(P, Q)))


def pure_bures(u: np.ndarray, v: np.ndarray) -> float:
    """Bures distance between two pure states given as vectors."""
    return math.sqrt(max(0.0, 1.0 - abs(np.vdot(u, v))))


def vn_entropy(P) -> float:
    w = np.linalg.eigvalsh(_matrix(P))
    w = w[w > 1e-14]
    return float(-(w * np.log2(w)).sum())


def _spectrum_entropy(M: np.ndarray) -> float:
    """Entropy of M M^dagger, computed from the smaller Gram matrix."""
    G = M.conj().T @ M if M.shape[1] <= M.shape[0] else M @ M.conj().T
    return vn_entropy(G)


def q_mutual_info(P: DensityState, first: Sequence[str] | str, second: Sequence[str] | str) -> float:
    first = [first] if isinstance(first, str) else list(first)
    second = [second] if isinstance(second, str) else list(second)
    both = [r for r in P.labels if r in first or r in second]
    return max(0.0, vn_entropy(P.reduce(first)) + vn_entropy(P.reduce(second))
               - vn_entropy(P.reduce(both)))


@dataclass(frozen=True)
class CQState:
    """A classical label with distribution ``dist`` and a state for each label."""

    dist: Dist
    states: Mapping

    def __post_init__(self):
        layouts = {self.states[x].registers for x in self.dist.outcomes}
        if len(layouts) != 1:
            raise LayoutMismatch("every label needs the same register layout")

    @property
    def registers(self) -> tuple:
        return self.states[self.dist.outcomes[0]].registers

    def average(self) -> DensityState:
        m = sum(p * self.states[x].matrix for x, p in zip(self.dist.outcomes, self.dist.probs))
        return DensityState(self.registers, m)

    def restrict(self, keep: Sequence[str]) -> "CQState":
        return CQState(self.dist, {x: self.states[x].reduce(keep) for x in self.dist.outcomes})

    def group(self, key: Callable) -> dict:
        """Split into conditional CQStates by ``key(label)``, with their weights."""
        parts: dict = {}
        for x, p in zip(self.dist.outcomes, self.dist.probs):
            if p > 0:
                parts.setdefault(key(x), []).append((x, p))
        out = {}
        for g, items in parts.items():
            w = sum(p for _, p in items)
            out[g] = (w, CQState(Dist.from_mapping({x: p / w for x, p in items}),
                                 {x: self.states[x] for x, _ in items}))
        return out

    def to_density(self, label: str = "C") -> DensityState:
        """Block-diagonal state with the label stored in a classical register."""
        k = len(self.dist.outcomes)
        q = max(1, math.ceil(math.log2(k))) if k > 1 else 1
        d = self.states[self.dist.outcomes[0]].dim
        m = np.zeros(((1 << q) * d, (1 << q) * d), dtype=complex)
        for j, (x, p) in enumerate(zip(self.dist.outcomes, self.dist.probs)):
            m[j * d:(j + 1) * d, j * d:(j + 1) * d] = p * self.states[x].matrix
        return DensityState(((label, q),) + self.registers, m)


def holevo(cq: CQState) -> float:
    """I(label : quantum part)."""
    inner = sum(p * vn_entropy(cq.states[x]) for x, p in zip(cq.dist.outcomes, cq.dist.probs))
    return max(0.0, vn_entropy(cq.average()) - inner)


def q_conditional_mi(cq: CQState, first: Sequence[str] | str, second: Sequence[str] | str) -> float:
    """I(first : second | label), averaging over the classical label."""
    return sum(p * q_mutual_info(cq.states[x], first, second)
               for x, p in zip(cq.dist.outcomes, cq.dist.probs) if p > 0)


def cq_conditional_holevo(cq: CQState, given: Callable) -> float:
    """I(label : quantum part | given(label))."""
    return sum(w * holevo(part) for w, part in cq.group(given).values())


def uhlmann_unitary(psi1: PureState, psi2: PureState, cut: Sequence[str]) -> np.ndarray:
    """A unitary on the ``cut`` registers that brings psi1 as close to psi2 as possible.

    Writing each state as a (cut, rest) matrix M, the overlap after U is
    Tr(U M1 M2^dagger); the polar part of M1 M2^dagger from an SVD makes it
    equal to the trace norm, i.e. the fidelity of the states on ``rest``.
    """
    if psi1.registers != psi2.registers:
        raise LayoutMismatch(f"{psi1.registers} != {psi2.registers}")
    cut = list(cut)
    if not cut:
        raise QuantumError("cut must name at least one register")
    M1, M2 = psi1.as_matrix(cut), psi2.as_matrix(cut)
    W, _, Vh = np.linalg.svd(M1 @ M2.conj().T)
    U = Vh.conj().T @ W.conj().T
    rest = [r for r in psi1.labels if r not in cut]
    target = bures(psi1.reduce(rest), psi2.reduce(rest)) if rest else 0.0
    achieved = pure_bures(psi1.apply(U, cut).vector, psi2.vector)
    if abs(achieved - target) > 1e-6:
        raise AlignmentError(f"aligned distance {achieved} misses the reduced-state value {target}")
    return U


# random states and unitaries

def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    if dim == 1:
        return np.array([[np.exp(2j * np.pi * rng.random())]])
    return unitary_group.rvs(dim, random_state=rng)


def random_pure(registers, rng: np.random.Generator) -> PureState:
    d = int(np.prod(_dims(registers)))
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return PureState(registers, v / np.linalg.norm(v))


def random_density(registers, rng: np.random.Generator, rank: int | None = None) -> DensityState:
    d = int(np.prod(_dims(registers)))
    r = rank or d
    G = rng.normal(size=(d, r)) + 1j * rng.normal(size=(d, r))
    m = G @ G.conj().T
    return DensityState(registers, m / np.trace(m).real)


def basis_state(registers, bits: str) -> PureState:
    d = int(np.prod(_dims(registers)))
    v = np.zeros(d, dtype=complex)
    v[int(bits, 2) if bits else 0] = 1
    return PureState(registers, v)


# protocols

@dataclass(frozen=True)
class QRound:
    """One message: the sender applies a unitary to ``acts_on``, then sends ``message``.

    Alice's unitary is ``unitary(x)``; Bob's is ``unitary(k, prefix, b)``.
    Both pick a matrix from classical input data, which is how read-only
    access to the input is enforced.
    """

    sender: str
    unitary: Callable
    acts_on: tuple
    message: tuple


@dataclass(frozen=True)
class QProtocolSpec:
    n: int
    work: int
    owners: tuple  # initial owner of each workspace qubit
    rounds: tuple
    output_qubit: int
    output_unitary: Callable | None = None
    output_acts_on: tuple = ()
    name: str = "qprotocol"

    def __post_init__(self):
        if self.n < 1:
            raise QuantumError("n must be positive")
        if self.n + self.work > MAX_QUBITS:
            raise QuantumBudgetExceeded(
                f"{self.n} input + {self.work} work qubits exceed {MAX_QUBITS}")
        if len(self.owners) != self.work or set(self.owners) - {ALICE, BOB}:
            raise QuantumError("owners must name A or B for every workspace qubit")
        if not self.rounds:
            raise QuantumError("need at least one message")
        owners = list(self.owners)
        for i, rnd in enumerate(self.rounds):
            expected = ALICE if i % 2 == 0 else BOB
            if rnd.sender != expected:
                raise QuantumError(f"message {i + 1} must come from {expected}")
            for q in tuple(rnd.acts_on) + tuple(rnd.message):
                if not 0 <= q < self.work or owners[q] != rnd.sender:
                    raise QuantumError(f"message {i + 1}: qubit {q} is not held by the sender")
            for q in rnd.message:
                owners[q] = BOB if rnd.sender == ALICE else ALICE
        if owners[self.output_qubit] != self.receiver:
            raise QuantumError("the output qubit must be held by the final receiver")
        for q in self.output_acts_on:
            if owners[q] != self.receiver:
                raise QuantumError("the output unitary may only touch the receiver's qubits")

    @property
    def t(self) -> int:
        return len(self.rounds)

    @property
    def receiver(self) -> str:
        return BOB if self.rounds[-1].sender == ALICE else ALICE

    def owners_after(self, i: int) -> tuple:
        """Owner of each workspace qubit right after message ``i`` (0 = start)."""
        owners = list(self.owners)
        for rnd in self.rounds[:i]:
            for q in rnd.message:
                owners[q] = BOB if rnd.sender == ALICE else ALICE
        return tuple(owners)


def _apply_on(vec: np.ndarray, U: np.ndarray, qubits: Sequence[int], w: int) -> np.ndarray:
    if not qubits:
        return vec
    d = 1 << len(qubits)
    if U.shape != (d, d):
        raise QuantumError(f"unitary shape {U.shape} does not match {len(qubits)} qubits")
    t = vec.reshape((2,) * w)
    t = np.moveaxis(t, list(qubits), list(range(len(qubits))))
    shape = t.shape
    t = (U @ t.reshape(d, -1)).reshape(shape)
    return np.moveaxis(t, list(range(len(qubits))), list(qubits)).reshape(-1)


def _check_unitary(U: np.ndarray, where: str) -> np.ndarray:
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise QuantumError(f"{where}: not a square matrix")
    if not np.allclose(U.conj().T @ U, np.eye(U.shape[0]), atol=1e-9):
        raise QuantumError(f"{where}: matrix is not unitary")
    return U


def _player_unitary(spec: QProtocolSpec, sender: str, fn: Callable, x: str, k: int, b: int,
                    where: str) -> np.ndarray:
    if sender == ALICE:
        return _check_unitary(fn(x), where)
    return _check_unitary(fn(k, x[: k - 1], b), where)


def run_basis(spec: QProtocolSpec, x: str, k: int, b: int) -> list[np.ndarray]:
    """Workspace state vectors after each message for one classical input."""
    if len(x) != spec.n or not 1 <= k <= spec.n or b not in (0, 1):
        raise QuantumError("input does not fit the protocol")
    vec = np.zeros(1 << spec.work, dtype=complex)
    vec[0] = 1
    out = []
    for i, rnd in enumerate(spec.rounds):
        U = _player_unitary(spec, rnd.sender, rnd.unitary, x, k, b, f"message {i + 1}")
        vec = _apply_on(vec, U, rnd.acts_on, spec.work)
        out.append(vec)
    return out


def _split(spec: QProtocolSpec, i: int) -> tuple[list[int], list[int]]:
    owners = spec.owners_after(i)
    return ([q for q in range(spec.work) if owners[q] == ALICE],
            [q for q in range(spec.work) if owners[q] == BOB])


def _as_ab(vec: np.ndarray, alice: list[int], bob: list[int], w: int) -> np.ndarray:
    """Workspace vector as a (Alice qubits, Bob qubits) matrix."""
    t = np.transpose(vec.reshape((2,) * w), alice + bob)
    return t.reshape(1 << len(alice), 1 << len(bob))


def superposed_states(spec: QProtocolSpec, k: int, b: int | None = None,
                      fixed: str = "") -> list[PureState]:
    """Joint states after each message with Alice's input partly in superposition.

    Alice's input is ``fixed`` followed by a uniform superposition over the
    remaining bits, held in register ``X``. Bob holds index ``k`` and reads
    his prefix from the input; ``b=None`` means he reads b = x_k as well.
    Registers: X (free bits), A (Alice's workspace), B (Bob's workspace).
    """
    n = spec.n
    if len(fixed) > n:
        raise QuantumError("fixed prefix is longer than the input")
    free = n - len(fixed)
    runs = [run_basis(spec, fixed + y, k, int((fixed + y)[k - 1]) if b is None else b)
            for y in all_strings(free)] if free else \
        [run_basis(spec, fixed, k, int(fixed[k - 1]) if b is None else b)]
    amp = 1 / math.sqrt(len(runs))
    states = []
    for i in range(spec.t):
        alice, bob = _split(spec, i + 1)
        blocks = np.stack([_as_ab(r[i], alice, bob, spec.work) for r in runs])
        regs = (("X", free), ("A", len(alice)), ("B", len(bob)))
        states.append(PureState(regs, amp * blocks.reshape(-1)))
    return states


def qprotocol_run(spec: QProtocolSpec, x: str | None = None, k: int = 1, b: int | None = None,
                  fixed: str = "") -> list[PureState]:
    """Joint states after each message.

    With ``x`` given the input is that basis string (register X is empty);
    otherwise Alice's input is ``fixed`` plus a uniform superposition.
    """
    if x is not None:
        return superposed_states(spec, k, int(x[k - 1]) if b is None else b, fixed=x)
    return superposed_states(spec, k, b, fixed)


def output_probability(spec: QProtocolSpec, x: str, k: int, b: int) -> float:
    """Probability that the final measurement reads 1 on this input."""
    vec = run_basis(spec, x, k, b)[-1]
    if spec.output_unitary is not None:
        U = _player_unitary(spec, spec.receiver, spec.output_unitary, x, k, b, "output")
        vec = _apply_on(vec, U, spec.output_acts_on, spec.work)
    t = np.moveaxis(vec.reshape((2,) * spec.work), spec.output_qubit, 0)
    return float(np.sum(np.abs(t[1]) ** 2))


def q_error(spec: QProtocolSpec) -> float:
    """Error on the uniform distribution over all inputs."""
    total = 0.0
    count = 0
    for x in all_strings(spec.n):
        for k in range(1, spec.n + 1):
            for b in (0, 1):
                p1 = output_probability(spec, x, k, b)
                total += p1 if f_n(x, BobView(k, x[: k - 1], b)) == 0 else 1 - p1
                count += 1
    return min(1.0, total / count)


class QICCosts(tuple):
    __slots__ = ()

    def __new__(cls, qic_alice: float, qic_bob: float):
        return super().__new__(cls, (qic_alice, qic_bob))

    @property
    def qic_alice(self) -> float:
        return self[0]

    @property
    def qic_bob(self) -> float:
        return self[1]

    def __repr__(self):
        return f"QICCosts(qic_alice={self[0]!r}, qic_bob={self[1]!r})"


def alice_message_cost(spec: QProtocolSpec, i: int) -> float:
    """I(X : Q_i | X[1,K]) under mu0, for message number ``i`` (1-based)."""
    n = spec.n
    _, bob = _split(spec, i)
    alice = [q for q in range(spec.work) if q not in bob]
    total = 0.0
    for k in range(1, n + 1):
        for prefix in all_strings(k):
            states = {}
            for rest in all_strings(n - k):
                x = prefix + rest
                M = _as_ab(run_basis(spec, x, k, int(x[k - 1]))[i - 1], alice, bob, spec.work)
                states[x] = DensityState((("B", len(bob)),), M.T @ M.conj())
            cq = CQState(Dist.uniform(states), states)
            total += holevo(cq) / (n * (1 << k))
    return total


def bob_message_cost(spec: QProtocolSpec, i: int) -> float:
    """I(K : X^ P_i) under mu0, for message number ``i`` (1-based)."""
    n = spec.n
    mats = []
    for k in range(1, n + 1):
        psi = superposed_states(spec, k)[i - 1]
        mats.append(psi.as_matrix(["X", "A"]))
    # each Psi_k is pure, so S(X A) = S(B); the mixture is S S^dagger
    inner = sum(_spectrum_entropy(M) for M in mats) / n
    stacked = np.concatenate(mats, axis=1) / math.sqrt(n)
    return max(0.0, _spectrum_entropy(stacked) - inner)


def qic_costs(spec: QProtocolSpec) -> QICCosts:
    """(QIC^A, QIC^B): Alice's messages are the odd ones, Bob's the even ones."""
    qa = sum(alice_message_cost(spec, i) for i in range(1, spec.t + 1, 2))
    qb = sum(bob_message_cost(spec, i) for i in range(2, spec.t + 1, 2))
    return QICCosts(qa, qb)


@dataclass(frozen=True)
class QTradeoffReport:
    n: int
    t: int
    eps: float
    eps_source: str
    qic_alice: float
    qic_bob: float
    lhs: float
    rhs: float
    holds: bool


def q_tradeoff_rhs(t: int, eps: float) -> float:
    return (1 - 4 * eps) / (4 * math.sqrt(KAPPA * t))


def q_tradeoff_report(spec: QProtocolSpec, eps: float | None = None,
                      costs: QICCosts | None = None) -> QTradeoffReport:
    """Both sides of the quantum trade-off; ``eps=None`` measures the error exactly."""
    if spec.n % 2:
        raise ValueError(f"n must be even, got {spec.n}")
    source = "asserted"
    if eps is None:
        eps, source = q_error(spec), "measured"
    if not 0.0 <= eps <= 0.25:
        raise ValueError(f"error must lie in [0, 1/4], got {eps}")
    qa, qb = costs if costs is not None else qic_costs(spec)
    lhs = 2 * math.sqrt(qa / spec.n) + math.sqrt(2 * qb)
    rhs = q_tradeoff_rhs(spec.t, eps)
    return QTradeoffReport(spec.n, spec.t, eps, source, qa, qb, lhs, rhs, lhs >= rhs - 1e-9)


@dataclass(frozen=True)
class HybridRow:
    r: int
    h: float
    aligned_distance: float
    bound: float

    @property
    def slack(self) -> float:
        return self.bound - self.aligned_distance


@dataclass(frozen=True)
class HybridReport:
    j: int
    l: int
    z: str
    rows: tuple
    tolerance: float = 1e-6

    @property
    def holds(self) -> bool:
        return all(row.slack >= -self.tolerance for row in self.rows)


def flip_bit(z: str, i: int) -> str:
    return z[: i - 1] + ("1" if z[i - 1] == "0" else "0") + z[i:]


def hybrid_check(spec: QProtocolSpec, j: int, l: int, z: str) -> HybridReport:
    """Per-message hybrid distances for the four runs on (j, l, z).

    Runs: (z, j), (z, l), (z with bit l flipped, j), (z flipped, l); Bob
    always gets the prefix and bit from z. For an Alice message r the
    alignment acts on Alice's side (free input bits and workspace) and
    maps run (z, j) toward (z flipped, j); for a Bob message it acts on
    Bob's workspace and maps (z, j) toward (z, l). The distance left after
    applying that alignment to the other pair of runs is compared with
    h_r + 2 * sum of the earlier h_i.
    """
    n = spec.n
    if not 1 <= j <= n // 2 or not n // 2 < l <= n:
        raise ValueError(f"need j in [1, {n // 2}] and l in [{n // 2 + 1}, {n}]")
    if len(z) != l or z.strip("01"):
        raise ValueError(f"z must be a bitstring of length {l}")
    zf = flip_bit(z, l)
    run00 = superposed_states(spec, j, int(z[j - 1]), z)
    run01 = superposed_states(spec, l, int(z[l - 1]), z)
    run10 = superposed_states(spec, j, int(z[j - 1]), zf)
    run11 = superposed_states(spec, l, int(z[l - 1]), zf)
    rows = []
    hs: list[float] = []
    for r in range(1, spec.t + 1):
        a, b, c, d = run00[r - 1], run01[r - 1], run10[r - 1], run11[r - 1]
        if r % 2:
            h = bures(a.reduce(["B"]), c.reduce(["B"]))
            U = uhlmann_unitary(a, c, ["X", "A"])
            dist = pure_bures(b.apply(U, ["X", "A"]).vector, d.vector)
        else:
            h = bures(a.reduce(["X", "A"]), b.reduce(["X", "A"]))
            U = uhlmann_unitary(a, b, ["B"])
            dist = pure_bures(c.apply(U, ["B"]).vector, d.vector)
        rows.append(HybridRow(r, h, dist, h + 2 * sum(hs)))
        hs.append(h)
    return HybridReport(j, l, z, tuple(rows))


# example protocols

def _flip_if(bit: int) -> np.ndarray:
    return np.array([[0, 1], [1, 0]], dtype=complex) if bit else np.eye(2, dtype=complex)


def _x_string(bits: str) -> np.ndarray:
    U = np.eye(1, dtype=complex)
    for c in bits:
        U = np.kron(U, _flip_if(int(c)))
    return U


def identity_protocol(n: int, t: int = 2) -> QProtocolSpec:
    """One qubit in state |0> bounces between the players; every unitary is the identity."""
    eye = np.eye(2, dtype=complex)
    rounds = tuple(QRound(ALICE, lambda x: eye, (0,), (0,)) if i % 2 == 0
                   else QRound(BOB, lambda k, p, b: eye, (0,), (0,)) for i in range(t))
    return QProtocolSpec(n, 1, (ALICE,), rounds, 0, name="identity")


def constant_qprotocol(n: int) -> QProtocolSpec:
    """Alice sends |0>, Bob replies |0>, Alice outputs the measured 0."""
    eye = np.eye(2, dtype=complex)
    rounds = (QRound(ALICE, lambda x: eye, (0,), (0,)),
              QRound(BOB, lambda k, p, b: eye, (1,), (1,)))
    return QProtocolSpec(n, 2, (ALICE, BOB), rounds, 1, name="constant")


def full_send_qprotocol(n: int = 2) -> QProtocolSpec:
    """Alice copies x into n message qubits; Bob returns x_k XOR b on one qubit."""
    work = n + 1

    def alice(x):
        return _x_string(x)

    @lru_cache(maxsize=None)
    def bob(k, prefix, b):
        # on (message qubits, answer qubit): flip the answer iff message[k] XOR b
        d = 1 << (n + 1)
        U = np.zeros((d, d), dtype=complex)
        for s in range(d):
            msg = s >> 1
            bit = (msg >> (n - k)) & 1
            U[s ^ (bit ^ b), s] = 1
        return U

    rounds = (QRound(ALICE, alice, tuple(range(n)), tuple(range(n))),
              QRound(BOB, bob, tuple(range(n + 1)), (n,)))
    return QProtocolSpec(n, work, (ALICE,) * n + (BOB,), rounds, n, name="full-send")


def random_qprotocol(n: int, t: int, rng: np.random.Generator, msg_qubits: int = 1,
                     private: int = 1) -> QProtocolSpec:
    """Input-dependent random unitaries on each sender's qubits.

    Workspace: each player keeps ``private`` qubits and ``msg_qubits`` message
    qubits bounce back and forth.
    """
    work = msg_qubits + 2 * private
    msg = tuple(range(msg_qubits))
    a_priv = tuple(range(msg_qubits, msg_qubits + private))
    b_priv = tuple(range(msg_qubits + private, work))
    owners = [ALICE] * (msg_qubits + private) + [BOB] * private
    rounds = []
    for i in range(t):
        sender = ALICE if i % 2 == 0 else BOB
        acts = (msg + a_priv) if sender == ALICE else (msg + b_priv)
        d = 1 << len(acts)
        seed = int(rng.integers(0, 2 ** 32))
        if sender == ALICE:
            table = {x: random_unitary(d, np.random.default_rng([seed, int(x, 2)]))
                     for x in all_strings(n)}
            rounds.append(QRound(sender, lambda x, _t=table: _t[x], acts, msg))
        else:
            table = {}
            for k in range(1, n + 1):
                for p in all_strings(k - 1):
                    for b in (0, 1):
                        table[(k, p, b)] = random_unitary(
                            d, np.random.default_rng([seed, k, int(p or "0", 2), len(p), b]))
            rounds.append(QRound(sender, lambda k, p, b, _t=table: _t[(k, p, b)], acts, msg))
    return QProtocolSpec(n, work, tuple(owners), tuple(rounds), msg[0],
                         name=f"random(n={n},t={t})")


# serialization

def _mat_to_json(U: np.ndarray) -> list:
    return [[[repr(float(z.real)), repr(float(z.imag))] for z in row] for row in U]


def _mat_from_json(rows) -> np.ndarray:
    return np.array([[complex(float(re), float(im)) for re, im in row] for row in rows],
                    dtype=complex)


def _table_of(sender: str, fn: Callable, n: int) -> dict:
    if sender == ALICE:
        return {x: _mat_to_json(fn(x)) for x in all_strings(n)}
    out = {}
    for k in range(1, n + 1):
        for p in all_strings(k - 1):
            for b in (0, 1):
                out[f"{k}:{p}:{b}"] = _mat_to_json(fn(k, p, b))
    return out


def _fn_of(sender: str, table: dict) -> Callable:
    mats = {key: _mat_from_json(v) for key, v in table.items()}
    if sender == ALICE:
        return lambda x: mats[x]
    return lambda k, p, b: mats[f"{k}:{p}:{b}"]


def qprotocol_to_json(spec: QProtocolSpec) -> str:
    doc = {
        "name": spec.name, "n": spec.n, "work": spec.work, "owners": list(spec.owners),
        "rounds": [{"sender": r.sender, "acts_on": list(r.acts_on), "message": list(r.message),
                    "unitaries": _table_of(r.sender, r.unitary, spec.n)} for r in spec.rounds],
        "output": {"qubit": spec.output_qubit, "acts_on": list(spec.output_acts_on),
                   "unitaries": (_table_of(spec.receiver, spec.output_unitary, spec.n)
                                 if spec.output_unitary is not None else None)},
    }
    return json.dumps(doc)


def qprotocol_from_json(text: str) -> QProtocolSpec:
    doc = json.loads(text)
    rounds = tuple(QRound(r["sender"], _fn_of(r["sender"], r["unitaries"]),
                          tuple(r["acts_on"]), tuple(r["message"])) for r in doc["rounds"])
    out = doc["output"]
    receiver = BOB if rounds[-1].sender == ALICE else ALICE
    out_fn = _fn_of(receiver, out["unitaries"]) if out.get("unitaries") else None
    return QProtocolSpec(doc["n"], doc["work"], tuple(doc["owners"]), rounds, out["qubit"],
                         out_fn, tuple(out.get("acts_on", ())), doc.get("name", "qprotocol"))
