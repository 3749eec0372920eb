"""A space-metered multi-pass streaming runtime.

A machine sees its input one symbol at a time, in passes. Between symbols
its whole memory is the state, and the size of that state is what gets
charged: after every step the runtime checks the state's encoded length
against the machine's declared budget.

Randomness is a single public seed handed to ``init``; steps are
deterministic given the state.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

FORWARD = "fwd"
REVERSE = "rev"


class SpaceViolation(RuntimeError):
    """A machine state needed more bits than the machine declared."""

    def __init__(self, machine: str, pass_index: int, position: int, bits: int, limit: int):
        self.machine = machine
        self.pass_index = pass_index
        self.position = position
        self.bits = bits
        self.limit = limit
        super().__init__(f"{machine}: state of {bits} bits exceeds declared {limit} "
                         f"(pass {pass_index}, position {position})")


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class PassSchedule:
    directions: tuple[str, ...]

    def __post_init__(self):
        if not self.directions:
            raise ScheduleError("a schedule needs at least one pass")
        bad = [d for d in self.directions if d not in (FORWARD, REVERSE)]
        if bad:
            raise ScheduleError(f"unknown pass directions {bad}")

    @property
    def T(self) -> int:
        return len(self.directions)

    @property
    def unidirectional(self) -> bool:
        return all(d == FORWARD for d in self.directions)

    @classmethod
    def forward(cls, T: int) -> "PassSchedule":
        return cls((FORWARD,) * T)

    @classmethod
    def alternating(cls, T: int) -> "PassSchedule":
        return cls(tuple(FORWARD if p % 2 == 0 else REVERSE for p in range(T)))

    @classmethod
    def parse(cls, T: int, mode: str) -> "PassSchedule":
        if T < 1:
            raise ScheduleError("pass count must be at least 1")
        if mode == "fwd":
            return cls.forward(T)
        if mode == "alt":
            return cls.alternating(T)
        raise ScheduleError(f"unknown schedule mode {mode!r}")


class StreamMachine(ABC):
    """Base class for streaming machines.

    ``fixed_width`` machines encode every state in exactly
    ``space_bits(length)`` bits; only those can be compiled into protocols,
    since messages have a fixed length.
    """

    name = "machine"
    fixed_width = False

    @abstractmethod
    def space_bits(self, length: int) -> int:
        """Declared memory for inputs of this length."""

    @abstractmethod
    def init(self, length: int, seed: int) -> Any:
        """State before the first pass; all randomness is drawn here."""

    @abstractmethod
    def carry(self, state, pass_index: int, direction: str) -> Any:
        """State at the start of pass ``pass_index`` (called for every pass)."""

    @abstractmethod
    def step(self, state, symbol: str) -> Any:
        ...

    @abstractmethod
    def output(self, state) -> bool:
        """Accept (True) or reject."""

    @abstractmethod
    def encode(self, state) -> str:
        ...

    @abstractmethod
    def decode(self, bits: str, length: int, seed: int) -> Any:
        ...

    def encoded_length(self, state) -> int:
        """Length of ``encode(state)``; fixed-width machines skip the encoding."""
        return len(self.encode(state))

    def halted(self, state) -> bool:
        """True once the verdict can no longer change (steps are then no-ops)."""
        return False

    def needs_more(self, state) -> bool:
        """After a pass: whether the machine wants another one."""
        return False


@dataclass(frozen=True)
class RunResult:
    verdict: bool
    max_state_bits: int
    steps: int
    steps_per_symbol: float
    passes_used: int
    complete: bool
    state: Any = field(default=None, repr=False, compare=False)


def _check(m: StreamMachine, state, limit: int, pass_index: int, position: int) -> int:
    bits = m.encoded_length(state)
    if bits > limit:
        raise SpaceViolation(m.name, pass_index, position, bits, limit)
    return bits


def feed(m: StreamMachine, state, symbols: Sequence[str], limit: int, pass_index: int = 0,
         offset: int = 0):
    """Step ``m`` through ``symbols`` in the given order, auditing each state.

    Returns ``(state, steps, max_bits)``. ``offset`` only labels positions
    in space-violation reports.
    """
    peak = 0
    steps = 0
    for j, symbol in enumerate(symbols):
        state = m.step(state, symbol)
        steps += 1
        peak = max(peak, _check(m, state, limit, pass_index, offset + j))
    return state, steps, peak


def run(m: StreamMachine, word: Sequence[str], sched: PassSchedule, seed: int = 0) -> RunResult:
    """Run ``m`` on ``word`` for up to ``sched.T`` passes.

    Passes stop early once the machine halts or no longer asks for another
    pass. ``complete`` reports whether it finished before the schedule ran out.
    """
    L = len(word)
    limit = m.space_bits(L)
    state = m.init(L, seed)
    peak = _check(m, state, limit, 0, -1)
    steps = 0
    used = 0
    for p, direction in enumerate(sched.directions):
        if p > 0 and (m.halted(state) or not m.needs_more(state)):
            break
        state = m.carry(state, p, direction)
        peak = max(peak, _check(m, state, limit, p, -1))
        used += 1
        indices = range(L) if direction == FORWARD else range(L - 1, -1, -1)
        for j in indices:
            if m.halted(state):
                break
            state = m.step(state, word[j])
            steps += 1
            bits = m.encoded_length(state)
            if bits > limit:
                raise SpaceViolation(m.name, p, j, bits, limit)
            if bits > peak:
                peak = bits
    complete = m.halted(state) or not m.needs_more(state)
    return RunResult(m.output(state), peak, steps, steps / L if L else 0.0, used, complete, state)


def audit_space(m: StreamMachine, corpus: Iterable[Sequence[str]], sched: PassSchedule,
                seed: int = 0) -> int:
    """Largest state seen over all runs of ``m`` on ``corpus``."""
    peak = None
    for word in corpus:
        r = run(m, word, sched, seed)
        peak = r.max_state_bits if peak is None else max(peak, r.max_state_bits)
    if peak is None:
        raise ValueError("corpus must be nonempty")
    return peak


class ConstantMachine(StreamMachine):
    """Ignores its input; the state is a fixed bitstring."""

    fixed_width = True

    def __init__(self, verdict: bool = True, bits: int = 1):
        self.verdict = verdict
        self.bits = bits
        self.name = f"constant({bits})"

    def space_bits(self, length):
        return self.bits

    def init(self, length, seed):
        return "0" * self.bits

    def carry(self, state, pass_index, direction):
        return state

    def step(self, state, symbol):
        return state

    def output(self, state):
        return self.verdict

    def encode(self, state):
        return state

    def decode(self, bits, length, seed):
        return bits


class TraceMachine(StreamMachine):
    """Records every symbol it is shown, tagged with the pass it arrived in."""

    name = "trace"

    def space_bits(self, length):
        return 1 << 62

    def init(self, length, seed):
        return ()

    def carry(self, state, pass_index, direction):
        return state + ((pass_index, None),)

    def step(self, state, symbol):
        if not isinstance(symbol, str) or len(symbol) != 1:
            raise TypeError("expected a single symbol")
        return state + ((None, symbol),)

    def needs_more(self, state):
        return True

    def output(self, state):
        return True

    def encode(self, state):
        return "0" * (8 * len(state))

    def decode(self, bits, length, seed):
        raise NotImplementedError

    @staticmethod
    def passes(state) -> list[str]:
        """The symbols seen in each pass, as strings."""
        out: list[list[str]] = []
        for marker, symbol in state:
            if marker is not None:
                out.append([])
            else:
                out[-1].append(symbol)
        return ["".join(p) for p in out]
