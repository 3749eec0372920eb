"""Dyck(2) membership: an exact stack checker, a multi-pass height-band
streaming machine, and a one-pass free-group fingerprint machine.

Symbols: ``(`` / ``)`` are the first bracket type, ``[`` / ``]`` the second.
"""

from __future__ import annotations

import math
import random
from typing import NamedTuple

import numpy as np
from sympy import isprime

from .streamvm import FORWARD, PassSchedule, StreamMachine, run

ALPHABET = "()[]"
OPENS = {"(": 0, "[": 1}
CLOSES = {")": 0, "]": 1}
OPEN_OF = "(["
CLOSE_OF = ")]"


class InvalidSymbol(ValueError):
    def __init__(self, symbol, position: int):
        self.symbol = symbol
        self.position = position
        super().__init__(f"invalid symbol {symbol!r} at position {position}")


class PrimeGenerationError(RuntimeError):
    pass


def validate(w: str) -> str:
    for j, c in enumerate(w):
        if c not in OPENS and c not in CLOSES:
            raise InvalidSymbol(c, j)
    return w


def stack_check(w: str) -> bool:
    """Exact membership with an explicit stack."""
    validate(w)
    stack = []
    for c in w:
        if c in OPENS:
            stack.append(OPENS[c])
        elif not stack or stack.pop() != CLOSES[c]:
            return False
    return not stack


def height_profile(w: str) -> list[int]:
    """Prefix heights (opens minus closes), starting with 0."""
    validate(w)
    h = [0]
    for c in w:
        h.append(h[-1] + (1 if c in OPENS else -1))
    return h


def max_height(w: str) -> int:
    return max(height_profile(w))


def free_reduce(w: str) -> str:
    """Reduce ``w`` in the free group: a letter cancels against its inverse on either side."""
    validate(w)
    inverse = {"(": ")", ")": "(", "[": "]", "]": "["}
    out: list[str] = []
    for c in w:
        if out and out[-1] == inverse[c]:
            out.pop()
        else:
            out.append(c)
    return "".join(out)


def _mirror(symbol: str, reverse: bool):
    """(is_open, type) of a symbol, with roles swapped on reverse passes."""
    if symbol in OPENS:
        return (not reverse), OPENS[symbol]
    if symbol in CLOSES:
        return reverse, CLOSES[symbol]
    raise InvalidSymbol(symbol, -1)


def _field(value: int, width: int) -> str:
    return format(value, f"0{width}b") if width else ("" if value == 0 else format(value, "b"))


class BandState(NamedTuple):
    reject: bool
    more: bool
    reverse: bool
    height: int
    base: int
    slots: int  # bit j = type of the open currently at height base + j + 1
    cap: int  # largest height from which a return to 0 is still possible


class HeightBandMachine(StreamMachine):
    """Checks bracket types one band of heights per pass.

    Pass p is responsible for heights in ``(base, base + W]`` and remembers
    only the open symbol's type at each of those heights. Every pass also
    checks that the height never drops below 0, never exceeds ``L // 2``,
    and ends at 0. The band moves up only if the pass saw heights above
    it. Memory: flags (reject, more, direction), height and base counters
    of ``ceil(log2(L//2 + 1))`` bits each, and ``W`` type bits.
    """

    fixed_width = True

    def __init__(self, W: int):
        if W < 1:
            raise ValueError("band width must be at least 1")
        self.W = W
        self.name = f"band(W={W})"

    @staticmethod
    def counter_bits(length: int) -> int:
        return math.ceil(math.log2(length // 2 + 1))

    def space_bits(self, length):
        return 3 + self.W + 2 * self.counter_bits(length)

    def passes_needed(self, length: int) -> int:
        """Enough passes for any input of this length."""
        return max(1, -(-(length // 2) // self.W))

    def schedule(self, length: int) -> PassSchedule:
        return PassSchedule.forward(self.passes_needed(length))

    def init(self, length, seed):
        return BandState(False, False, False, 0, 0, 0, length // 2)

    def carry(self, state, pass_index, direction):
        s = state
        reject = s.reject or (pass_index > 0 and s.height != 0)
        base = s.base + self.W if (pass_index > 0 and s.more) else s.base
        return BandState(reject, False, direction != FORWARD, 0, base, 0, s.cap)

    def step(self, state, symbol):
        s = state
        if s.reject:
            return s
        is_open, kind = _mirror(symbol, s.reverse)
        h, base, slots, more = s.height, s.base, s.slots, s.more
        if is_open:
            h += 1
            if h > s.cap:
                return s._replace(reject=True)
            j = h - base - 1
            if 0 <= j < self.W:
                slots = (slots & ~(1 << j)) | (kind << j)
            elif j >= self.W:
                more = True
        else:
            if h == 0:
                return s._replace(reject=True)
            j = h - base - 1
            if 0 <= j < self.W and ((slots >> j) & 1) != kind:
                return s._replace(reject=True)
            h -= 1
        return BandState(False, more, s.reverse, h, base, slots, s.cap)

    def halted(self, state):
        return state.reject

    def needs_more(self, state):
        return state.more and not state.reject

    def output(self, state):
        return not state.reject and not state.more and state.height == 0

    def encoded_length(self, state):
        hb = self.counter_bits(2 * state.cap)
        return (3 + self.W + max(hb, state.height.bit_length())
                + max(hb, state.base.bit_length()))

    def encode(self, state):
        hb = self.counter_bits(2 * state.cap)
        return ("".join("1" if f else "0" for f in (state.reject, state.more, state.reverse))
                + _field(state.height, hb) + _field(state.base, hb)
                + format(state.slots, f"0{self.W}b")[::-1])

    def decode(self, bits, length, seed):
        hb = self.counter_bits(length)
        if len(bits) != self.space_bits(length):
            raise ValueError("encoded state has the wrong length")
        flags = [c == "1" for c in bits[:3]]
        height = int(bits[3:3 + hb] or "0", 2)
        base = int(bits[3 + hb:3 + 2 * hb] or "0", 2)
        slots = int(bits[3 + 2 * hb:][::-1], 2)
        return BandState(flags[0], flags[1], flags[2], height, base, slots, length // 2)


class StackState(NamedTuple):
    reject: bool
    reverse: bool
    stack: str  # one bit per open bracket, bottom first
    cap: int


class StackMachine(StreamMachine):
    """One pass with the whole stack in memory: ``2 + L // 2`` bits."""

    name = "stack"

    def space_bits(self, length):
        return 2 + length // 2

    def init(self, length, seed):
        return StackState(False, False, "", length // 2)

    def carry(self, state, pass_index, direction):
        if pass_index > 0:
            return state
        return state._replace(reverse=direction != FORWARD)

    def step(self, state, symbol):
        if state.reject:
            return state
        is_open, kind = _mirror(symbol, state.reverse)
        if is_open:
            if len(state.stack) >= state.cap:
                return state._replace(reject=True)
            return state._replace(stack=state.stack + str(kind))
        if not state.stack or state.stack[-1] != str(kind):
            return state._replace(reject=True)
        return state._replace(stack=state.stack[:-1])

    def halted(self, state):
        return state.reject

    def output(self, state):
        return not state.reject and not state.stack

    def encode(self, state):
        return ("1" if state.reject else "0") + ("1" if state.reverse else "0") + state.stack

    def decode(self, bits, length, seed):
        return StackState(bits[0] == "1", bits[1] == "1", bits[2:], length // 2)


def draw_primes(seed: int, prime_bits: int, count: int, max_tries: int | None = None) -> tuple:
    """``count`` distinct random primes with exactly ``prime_bits`` bits."""
    if prime_bits < 3:
        raise ValueError("prime_bits must be at least 3")
    rng = random.Random(seed)
    tries = max_tries if max_tries is not None else 100 * prime_bits * max(count, 1)
    primes: list[int] = []
    for _ in range(tries):
        if len(primes) == count:
            break
        candidate = rng.getrandbits(prime_bits - 1) | (1 << (prime_bits - 1)) | 1
        if candidate not in primes and isprime(candidate):
            primes.append(candidate)
    if len(primes) < count:
        raise PrimeGenerationError(f"found {len(primes)} of {count} primes in {tries} draws")
    return tuple(primes)


class GroupState(NamedTuple):
    reverse: bool
    primes: tuple
    mats: tuple  # (a, b, c, d) per prime, the running product mod that prime


class FreeGroupMachine(StreamMachine):
    """Tracks the product of a free pair of integer matrices modulo random primes.

    ``(`` and ``[`` map to A = [[1,2],[0,1]] and B = [[1,0],[2,1]], the
    closes to their inverses. A word is accepted iff every product is the
    identity, which happens for every word equal to the identity in the
    free group on two letters, a superset of Dyck(2).

    False accepts: entries of the exact product are at most 3^L in absolute
    value, so a fixed nonzero entry has at most L*log2(3)/(b-1) prime
    divisors of b bits. There are roughly 2^(b-1)/(b ln 2) such primes, so
    one random prime misses the error with probability below
    L*log2(3)*b*ln2/((b-1)*2^(b-1)); independent primes multiply this.
    """

    fixed_width = True

    def __init__(self, prime_bits: int = 61, trials: int = 2):
        if trials < 1:
            raise ValueError("trials must be at least 1")
        self.prime_bits = prime_bits
        self.trials = trials
        self.name = f"freegroup(bits={prime_bits},trials={trials})"

    def space_bits(self, length):
        return 1 + 5 * self.prime_bits * self.trials

    def init(self, length, seed):
        primes = draw_primes(seed, self.prime_bits, self.trials)
        return GroupState(False, primes, tuple((1, 0, 0, 1) for _ in primes))

    def carry(self, state, pass_index, direction):
        if pass_index > 0:
            return state
        return state._replace(reverse=direction != FORWARD)

    def step(self, state, symbol):
        is_open, kind = _mirror(symbol, False)
        sign = 2 if is_open else -2
        mats = []
        for p, (a, b, c, d) in zip(state.primes, state.mats):
            if not state.reverse:
                # right multiplication by the generator
                if kind == 0:
                    b, d = (b + sign * a) % p, (d + sign * c) % p
                else:
                    a, c = (a + sign * b) % p, (c + sign * d) % p
            else:
                # reading backwards, the new letter multiplies on the left
                if kind == 0:
                    a, b = (a + sign * c) % p, (b + sign * d) % p
                else:
                    c, d = (c + sign * a) % p, (d + sign * b) % p
            mats.append((a, b, c, d))
        return GroupState(state.reverse, state.primes, tuple(mats))

    def output(self, state):
        return all(m == (1, 0, 0, 1) for m in state.mats)

    def encoded_length(self, state):
        pb = self.prime_bits
        total = 1
        for p, m in zip(state.primes, state.mats):
            total += max(pb, p.bit_length()) + sum(max(pb, v.bit_length()) for v in m)
        return total

    def encode(self, state):
        pb = self.prime_bits
        parts = ["1" if state.reverse else "0"]
        for p, m in zip(state.primes, state.mats):
            parts.extend(_field(v, pb) for v in (p, *m))
        return "".join(parts)

    def decode(self, bits, length, seed):
        pb = self.prime_bits
        vals = [int(bits[1 + j * pb:1 + (j + 1) * pb], 2) for j in range(5 * self.trials)]
        primes = tuple(vals[0::5])
        mats = tuple(tuple(vals[5 * t + 1:5 * t + 5]) for t in range(self.trials))
        return GroupState(bits[0] == "1", primes, mats)


def height_band_check(w: str, W: int) -> bool:
    validate(w)
    m = HeightBandMachine(W)
    return run(m, w, m.schedule(len(w))).verdict


def freegroup_check(w: str, prime_bits: int = 61, trials: int = 2, seed: int = 0) -> bool:
    validate(w)
    return run(FreeGroupMachine(prime_bits, trials), w, PassSchedule.forward(1), seed).verdict


def _random_dyck(length: int, rng: np.random.Generator) -> str:
    """Uniform over Dyck(2) words of this length."""
    u = rng.random(length)
    types = rng.integers(0, 2, size=length // 2)
    out: list[str] = []
    stack: list[int] = []
    h = 0
    t = 0
    for j in range(length):
        r = length - j
        ups = (r - h) // 2
        # fraction of completions that go up here, among paths from height h
        p_up = ups * (h + 2) / (r * (h + 1))
        if u[j] < p_up:
            kind = int(types[t])
            t += 1
            out.append(OPEN_OF[kind])
            stack.append(kind)
            h += 1
        else:
            out.append(CLOSE_OF[stack.pop()])
            h -= 1
    return "".join(out)


def gen_instances(length: int, kind: str = "member", seed: int = 0) -> str:
    """One generated word.

    ``member``: uniform over Dyck(2) words. ``near_member``: a member with
    one position replaced by a different symbol (never a member, never the
    free-group identity). ``random``: uniform over all words.
    """
    if length < 0:
        raise ValueError("length must be nonnegative")
    rng = np.random.default_rng(seed)
    if kind == "random":
        return "".join(ALPHABET[i] for i in rng.integers(0, 4, size=length))
    if length % 2:
        raise ValueError(f"{kind} words need an even length, got {length}")
    if kind == "member":
        return _random_dyck(length, rng)
    if kind == "near_member":
        if length < 2:
            raise ValueError("near_member needs length at least 2")
        w = _random_dyck(length, rng)
        j = int(rng.integers(0, length))
        choices = [c for c in ALPHABET if c != w[j]]
        return w[:j] + choices[int(rng.integers(0, 3))] + w[j + 1:]
    raise ValueError(f"unknown kind {kind!r}")
