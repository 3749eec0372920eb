"""From streaming Dyck(2) checkers to Augmented Index protocols.

``embed`` turns n independent Augmented Index instances into one Dyck(2)
word of length 4n^2 that is balanced iff every instance evaluates to 0.
``compile_protocol`` turns a forward multi-pass streaming machine into a
two-party protocol for one coordinate, with the other coordinates as
public randomness.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .augindex import AugIndexInput, BobView, make_mu
from .dyck import CLOSE_OF, OPEN_OF
from .probkit import Dist, binary_entropy
from .protocol import ALICE, BOB, ProtocolSpec, Round
from .streamvm import FORWARD, StreamMachine, feed

PADDING = "per-segment"


@dataclass(frozen=True)
class AscensionInput:
    instances: tuple

    def __post_init__(self):
        n = len(self.instances)
        if n < 1:
            raise ValueError("need at least one instance")
        for inst in self.instances:
            if not isinstance(inst, AugIndexInput):
                raise TypeError("instances must be AugIndexInput")
            if inst.n != n:
                raise ValueError(f"every instance needs a string of length {n}")

    @property
    def n(self) -> int:
        return len(self.instances)

    @property
    def value(self) -> int:
        return int(any(inst.value for inst in self.instances))

    def replace(self, i: int, inst: AugIndexInput) -> "AscensionInput":
        """Copy with the ``i``-th instance (1-based) replaced."""
        items = list(self.instances)
        items[i - 1] = inst
        return AscensionInput(tuple(items))


@dataclass(frozen=True)
class Segment:
    owner: str  # "A3" is Alice-side player 3, "B3" its Bob
    kind: str  # ascent | middle | descent
    start: int
    length: int


@dataclass(frozen=True)
class EmbeddingLayout:
    n: int
    segments: tuple

    @property
    def length(self) -> int:
        return sum(s.length for s in self.segments)

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "length": self.length, "padding": PADDING,
                           "segments": [asdict(s) for s in self.segments]}, indent=1)


def _opens(bits) -> str:
    return "".join(OPEN_OF[int(c)] for c in bits)


def _closes(bits) -> str:
    return "".join(CLOSE_OF[int(c)] for c in bits)


def ascent(x: str) -> str:
    """Opens for x_n, ..., x_1, so x_1 ends up on top."""
    return _opens(x[::-1])


def middle(view: BobView, n: int) -> str:
    """Pop x_1..x_{k-1}, close against b, push everything back, pad to 2n."""
    k, prefix, b = view
    core = _closes(prefix) + CLOSE_OF[b] + OPEN_OF[b] + _opens(prefix[::-1])
    return core + "()" * (n - k)


def descent(x: str) -> str:
    return _closes(x)


def embed(a: AscensionInput) -> tuple[str, EmbeddingLayout]:
    n = a.n
    pieces: list[tuple[str, str, str]] = []
    for i, inst in enumerate(a.instances, start=1):
        pieces.append((f"A{i}", "ascent", ascent(inst.x)))
        pieces.append((f"B{i}", "middle", middle(inst.bob_view, n)))
    for i in range(n, 0, -1):
        pieces.append((f"A{i}", "descent", descent(a.instances[i - 1].x)))
    segments, pos = [], 0
    for owner, kind, text in pieces:
        segments.append(Segment(owner, kind, pos, len(text)))
        pos += len(text)
    word = "".join(text for _, _, text in pieces)
    assert len(word) == 4 * n * n
    return word, EmbeddingLayout(n, tuple(segments))


def all_instances(n: int, which: str = "mu") -> list[AugIndexInput]:
    J = make_mu(n, which).joint
    return [AugIndexInput.from_views(x, view) for (x, view), _ in J.items()]


def random_ascension(n: int, rng: np.random.Generator, zero_rate: float = 0.5) -> AscensionInput:
    """Instances with b = x_k with probability chosen so that the OR is 0 at ``zero_rate``."""
    q = zero_rate ** (1.0 / n)
    out = []
    for _ in range(n):
        x = "".join(rng.choice(["0", "1"], size=n))
        k = int(rng.integers(1, n + 1))
        agree = rng.random() < q
        out.append(AugIndexInput(x, k, int(x[k - 1]) ^ (0 if agree else 1)))
    return AscensionInput(tuple(out))


def band_passes_for_embedding(n: int, W: int) -> int:
    """Forward passes a height-band machine of width W needs on any embedding.

    Heights reach n^2 after the last ascent, plus one inside padding pairs.
    """
    return max(1, -(-(n * n + 1) // W))


@dataclass(frozen=True)
class CompiledMeta:
    machine: str
    T: int
    i: int
    n: int
    space_bits: int


def compile_protocol(m: StreamMachine, T: int, i: int, n: int,
                     others: tuple | None = None, seeds=(0,)) -> ProtocolSpec:
    """A protocol for f_n from T forward passes of ``m`` over embeddings.

    The target coordinate ``i`` (1-based) gets Alice's and Bob's inputs;
    the other n-1 instances, and the machine seed, form the public coin.
    With ``others=None`` the public coin ranges over all of mu0^(n-1),
    otherwise it is fixed to the given tuple of n-1 instances.

    Pass p: Alice runs the stream up to the end of her ascent and sends
    the state; Bob runs from his segment to the last middle segment and
    sends the state back; Alice then runs the descent. Alice outputs 1
    when the machine rejects.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    if not 1 <= i <= n:
        raise ValueError(f"target coordinate must lie in [1, {n}]")
    if not m.fixed_width:
        raise ValueError(f"{m.name} does not encode states at a fixed width")
    L = 4 * n * n
    s = m.space_bits(L)
    seeds = tuple(seeds)
    if others is None:
        base = all_instances(n, "mu0")
        choices = list(itertools.product(base, repeat=n - 1))
    else:
        others = tuple(others)
        if len(others) != n - 1:
            raise ValueError(f"need {n - 1} other instances")
        choices = [others]
    public = Dist.uniform([(o, seed) for o in choices for seed in seeds])

    def full(o, x, view):
        items = list(o[: i - 1]) + [AugIndexInput.from_views(x, view)] + list(o[i - 1:])
        return AscensionInput(tuple(items))

    def alice_prefix(o, x):
        parts = []
        for inst in o[: i - 1]:
            parts += [ascent(inst.x), middle(inst.bob_view, n)]
        parts.append(ascent(x))
        return "".join(parts)

    def bob_part(o, view):
        parts = [middle(view, n)]
        for inst in o[i - 1:]:
            parts += [ascent(inst.x), middle(inst.bob_view, n)]
        return "".join(parts)

    def alice_descent(o, x):
        xs = [inst.x for inst in o[: i - 1]] + [x] + [inst.x for inst in o[i - 1:]]
        return "".join(descent(xj) for xj in reversed(xs))

    prefix_len = i * 3 * n - 2 * n

    def finish_pass(o, seed, x, bits, p):
        state = m.decode(bits, L, seed)
        state, _, _ = feed(m, state, alice_descent(o, x), s, p, 3 * n * n)
        return state

    def alice_sends(x, coin, pub, transcript):
        o, seed = pub
        p = len(transcript) // 2
        state = m.init(L, seed) if p == 0 else finish_pass(o, seed, x, transcript[-1], p - 1)
        state = m.carry(state, p, FORWARD)
        state, _, _ = feed(m, state, alice_prefix(o, x), s, p, 0)
        return m.encode(state)

    def bob_sends(view, coin, pub, transcript):
        o, seed = pub
        p = len(transcript) // 2
        state = m.decode(transcript[-1], L, seed)
        state, _, _ = feed(m, state, bob_part(o, view), s, p, prefix_len)
        return m.encode(state)

    def alice_outputs(x, coin, pub, transcript):
        o, seed = pub
        state = finish_pass(o, seed, x, transcript[-1], T - 1)
        return 0 if m.output(state) else 1

    rounds = []
    for _ in range(T):
        rounds += [Round(ALICE, s, alice_sends), Round(BOB, s, bob_sends)]
    meta = {"compiled": CompiledMeta(m.name, T, i, n, s), "embed": full}
    return ProtocolSpec(tuple(rounds), alice_outputs, public_coins=public,
                        name=f"compiled({m.name},T={T},i={i},n={n})", meta=meta)


def space_bound(N: float, T: float, eps: float) -> float:
    """Space, in bits, that any T-pass forward streaming checker with error eps must use.

    Zero when the bracket is nonpositive, which is what happens for small
    N at larger eps.
    """
    if not 0.0 <= eps < 0.25:
        raise ValueError(f"eps must lie in [0, 1/4), got {eps}")
    if N < 1 or T < 1:
        raise ValueError("N and T must be at least 1")
    bracket = ((1 - 4 * eps) / (4 * math.sqrt(math.log(2)))
               - 2 * math.sqrt(binary_entropy(2 * eps)) / N ** 0.25)
    if bracket <= 0:
        return 0.0
    return (math.sqrt(N) / T) / (6 + 4 * math.sqrt(2)) * bracket ** 2
