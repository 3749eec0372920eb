"""Augmented Index: the function, its input distributions, block protocols,
and numeric evaluators for the information-cost trade-off.

Alice holds an n-bit string ``x``; Bob holds ``BobView(k, prefix, b)``
with ``prefix == x[:k-1]`` (1-based ``k``). The value is ``x_k XOR b``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .probkit import KAPPA, Dist, Joint, binary_entropy, common_space, l1_distance
from .protocol import (ALICE, BOB, DEFAULT_BUDGET, InformationCosts, ProtocolSpec,
                       Round, Tabulation, costs_of, input_values, patch_output, tabulate)

TOL = 1e-9

# 1 / (4 sqrt(ln 2)), the eps = 0 value of the trade-off right-hand side
RHS_CONSTANT = 1.0 / (4.0 * math.sqrt(math.log(2)))


class BobView(NamedTuple):
    k: int
    prefix: str
    b: int


@dataclass(frozen=True)
class AugIndexInput:
    x: str
    k: int
    b: int

    def __post_init__(self):
        if not self.x or self.x.strip("01"):
            raise ValueError(f"x must be a nonempty bitstring, got {self.x!r}")
        if not 1 <= self.k <= len(self.x):
            raise ValueError(f"k={self.k} outside [1, {len(self.x)}]")
        if self.b not in (0, 1):
            raise ValueError("b must be a bit")

    @classmethod
    def from_views(cls, x: str, view: BobView) -> "AugIndexInput":
        if x[: view.k - 1] != view.prefix:
            raise ValueError("Bob's prefix disagrees with Alice's string")
        return cls(x, view.k, view.b)

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def bob_view(self) -> BobView:
        return BobView(self.k, self.x[: self.k - 1], self.b)

    @property
    def value(self) -> int:
        return f_eval(self)


def f_eval(inst: AugIndexInput) -> int:
    return int(inst.x[inst.k - 1]) ^ inst.b


def f_n(x: str, view: BobView) -> int:
    """The function on (Alice input, Bob input) pairs, as protocols see it."""
    return int(x[view.k - 1]) ^ view.b


def flip(x: str, i: int) -> str:
    """``x`` with its ``i``-th bit (1-based) complemented."""
    return x[: i - 1] + ("1" if x[i - 1] == "0" else "0") + x[i:]


def all_strings(n: int):
    return ("".join(bits) for bits in itertools.product("01", repeat=n))


@dataclass(frozen=True)
class MuSpec:
    n: int
    which: str
    joint: Joint

    @property
    def support_size(self) -> int:
        return len(self.joint.dist.support())


def _view_labels(n: int) -> list:
    """Every Bob input, ordered so that (k, prefix, b) has code 2^k - 2 + 2*prefix + b."""
    return [BobView(k, format(p, f"0{k - 1}b") if k > 1 else "", b)
            for k in range(1, n + 1) for p in range(1 << (k - 1)) for b in (0, 1)]


@lru_cache(maxsize=16)
def make_mu(n: int, which: str = "mu") -> MuSpec:
    """Uniform ``mu`` over all inputs, ``mu0`` over f^-1(0), ``mu1`` over f^-1(1)."""
    if n < 1:
        raise ValueError("n must be positive")
    if which not in ("mu", "mu0", "mu1"):
        raise ValueError(f"unknown distribution {which!r}")
    xi = np.repeat(np.arange(1 << n, dtype=np.int64), 2 * n)
    k = np.tile(np.repeat(np.arange(1, n + 1, dtype=np.int64), 2), 1 << n)
    b = np.tile(np.array([0, 1], dtype=np.int64), n << n)
    xk = (xi >> (n - k)) & 1
    keep = np.ones(len(xi), dtype=bool) if which == "mu" else (xk ^ b) == (which == "mu1")
    xi, k, b = xi[keep], k[keep], b[keep]
    yi = (1 << k) - 2 + 2 * (xi >> (n - k + 1)) + b
    labels = [list(all_strings(n)), _view_labels(n)]
    probs = np.full(len(xi), 1.0 / len(xi))
    return MuSpec(n, which, Joint.from_codes(("X", "Y"), [xi, yi], labels, probs))


def require_even(n: int):
    if n % 2:
        raise ValueError(f"n must be even for the trade-off evaluators, got {n}")


def block_protocol(n: int, l: int) -> ProtocolSpec:
    """Bob names one of 2^l blocks of x; Alice replies with that block.

    The block index is the high-order ``l`` bits of ``k - 1``. Bob outputs
    ``x_k XOR b``. Communication is ``l + n / 2^l`` bits on every input.
    """
    if n < 2 or n & (n - 1):
        raise ValueError(f"n must be a power of two >= 2, got {n}")
    logn = n.bit_length() - 1
    if not 1 <= l <= logn:
        raise ValueError(f"l must lie in [1, {logn}], got {l}")
    width = n >> l

    def bob_sends(view: BobView, coin, public, transcript):
        return format((view.k - 1) // width, f"0{l}b")

    def alice_replies(x: str, coin, public, transcript):
        block = int(transcript[0], 2)
        return x[block * width:(block + 1) * width]

    def bob_outputs(view: BobView, coin, public, transcript):
        return int(transcript[1][(view.k - 1) % width]) ^ view.b

    return ProtocolSpec((Round(BOB, l, bob_sends), Round(ALICE, width, alice_replies)),
                        bob_outputs, name=f"block(n={n},l={l})")


def block_family(n: int):
    logn = n.bit_length() - 1
    return [block_protocol(n, l) for l in range(1, logn + 1)]


@dataclass
class Analysis:
    """One exhaustive run of a protocol over the uniform input distribution.

    Everything the evaluators need (error, costs under mu0, Bob's view under
    mu0 and mu1) is derived from this single table.
    """

    proto: ProtocolSpec
    n: int
    table: Tabulation
    value: np.ndarray
    _costs: InformationCosts | None = None

    @property
    def error(self) -> float:
        return self.table.error(self.value)

    @property
    def mu0_costs(self) -> InformationCosts:
        if self._costs is None:
            self._costs = costs_of(self.table.joint(self.value == 0))
        return self._costs

    def bob_view(self, value: int) -> Dist:
        """Bob's final view (public coin, transcript, own input) on f^-1(value)."""
        return self.table.joint(self.value == value).marginal(("R", "M", "Y"))


def analyze(proto: ProtocolSpec, n: int, budget: int = DEFAULT_BUDGET) -> Analysis:
    lam = make_mu(n, "mu").joint
    return Analysis(proto, n, tabulate(proto, lam, budget=budget), input_values(lam, f_n))


def measured_error(proto: ProtocolSpec, n: int, budget: int = DEFAULT_BUDGET) -> float:
    return analyze(proto, n, budget).error


def mu0_costs(proto: ProtocolSpec, n: int, budget: int = DEFAULT_BUDGET) -> InformationCosts:
    """(IC^A, IC^B) under mu0."""
    return analyze(proto, n, budget).mu0_costs


@dataclass(frozen=True)
class TradeoffReport:
    n: int
    eps: float
    eps_source: str
    ic_alice: float
    ic_bob: float
    d: float
    c: float
    lhs: float
    rhs: float
    holds: bool


def tradeoff_rhs(n: int, eps: float) -> float:
    return (1 - 4 * eps) * RHS_CONSTANT - math.sqrt(binary_entropy(2 * eps) / n)


def _check_eps(eps: float):
    if not 0.0 <= eps <= 0.25:
        raise ValueError(f"error must lie in [0, 1/4], got {eps}")


def tradeoff_report(proto: ProtocolSpec, n: int, eps: float | None = None,
                    budget: int = DEFAULT_BUDGET,
                    analysis: Analysis | None = None) -> TradeoffReport:
    """Evaluate both sides of the classical information-cost trade-off.

    With ``eps=None`` the error on the uniform distribution is measured
    exactly; otherwise the supplied value is used as an asserted bound.
    """
    require_even(n)
    if eps is not None:
        _check_eps(eps)
    run = analysis or analyze(proto, n, budget)
    source = "asserted"
    if eps is None:
        eps, source = run.error, "measured"
        _check_eps(eps)
    ic_a, ic_b = run.mu0_costs
    d, c = ic_a / n, ic_b
    lhs = math.sqrt(d) + math.sqrt(2 * c)
    rhs = tradeoff_rhs(n, eps)
    return TradeoffReport(n, eps, source, ic_a, ic_b, d, c, lhs, rhs, lhs >= rhs - TOL)


@dataclass(frozen=True)
class TranscriptGap:
    gap: float
    lemma1_rhs: float
    correctness_lb: float
    eps: float
    c: float
    d1: float
    patched: bool

    @property
    def holds(self) -> bool:
        return self.correctness_lb - TOL <= self.gap <= self.lemma1_rhs + TOL


def transcript_gap(proto: ProtocolSpec, n: int, eps: float | None = None,
                   budget: int = DEFAULT_BUDGET,
                   analysis: Analysis | None = None) -> TranscriptGap:
    """l1 distance between what Bob sees on 0-inputs and on 1-inputs.

    Bob's view on a 0-input is the transcript with ``x[1..k]``; on a
    1-input it is the transcript with ``x[1..k-1]`` and the complement of
    ``x_k``. Both are his (public coin, transcript, input) triple, so the
    distance is taken between those triples under mu0 and mu1. An Alice
    output is first patched into one extra message.
    """
    require_even(n)
    if eps is not None:
        _check_eps(eps)
    run = analysis or analyze(proto, n, budget)
    if eps is None:
        eps = run.error
        _check_eps(eps)
    ic_a, ic_b = run.mu0_costs
    bob_out = patch_output(proto)
    seen = run if bob_out is proto else analyze(bob_out, n, budget)
    zero, one = common_space(seen.bob_view(0), seen.bob_view(1))
    gap = l1_distance(zero, one)
    c = ic_b
    d1 = ic_a / n + binary_entropy(2 * eps) / n
    rhs = 1 + 8 * math.sqrt(KAPPA * c) + 4 * math.sqrt(2 * KAPPA * d1)
    return TranscriptGap(gap, rhs, 2 * (1 - 2 * eps), eps, c, d1, bob_out is not proto)


def constant_protocol(n: int, output: int = 0, bits: int = 1) -> ProtocolSpec:
    """Alice sends a fixed message; Bob answers a constant. Ignores inputs."""
    return ProtocolSpec((Round(ALICE, bits, lambda *a: "0" * bits),),
                        lambda *a: output, name=f"constant{output}")


def answer_b_protocol() -> ProtocolSpec:
    """Alice sends a fixed bit; Bob outputs his own bit ``b``."""
    return ProtocolSpec((Round(ALICE, 1, lambda *a: "0"),),
                        lambda view, *a: view.b, name="answer-b")


def full_send_protocol(n: int) -> ProtocolSpec:
    """Alice sends all of x; Bob outputs exactly."""
    return ProtocolSpec((Round(ALICE, n, lambda x, *a: x),),
                        lambda view, c, p, t: int(t[0][view.k - 1]) ^ view.b,
                        name="full-send")
