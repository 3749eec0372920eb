"""Two-party randomized protocols, analysed by exact enumeration.

A protocol is a list of alternating rounds. Each round's message
function only ever receives its owner's input and private coin, plus the
public coin and the transcript so far, so the "no peeking" rule is
enforced by the call signature rather than by convention.
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Hashable, NamedTuple, Sequence

import numpy as np

from .probkit import (Dist, DistributionError, Joint, common_space,
                      conditional_mutual_information, hellinger)

ALICE = "A"
BOB = "B"

DEFAULT_BUDGET = 10**7

TRIVIAL_COIN = Dist.point(None)

_UNSET = object()


class ProtocolError(ValueError):
    pass


class BudgetExceeded(RuntimeError):
    """Exact enumeration would need more weighted terms than allowed."""

    def __init__(self, needed: int, budget: int):
        super().__init__(f"enumeration needs {needed} weighted terms, budget is {budget}")
        self.needed = needed
        self.budget = budget


MessageFn = Callable[[Any, Any, Any, tuple], str]
OutputFn = Callable[[Any, Any, Any, tuple], int]


@dataclass(frozen=True)
class Round:
    owner: str
    length: int
    message: MessageFn


def other(player: str) -> str:
    return BOB if player == ALICE else ALICE


@dataclass(frozen=True)
class ProtocolSpec:
    """An explicit protocol over finite coin spaces.

    ``output`` is evaluated by ``output_owner`` (by default the receiver of
    the last message, or Bob for a protocol without rounds) on its input,
    private coin, the public coin and the full transcript.
    """

    rounds: tuple[Round, ...]
    output: OutputFn
    public_coins: Dist = TRIVIAL_COIN
    alice_coins: Dist = TRIVIAL_COIN
    bob_coins: Dist = TRIVIAL_COIN
    output_owner: str | None = None
    name: str = ""
    patched: bool = False
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        rounds = tuple(self.rounds)
        object.__setattr__(self, "rounds", rounds)
        for prev, cur in zip(rounds, rounds[1:]):
            if prev.owner == cur.owner:
                raise ProtocolError("round owners must alternate")
        for r in rounds:
            if r.owner not in (ALICE, BOB):
                raise ProtocolError(f"unknown round owner {r.owner!r}")
            if r.length < 0:
                raise ProtocolError("negative message length")
        if self.output_owner is None:
            owner = other(rounds[-1].owner) if rounds else BOB
            object.__setattr__(self, "output_owner", owner)

    @property
    def transcript_bits(self) -> int:
        return sum(r.length for r in self.rounds)

    def bits_sent(self, player: str) -> int:
        return sum(r.length for r in self.rounds if r.owner == player)

    def execute(self, x, y, public, coin_a, coin_b) -> tuple[tuple, int]:
        """Run once with every coin fixed; returns (transcript, output)."""
        transcript: tuple = ()
        for r in self.rounds:
            if r.owner == ALICE:
                msg = r.message(x, coin_a, public, transcript)
            else:
                msg = r.message(y, coin_b, public, transcript)
            if len(msg) != r.length or msg.strip("01"):
                raise ProtocolError(
                    f"round {len(transcript)} produced {msg!r}, expected {r.length} bits")
            transcript = transcript + (msg,)
        if self.output_owner == ALICE:
            out = self.output(x, coin_a, public, transcript)
        else:
            out = self.output(y, coin_b, public, transcript)
        return transcript, int(out)

    def runs(self, x, y, public_coin=_UNSET):
        """Yield (public, transcript, output, weight) over all coin values."""
        if public_coin is _UNSET:
            publics = zip(self.public_coins.outcomes, self.public_coins.probs)
        else:
            publics = [(public_coin, 1.0)]
        for r, pr in publics:
            if pr <= 0:
                continue
            for a, pa in zip(self.alice_coins.outcomes, self.alice_coins.probs):
                if pa <= 0:
                    continue
                for b, pb in zip(self.bob_coins.outcomes, self.bob_coins.probs):
                    if pb <= 0:
                        continue
                    transcript, out = self.execute(x, y, r, a, b)
                    yield r, transcript, out, pr * pa * pb

    def terms_per_input(self, fixed_public: bool = False) -> int:
        n_pub = 1 if fixed_public else len(self.public_coins.outcomes)
        return n_pub * len(self.alice_coins.outcomes) * len(self.bob_coins.outcomes)


def _check_budget(needed: int, budget: int):
    if needed > budget:
        raise BudgetExceeded(needed, budget)


def transcript_dist(proto: ProtocolSpec, x, y, public_coin=_UNSET,
                    budget: int = DEFAULT_BUDGET) -> Dist:
    """Exact distribution of the transcript M(x, y)."""
    _check_budget(proto.terms_per_input(public_coin is not _UNSET), budget)
    acc: dict = {}
    for _, transcript, _, w in proto.runs(x, y, public_coin):
        acc[transcript] = acc.get(transcript, 0.0) + w
    return Dist.from_mapping(acc)


class InformationCosts(NamedTuple):
    ic_alice: float
    ic_bob: float


@dataclass
class Tabulation:
    """Every (input, coin) execution of a protocol, one row each.

    ``inp`` is the row of the input distribution the execution came from;
    ``x``, ``y`` carry that distribution's codes, ``r`` and ``m`` index
    ``r_labels`` and ``m_labels``. ``weight`` includes the input mass.
    """

    lam: Joint
    inp: np.ndarray
    x: np.ndarray
    y: np.ndarray
    r: np.ndarray
    m: np.ndarray
    weight: np.ndarray
    out: np.ndarray
    r_labels: list
    m_labels: list

    def joint(self, input_mask: np.ndarray | None = None) -> Joint:
        """(X, Y, R, M), optionally restricted to inputs in ``input_mask`` (renormalized)."""
        keep = slice(None) if input_mask is None else input_mask[self.inp]
        w = self.weight[keep]
        if input_mask is not None:
            total = w.sum()
            if total <= 0:
                raise DistributionError("restriction has zero probability")
            w = w / total
        return Joint.from_codes(("X", "Y", "R", "M"),
                                [self.x[keep], self.y[keep], self.r[keep], self.m[keep]],
                                [self.lam.labels[0], self.lam.labels[1], self.r_labels,
                                 self.m_labels], w)

    def error(self, target: np.ndarray) -> float:
        """Probability that the output differs from ``target`` (one value per input row)."""
        return float(min(1.0, self.weight[self.out != target[self.inp]].sum()))


def tabulate(proto: ProtocolSpec, lam: Joint, public_coin=_UNSET,
             budget: int = DEFAULT_BUDGET) -> Tabulation:
    """Run ``proto`` on every input in the support of ``lam`` and every coin value."""
    rows = np.flatnonzero(lam.probs > 0)
    fixed = public_coin is not _UNSET
    _check_budget(len(rows) * proto.terms_per_input(fixed), budget)
    if fixed:
        publics = [(public_coin, 1.0)]
    else:
        publics = [(r, p) for r, p in zip(proto.public_coins.outcomes, proto.public_coins.probs)
                   if p > 0]
    privates = [((a, b), pa * pb)
                for a, pa in zip(proto.alice_coins.outcomes, proto.alice_coins.probs) if pa > 0
                for b, pb in zip(proto.bob_coins.outcomes, proto.bob_coins.probs) if pb > 0]
    x_labels, y_labels = lam.labels[0], lam.labels[1]
    xs, ys = lam.cols[0][rows].tolist(), lam.cols[1][rows].tolist()
    probs = lam.probs[rows].tolist()
    m_index: dict = {}
    ci, cr, cm, cw, co = [], [], [], [], []
    execute = proto.execute
    for row, xi, yi, p in zip(rows.tolist(), xs, ys, probs):
        x, y = x_labels[xi], y_labels[yi]
        for ri, (r, pr) in enumerate(publics):
            for (a, b), pab in privates:
                transcript, out = execute(x, y, r, a, b)
                ci.append(row)
                cr.append(ri)
                cm.append(m_index.setdefault(transcript, len(m_index)))
                cw.append(p * pr * pab)
                co.append(out)
    inp = np.array(ci, dtype=np.int64)
    return Tabulation(lam, inp, lam.cols[0][inp], lam.cols[1][inp],
                      np.array(cr, dtype=np.int64), np.array(cm, dtype=np.int64),
                      np.array(cw, dtype=float), np.array(co, dtype=np.int64),
                      [r for r, _ in publics], list(m_index))


def transcript_joint(proto: ProtocolSpec, lam: Joint, public_coin=_UNSET,
                     budget: int = DEFAULT_BUDGET) -> Joint:
    """The joint distribution of (X, Y, R, M) with inputs drawn from ``lam``."""
    return tabulate(proto, lam, public_coin, budget).joint()


def costs_of(J: Joint) -> "InformationCosts":
    """(I(X:M|YR), I(Y:M|XR)) of an (X, Y, R, M) joint."""
    return InformationCosts(conditional_mutual_information(J, "X", "M", ("Y", "R")),
                            conditional_mutual_information(J, "Y", "M", ("X", "R")))


def input_values(lam: Joint, f: Callable[[Any, Any], int]) -> np.ndarray:
    """``f`` evaluated on every row of an input distribution."""
    x_labels, y_labels = lam.labels[0], lam.labels[1]
    return np.fromiter((f(x_labels[a], y_labels[b])
                        for a, b in zip(lam.cols[0].tolist(), lam.cols[1].tolist())),
                       dtype=np.int64, count=len(lam.probs))


def information_costs(proto: ProtocolSpec, lam: Joint, public_coin=_UNSET,
                      budget: int = DEFAULT_BUDGET) -> InformationCosts:
    """Exact (I(X:M|YR), I(Y:M|XR)) with (X, Y) drawn from ``lam``.

    ``lam`` is a Joint whose first two factors are Alice's and Bob's
    inputs. Passing ``public_coin`` conditions on R = public_coin.
    """
    return costs_of(transcript_joint(proto, lam, public_coin, budget))


@dataclass(frozen=True)
class SampledCosts:
    ic_alice: float
    ic_bob: float
    halfwidth: float
    samples: int
    confidence: float = 0.95


def sampled_information_costs(proto: ProtocolSpec, lam: Joint, samples: int,
                              seed: int, budget: int = DEFAULT_BUDGET,
                              confidence: float = 0.95) -> SampledCosts:
    """Monte Carlo over the public coin, exact for each sampled value.

    Each per-coin cost lies in [0, transcript bits], so the Hoeffding
    half-width is ``bits * sqrt(ln(2 / (1 - confidence)) / (2 * samples))``.
    """
    rng = np.random.default_rng(seed)
    coins = proto.public_coins
    idx = rng.choice(len(coins.outcomes), size=samples, p=np.asarray(coins.probs))
    a_vals, b_vals = [], []
    for i in idx:
        c = information_costs(proto, lam, public_coin=coins.outcomes[i], budget=budget)
        a_vals.append(c.ic_alice)
        b_vals.append(c.ic_bob)
    span = proto.transcript_bits
    half = span * math.sqrt(math.log(2 / (1 - confidence)) / (2 * samples))
    return SampledCosts(float(np.mean(a_vals)), float(np.mean(b_vals)), half, samples, confidence)


def cut_paste_residual(proto: ProtocolSpec, x, y, u, v,
                       budget: int = DEFAULT_BUDGET) -> float:
    """|h(M(x,y), M(u,v)) - h(M(x,v), M(u,y))| for a private-coin protocol."""
    if len(proto.public_coins.support()) > 1:
        raise ProtocolError("cut-and-paste needs a protocol without public coins")
    d1 = hellinger(*common_space(transcript_dist(proto, x, y, budget=budget),
                                 transcript_dist(proto, u, v, budget=budget)))
    d2 = hellinger(*common_space(transcript_dist(proto, x, v, budget=budget),
                                 transcript_dist(proto, u, y, budget=budget)))
    return abs(d1 - d2)


def distributional_error(proto: ProtocolSpec, lam: Joint, f: Callable[[Any, Any], int],
                         budget: int = DEFAULT_BUDGET) -> float:
    """Pr[output != f(X, Y)] over inputs from ``lam`` and all coins."""
    return tabulate(proto, lam, budget=budget).error(input_values(lam, f))


def patch_output(proto: ProtocolSpec) -> ProtocolSpec:
    """Make Bob the output party, appending Alice's answer as one extra bit.

    Bob-output protocols are returned unchanged.
    """
    if proto.output_owner == BOB:
        return proto
    if proto.rounds and proto.rounds[-1].owner == ALICE:
        raise ProtocolError("Alice outputs but also sent the last message")
    alice_out = proto.output

    def answer(x, coin, public, transcript):
        return str(int(alice_out(x, coin, public, transcript)))

    def read_answer(y, coin, public, transcript):
        return int(transcript[-1])

    return replace(proto, rounds=proto.rounds + (Round(ALICE, 1, answer),),
                   output=read_answer, output_owner=BOB, patched=True,
                   name=(proto.name + "+answer") if proto.name else "patched")


def empty_protocol(output: int = 0) -> ProtocolSpec:
    """The zero-round protocol with a constant answer."""
    return ProtocolSpec((), lambda *_: output, name=f"const{output}")


# --- serialization ---------------------------------------------------------

def _bits_to_hex(bits: str) -> str:
    return format(int(bits, 2), "x") if bits else ""


def _hex_to_bits(h: str, length: int) -> str:
    return format(int(h, 16), f"0{length}b") if length else ""


def _label(v):
    if isinstance(v, tuple):
        return [_label(e) for e in v]
    return v


def _unlabel(v):
    if isinstance(v, list):
        return tuple(_unlabel(e) for e in v)
    return v


def _key(inp: int, coin: int, pub: int, prefix_bits: str) -> str:
    return f"{inp:x}:{coin:x}:{pub:x}:{_bits_to_hex(prefix_bits)}"


def protocol_to_json(proto: ProtocolSpec, alice_inputs: Sequence[Hashable],
                     bob_inputs: Sequence[Hashable]) -> str:
    """Tabulate a protocol over the given input domains.

    Each round becomes a lookup table keyed by
    ``"<input>:<own coin>:<public coin>:<prefix>"``; the first three are
    hex indices into the declared lists, the prefix is the concatenated
    transcript so far as hex (its bit length is fixed by the round).
    Messages are hex strings of the declared length.
    """
    alice_inputs, bob_inputs = list(alice_inputs), list(bob_inputs)
    tables: list[dict] = [{} for _ in proto.rounds]
    out_table: dict = {}
    coins = {ALICE: proto.alice_coins.outcomes, BOB: proto.bob_coins.outcomes}
    pubs = proto.public_coins.outcomes
    for xi, x in enumerate(alice_inputs):
        for yi, y in enumerate(bob_inputs):
            for ri, r in enumerate(pubs):
                for ai, a in enumerate(coins[ALICE]):
                    for bi, b in enumerate(coins[BOB]):
                        transcript, out = proto.execute(x, y, r, a, b)
                        prefix = ""
                        for t, rnd in enumerate(proto.rounds):
                            own = (xi, ai) if rnd.owner == ALICE else (yi, bi)
                            tables[t][_key(own[0], own[1], ri, prefix)] = _bits_to_hex(transcript[t])
                            prefix += transcript[t]
                        own = (xi, ai) if proto.output_owner == ALICE else (yi, bi)
                        out_table[_key(own[0], own[1], ri, prefix)] = out
    doc = {
        "name": proto.name,
        "patched": proto.patched,
        "alice_inputs": [_label(v) for v in alice_inputs],
        "bob_inputs": [_label(v) for v in bob_inputs],
        "public_coins": json.loads(proto.public_coins.to_json()),
        "alice_coins": json.loads(proto.alice_coins.to_json()),
        "bob_coins": json.loads(proto.bob_coins.to_json()),
        "rounds": [{"owner": r.owner, "length": r.length, "table": tables[i]}
                   for i, r in enumerate(proto.rounds)],
        "output": {"owner": proto.output_owner, "table": out_table},
    }
    return json.dumps(doc, sort_keys=True)


def protocol_from_json(text: str) -> tuple[ProtocolSpec, list, list]:
    """Inverse of :func:`protocol_to_json`; returns (protocol, alice_inputs, bob_inputs)."""
    doc = json.loads(text)
    alice_inputs = [_unlabel(v) for v in doc["alice_inputs"]]
    bob_inputs = [_unlabel(v) for v in doc["bob_inputs"]]
    coin_dists = {k: Dist.from_json(json.dumps(doc[k]))
                  for k in ("public_coins", "alice_coins", "bob_coins")}
    index = {ALICE: {v: i for i, v in enumerate(alice_inputs)},
             BOB: {v: i for i, v in enumerate(bob_inputs)}}
    coin_index = {ALICE: {v: i for i, v in enumerate(coin_dists["alice_coins"].outcomes)},
                  BOB: {v: i for i, v in enumerate(coin_dists["bob_coins"].outcomes)}}
    pub_index = {v: i for i, v in enumerate(coin_dists["public_coins"].outcomes)}

    def lookup(table, owner, inp, coin, pub, transcript):
        key = _key(index[owner][inp], coin_index[owner][coin], pub_index[pub], "".join(transcript))
        try:
            return table[key]
        except KeyError:
            raise ProtocolError(f"no table entry for {key!r}") from None

    rounds = []
    for rd in doc["rounds"]:
        def message(inp, coin, pub, transcript, _rd=rd):
            return _hex_to_bits(lookup(_rd["table"], _rd["owner"], inp, coin, pub, transcript),
                                _rd["length"])
        rounds.append(Round(rd["owner"], rd["length"], message))
    out_doc = doc["output"]

    def output(inp, coin, pub, transcript):
        return lookup(out_doc["table"], out_doc["owner"], inp, coin, pub, transcript)

    proto = ProtocolSpec(tuple(rounds), output,
                         public_coins=coin_dists["public_coins"],
                         alice_coins=coin_dists["alice_coins"],
                         bob_coins=coin_dists["bob_coins"],
                         output_owner=out_doc["owner"], name=doc.get("name", ""),
                         patched=doc.get("patched", False))
    return proto, alice_inputs, bob_inputs


def random_private_protocol(rng: np.random.Generator, n_rounds: int, msg_bits: int,
                            n_inputs: int, coin_size: int) -> ProtocolSpec:
    """A random private-coin protocol over inputs ``range(n_inputs)``.

    Message functions are random lookup tables indexed by (input, coin,
    transcript prefix), filled lazily from a per-protocol seed so that the
    protocol stays a fixed deterministic object.
    """
    seed = int(rng.integers(2**63))
    coin_a = _random_coin(rng, coin_size)
    coin_b = _random_coin(rng, coin_size)
    rounds = []
    first = ALICE if rng.random() < 0.5 else BOB
    owner = first
    for t in range(n_rounds):
        rounds.append(Round(owner, msg_bits, _table_fn(seed, t, msg_bits)))
        owner = other(owner)
    out = _table_fn(seed, n_rounds, 1)
    return ProtocolSpec(tuple(rounds), lambda *a: int(out(*a)),
                        alice_coins=coin_a, bob_coins=coin_b, name="random")


def _random_coin(rng: np.random.Generator, size: int) -> Dist:
    w = rng.exponential(size=size)
    w /= w.sum()
    return Dist(tuple(range(size)), tuple(float(v) for v in w))


def _table_fn(seed: int, round_index: int, bits: int) -> MessageFn:
    cache: dict = {}

    def fn(inp, coin, public, transcript):
        key = (inp, coin, public, transcript)
        if key not in cache:
            h = zlib.crc32(repr((seed, round_index) + key).encode())
            cache[key] = format(np.random.default_rng(h).integers(2**bits), f"0{bits}b")
        return cache[key]

    return fn


__all__ = [
    "ALICE", "BOB", "BudgetExceeded", "DEFAULT_BUDGET", "DistributionError",
    "InformationCosts", "ProtocolError", "ProtocolSpec", "Round", "SampledCosts",
    "TRIVIAL_COIN", "cut_paste_residual", "distributional_error", "empty_protocol",
    "information_costs", "patch_output", "Tabulation", "tabulate", "costs_of", "input_values", "protocol_from_json", "protocol_to_json",
    "random_private_protocol", "sampled_information_costs", "transcript_dist",
    "transcript_joint",
]
