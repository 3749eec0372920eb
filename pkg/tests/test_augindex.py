import itertools
import math

import pytest

from dycklab.augindex import (RHS_CONSTANT, AugIndexInput, BobView, analyze, answer_b_protocol,
                              block_family, block_protocol, constant_protocol, f_eval, f_n, flip,
                              full_send_protocol, make_mu, measured_error, mu0_costs,
                              tradeoff_report, transcript_gap)
from dycklab.probkit import KAPPA, binary_entropy
from dycklab.protocol import empty_protocol, transcript_dist

import oracles


def test_f_eval_examples():
    assert f_eval(AugIndexInput("0110", 2, 1)) == 0
    assert f_eval(AugIndexInput("0110", 3, 0)) == 1
    for x in ("0110", "1011"):
        for k in range(1, 5):
            assert f_eval(AugIndexInput(x, k, int(x[k - 1]))) == 0


def test_input_validation():
    with pytest.raises(ValueError):
        AugIndexInput("0120", 1, 0)
    with pytest.raises(ValueError):
        AugIndexInput("01", 3, 0)
    with pytest.raises(ValueError):
        AugIndexInput("01", 1, 2)
    with pytest.raises(ValueError):
        AugIndexInput.from_views("01", BobView(2, "1", 0))
    inst = AugIndexInput("0110", 3, 1)
    assert inst.bob_view == BobView(3, "01", 1)
    assert AugIndexInput.from_views("0110", inst.bob_view) == inst


def test_flip():
    assert flip("0110", 1) == "1110"
    assert flip("0110", 4) == "0111"


@pytest.mark.parametrize("n", [1, 2, 3, 4, 6])
def test_make_mu_supports(n):
    mu = make_mu(n, "mu")
    mu0 = make_mu(n, "mu0")
    assert mu.support_size == 2 ** n * n * 2
    assert mu0.support_size == 2 ** n * n
    assert all(f_n(x, y) == 0 for (x, y), p in mu0.joint.items())
    assert all(p == pytest.approx(1 / mu0.support_size) for _, p in mu0.joint.items())
    zero = sum(p for (x, y), p in mu.joint.items() if f_n(x, y) == 0)
    assert zero == pytest.approx(0.5)
    # every pair agrees with a brute-force enumeration of the support
    brute = {(x, BobView(k, x[: k - 1], b)) for x in ("".join(t) for t in
                                                      itertools.product("01", repeat=n))
             for k in range(1, n + 1) for b in (0, 1)}
    assert {xy for xy, _ in mu.joint.items()} == brute


def test_mu0_n2_has_eight_triples():
    assert make_mu(2, "mu0").support_size == 8


def test_unknown_distribution():
    with pytest.raises(ValueError):
        make_mu(2, "nu")


@pytest.mark.parametrize("n,l", [(4, 2), (4, 1), (8, 1), (8, 3)])
def test_block_protocol_communication(n, l):
    proto = block_protocol(n, l)
    assert proto.transcript_bits == l + n // 2 ** l
    for (x, y), _ in make_mu(n, "mu").joint.items():
        D = transcript_dist(proto, x, y)
        assert len(D.outcomes) == 1
        (m,) = D.outcomes
        assert len(m[0]) == l and len(m[1]) == n // 2 ** l


def test_block_protocol_invalid():
    with pytest.raises(ValueError):
        block_protocol(6, 1)
    with pytest.raises(ValueError):
        block_protocol(4, 3)
    with pytest.raises(ValueError):
        block_protocol(4, 0)


@pytest.mark.parametrize("n", [2, 4, 8])
def test_block_family_exact(n):
    for proto in block_family(n):
        assert measured_error(proto, n) == 0


@pytest.mark.parametrize("n", [2, 4, 8])
def test_block_costs_within_message_lengths(n):
    for l, proto in enumerate(block_family(n), start=1):
        ic_a, ic_b = mu0_costs(proto, n)
        assert -1e-12 <= ic_b <= l + 1e-9
        assert -1e-12 <= ic_a <= n / 2 ** l + 1e-9


def test_block_2_1_costs_and_report():
    rep = tradeoff_report(block_protocol(2, 1), 2)
    assert (rep.d, rep.c) == (0, 1)
    assert rep.lhs == pytest.approx(math.sqrt(2))
    assert rep.rhs == pytest.approx(oracles.RHS0)
    assert rep.rhs == pytest.approx(0.30028, abs=1e-5)
    assert rep.holds and rep.eps == 0 and rep.eps_source == "measured"


def test_block_costs_closed_form():
    # Bob's message names K's block; under mu0 it carries H(block) = l bits.
    # Alice's reply is x on that block; given Bob's input it reveals the
    # block bits past k, which averages to the number of such bits.
    for n in (4, 8):
        for l, proto in enumerate(block_family(n), start=1):
            w = n >> l
            expected_a = sum(w - 1 - (k - 1) % w for k in range(1, n + 1)) / n
            ic_a, ic_b = mu0_costs(proto, n)
            assert ic_b == pytest.approx(l, abs=1e-9)
            assert ic_a == pytest.approx(expected_a, abs=1e-9)


def test_asserted_eps_and_vacuous_quarter():
    rep = tradeoff_report(block_protocol(4, 1), 4, eps=0.25)
    assert rep.eps_source == "asserted"
    assert rep.rhs == pytest.approx(-math.sqrt(binary_entropy(0.5) / 4))
    assert rep.rhs <= 0 and rep.holds


def test_zero_round_protocol_rejected():
    with pytest.raises(ValueError):
        tradeoff_report(empty_protocol(0), 2)
    with pytest.raises(ValueError):
        tradeoff_report(block_protocol(2, 1), 2, eps=0.3)


def test_odd_n_rejected():
    with pytest.raises(ValueError):
        tradeoff_report(full_send_protocol(3), 3)


def test_gap_block_2_1():
    g = transcript_gap(block_protocol(2, 1), 2)
    assert g.gap == pytest.approx(2)
    assert g.correctness_lb == 2
    assert g.c == 1 and g.d1 == 0
    assert g.lemma1_rhs == pytest.approx(1 + 8 * math.sqrt(KAPPA))
    assert g.lemma1_rhs == pytest.approx(5.709, abs=1e-3)
    assert g.holds and not g.patched


def test_gap_input_ignoring_protocol_is_zero():
    g = transcript_gap(constant_protocol(4), 4, eps=0.25)
    assert g.gap == pytest.approx(0, abs=1e-12)


def test_gap_answer_b():
    # Bob's view is the same on 0- and 1-inputs, and the error is 1/2
    run = analyze(answer_b_protocol(), 2)
    assert run.error == pytest.approx(0.5)
    assert run.bob_view(0).as_dict() == pytest.approx(run.bob_view(1).as_dict())


@pytest.mark.parametrize("n", [2, 4, 8])
def test_gap_brackets_block_family(n):
    for proto in block_family(n):
        run = analyze(proto, n)
        g = transcript_gap(proto, n, analysis=run)
        rep = tradeoff_report(proto, n, analysis=run)
        assert rep.holds
        assert g.correctness_lb - 1e-9 <= g.gap <= g.lemma1_rhs + 1e-9


def test_gap_patches_alice_output():
    # Bob sends his whole view's bit; Alice answers
    from dycklab.protocol import ALICE, BOB, ProtocolSpec, Round
    n = 2

    def bob_sends(view, *a):
        return format(view.k - 1, "01b") + str(view.b)

    proto = ProtocolSpec((Round(BOB, 2, bob_sends),),
                         lambda x, c, r, t: int(x[int(t[0][0])]) ^ int(t[0][1]))
    g = transcript_gap(proto, n)
    assert g.patched and g.eps == 0
    assert g.gap == pytest.approx(2)
    assert g.holds


def test_full_send_has_cost_n_over_two_ish():
    ic_a, ic_b = mu0_costs(full_send_protocol(4), 4)
    # x given Bob's input under mu0: the bits past k stay hidden, on average (n-1)/2
    assert ic_a == pytest.approx(sum(4 - k for k in range(1, 5)) / 4)
    assert ic_b == pytest.approx(0, abs=1e-12)


def test_rhs_constant():
    assert RHS_CONSTANT == pytest.approx(1 / (4 * math.sqrt(math.log(2))))
