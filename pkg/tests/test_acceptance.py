"""Acceptance criteria, one test each, at their stated tolerances.

Every test prints one ``PASS`` or ``FAIL`` line; the lines are repeated in
the pytest terminal summary. Run alone with
``pytest tests/test_acceptance.py -s``.
"""

import itertools
import math
import time
from functools import lru_cache

import numpy as np

from dycklab.augindex import (analyze, block_family, f_n, make_mu, tradeoff_report,
                              transcript_gap)
from dycklab.dyck import (ALPHABET, FreeGroupMachine, HeightBandMachine, free_reduce,
                          gen_instances, stack_check)
from dycklab.probkit import (KAPPA, Dist, Joint, avg_encoding_gap, conditional_mutual_information,
                             hellinger, l1_distance, mutual_information)
from dycklab.protocol import cut_paste_residual, distributional_error, random_private_protocol
from dycklab.quantumkit import (CQState, bures, cq_conditional_holevo, full_send_qprotocol,
                                holevo, hybrid_check, q_tradeoff_report, random_density,
                                random_pure, trace_distance, uhlmann_unitary)
from dycklab.reduction import (AscensionInput, all_instances, band_passes_for_embedding,
                               compile_protocol, embed, random_ascension, space_bound)
from dycklab.streamvm import PassSchedule, run

import oracles

RESULTS = []


def report(name, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} {name}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def random_probs(rng, size):
    w = rng.exponential(size=size)
    w[rng.random(size) < 0.2] = 0
    if w.sum() == 0:
        w[0] = 1
    return w / w.sum()


def test_info_theory_suite():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    N = 10_000
    worst = {"ellhell": 0.0, "convexity": 0.0, "chain": 0.0, "avg_encoding": 0.0}
    for _ in range(N):
        size = int(rng.integers(2, 9))
        outcomes = tuple(range(size))
        p, q = random_probs(rng, size), random_probs(rng, size)
        P, Q = Dist(outcomes, tuple(p)), Dist(outcomes, tuple(q))
        h, d = hellinger(P, Q), l1_distance(P, Q)
        worst["ellhell"] = max(worst["ellhell"], h * h - d / 2, d / 2 - math.sqrt(2) * h)

        parts = int(rng.integers(1, 4))
        alpha = rng.dirichlet(np.ones(parts))
        ps = [random_probs(rng, size) for _ in range(parts)]
        qs = [random_probs(rng, size) for _ in range(parts)]
        mix_p = Dist(outcomes, tuple(sum(a * v for a, v in zip(alpha, ps))))
        mix_q = Dist(outcomes, tuple(sum(a * v for a, v in zip(alpha, qs))))
        rhs = sum(a * hellinger(Dist(outcomes, tuple(u)), Dist(outcomes, tuple(v))) ** 2
                  for a, u, v in zip(alpha, ps, qs))
        worst["convexity"] = max(worst["convexity"], hellinger(mix_p, mix_q) ** 2 - rhs)

        arr = rng.exponential(size=tuple(int(s) for s in rng.integers(1, 4, size=3)))
        arr /= arr.sum()
        J = Joint.from_array(arr, ["A", "B", "C"])
        lhs = mutual_information(J, ("A", "B"), "C")
        split = mutual_information(J, "A", "C") + conditional_mutual_information(J, "B", "C", "A")
        worst["chain"] = max(worst["chain"], abs(lhs - split))

        lhs_e, rhs_e = avg_encoding_gap(Joint.from_array(arr.sum(axis=2), ["A", "B"]))
        worst["avg_encoding"] = max(worst["avg_encoding"], lhs_e - rhs_e)
    # the chain-rule values agree with the dense oracle on the last joint
    oracle_gap = abs(lhs - oracles.mi(arr, (0, 1), (2,)))
    elapsed = time.perf_counter() - start
    ok = (worst["ellhell"] <= 1e-9 and worst["convexity"] <= 1e-9 and worst["chain"] <= 1e-9
          and worst["avg_encoding"] <= 1e-9 and oracle_gap <= 1e-9 and elapsed < 10)
    report("info-theory suite", ok,
           f"{N} samples, worst violations {({k: f'{v:.1e}' for k, v in worst.items()})}, "
           f"{elapsed:.1f}s (limit 10s)")


def test_cut_and_paste():
    rng = np.random.default_rng(77)
    start = time.perf_counter()
    worst = 0.0
    count = 0
    for _ in range(250):
        n_inputs = int(rng.integers(2, 5))
        proto = random_private_protocol(rng, int(rng.integers(1, 4)), int(rng.integers(1, 3)),
                                        n_inputs, int(rng.integers(1, 5)))
        for _ in range(2):
            x, y, u, v = (int(c) for c in rng.integers(0, n_inputs, size=4))
            worst = max(worst, cut_paste_residual(proto, x, y, u, v))
        count += 1
    elapsed = time.perf_counter() - start
    report("cut-and-paste", worst <= 1e-9 and count >= 200 and elapsed < 30,
           f"{count} protocols x 2 quadruples, max residual {worst:.1e}, {elapsed:.1f}s (limit 30s)")


@lru_cache(maxsize=None)
def fleet():
    """Analysis, trade-off report and transcript gap for every block protocol."""
    out = []
    for n in (2, 4, 8, 16):
        for l, proto in enumerate(block_family(n), start=1):
            run_ = analyze(proto, n)
            out.append((n, l, run_.error, tradeoff_report(proto, n, analysis=run_),
                        transcript_gap(proto, n, analysis=run_)))
    return tuple(out)


def test_tradeoff_theorem_desk_scale():
    rows = fleet()
    errors_zero = all(err == 0 for _, _, err, _, _ in rows)
    holds = all(rep.holds for _, _, _, rep, _ in rows)
    rhs_ok = all(abs(rep.rhs - 0.30028) <= 1e-5 and abs(rep.rhs - oracles.RHS0) <= 1e-12
                 for _, _, _, rep, _ in rows)
    first = next(rep for n, l, _, rep, _ in rows if (n, l) == (2, 1))
    exact = (first.d, first.c) == (0, 1)
    ok = errors_zero and holds and rhs_ok and exact and len(rows) == 1 + 2 + 3 + 4
    worst = min(rep.lhs - rep.rhs for _, _, _, rep, _ in rows)
    report("trade-off at desk scale", ok,
           f"{len(rows)} block protocols (n in 2,4,8,16), errors all 0: {errors_zero}, "
           f"min lhs-rhs {worst:.4f}, rhs {first.rhs:.6f}, block(2,1) (d,c)=({first.d},{first.c})")


def test_gap_bracketing():
    rows = fleet()
    bracketed = all(g.correctness_lb - 1e-9 <= g.gap <= g.lemma1_rhs + 1e-9
                    for _, _, _, _, g in rows)
    g21 = next(g for n, l, _, _, g in rows if (n, l) == (2, 1))
    ok = bracketed and abs(g21.gap - 2) <= 1e-9 and abs(g21.lemma1_rhs - 5.709) <= 1e-3
    expected = 1 + 8 * math.sqrt(KAPPA)
    ok = ok and abs(g21.lemma1_rhs - expected) <= 1e-12
    report("transcript gap bracketing", ok,
           f"{len(rows)} protocols bracketed: {bracketed}, block(2,1) gap {g21.gap}, "
           f"upper {g21.lemma1_rhs:.4f}")


def test_dyck_oracles():
    start = time.perf_counter()
    machines = [HeightBandMachine(W) for W in (1, 2, 3)]
    disagreements = 0
    strings = 0
    for L in range(11):
        scheds = [m.schedule(L) for m in machines]
        for t in itertools.product(ALPHABET, repeat=L):
            w = "".join(t)
            expected = stack_check(w)
            for m, sched in zip(machines, scheds):
                disagreements += run(m, w, sched).verdict != expected
            strings += 1
    long_bad = 0
    for seed in range(10_000):
        w = gen_instances(10_000, "random", seed=seed)
        m = machines[seed % 3]
        long_bad += run(m, w, m.schedule(len(w))).verdict != stack_check(w)
    fg = FreeGroupMachine()
    one = PassSchedule.forward(1)
    missed = 0
    false_accepts = 0
    not_identity = 0
    for seed in range(10_000):
        member = gen_instances(128, "member", seed=seed)
        missed += not (stack_check(member) and run(fg, member, one, seed).verdict)
        word = gen_instances(128, "near_member", seed=seed)
        not_identity += free_reduce(word) != ""
        false_accepts += run(fg, word, one, seed).verdict
    elapsed = time.perf_counter() - start
    ok = (disagreements == 0 and strings == sum(4 ** L for L in range(11)) and long_bad == 0
          and missed == 0 and false_accepts == 0 and not_identity == 10_000 and elapsed < 300)
    report("dyck oracles", ok,
           f"{strings} short strings x 3 widths, {disagreements} disagreements; "
           f"10000 long strings, {long_bad} disagreements; freegroup missed {missed}/10000 "
           f"members, {false_accepts}/10000 false accepts on non-identity words; "
           f"{elapsed:.0f}s (limit 300s)")


def test_reduction():
    insts = all_instances(2, "mu")
    bad = 0
    total = 0
    lengths_ok = True
    for pair in itertools.product(insts, repeat=2):
        a = AscensionInput(pair)
        w, _ = embed(a)
        lengths_ok &= len(w) == 16
        bad += stack_check(w) != (a.value == 0)
        total += 1
    rng = np.random.default_rng(99)
    for n in (4, 8):
        for _ in range(1000):
            a = random_ascension(n, rng)
            w, _ = embed(a)
            lengths_ok &= len(w) == 4 * n * n
            bad += stack_check(w) != (a.value == 0)
            total += 1
    n = 2
    mu = make_mu(n, "mu").joint
    compiled = []
    for W in (1, 2, 5):
        m = HeightBandMachine(W)
        T = band_passes_for_embedding(n, W)
        s = m.space_bits(4 * n * n)
        protos = [compile_protocol(m, T, i, n) for i in (1, 2)]
        shape_ok = all(len(p.rounds) == 2 * T and all(r.length <= s for r in p.rounds)
                       for p in protos)
        err = max(distributional_error(p, mu, f_n) for p in protos)
        ic_b = min(tradeoff_report(p, n).ic_bob for p in protos)
        compiled.append((W, T, s, shape_ok, err, ic_b, ic_b <= s * T / n))
    comp_ok = all(shape and err == 0 and within for _, _, _, shape, err, _, within in compiled)
    ok = bad == 0 and total == 256 + 2000 and lengths_ok and comp_ok
    detail = "; ".join(f"W={W} T={T} s={s} err={err} min IC^B={ic:.3f} <= sT/n={s * T / n:.1f}"
                       for W, T, s, _, err, ic, _ in compiled)
    report("reduction", ok, f"{total} embeddings, {bad} mismatches, lengths exact: "
           f"{lengths_ok}; compiled: {detail}")


def test_corollary_calculator():
    a = space_bound(1e6, 2, 0)
    b = space_bound(1e8, 1, 0.2)
    ok = abs(a - 3.868) <= 0.01 and abs(b - 1.396) <= 0.01
    report("corollary calculator", ok, f"bound(1e6,2,0)={a:.4f}, bound(1e8,1,0.2)={b:.4f}")


def test_quantum_suite():
    start = time.perf_counter()
    rng = np.random.default_rng(31)
    chain_worst = 0.0
    for _ in range(1000):
        regs = (("R", int(rng.integers(1, 3))),)
        P = random_density(regs, rng, rank=int(rng.integers(1, 3)))
        Q = random_density(regs, rng)
        b, t = bures(P, Q), trace_distance(P, Q)
        chain_worst = max(chain_worst, b * b - t / 2, t / 2 - math.sqrt(2) * b)
    qubit = (("Q", 1),)
    conv_worst = 0.0
    enc_worst = 0.0
    chain_rule_worst = 0.0
    for _ in range(200):
        k = int(rng.integers(2, 5))
        dist = Dist(tuple(range(k)), tuple(float(v) for v in rng.dirichlet(np.ones(k))))
        Ps = {x: random_density(qubit, rng) for x in range(k)}
        Qs = {x: random_density(qubit, rng) for x in range(k)}
        P, Q = CQState(dist, Ps), CQState(dist, Qs)
        lhs = bures(P.to_density(), Q.to_density()) ** 2
        rhs = sum(p * bures(Ps[x], Qs[x]) ** 2 for x, p in zip(dist.outcomes, dist.probs))
        conv_worst = max(conv_worst, abs(lhs - rhs))
        avg = P.average()
        enc = sum(p * bures(Ps[x], avg) ** 2 for x, p in zip(dist.outcomes, dist.probs))
        enc_worst = max(enc_worst, enc - KAPPA * holevo(P))
        labels = tuple(itertools.product(range(2), range(2)))
        w = rng.dirichlet(np.ones(4))
        cq = CQState(Dist(labels, tuple(float(v) for v in w)),
                     {lab: random_density((("Q", 2),), rng, rank=2) for lab in labels})
        marg = cq.group(lambda lab: lab[0])
        first = holevo(CQState(Dist(tuple(marg), tuple(m[0] for m in marg.values())),
                               {x: m[1].average() for x, m in marg.items()}))
        chain_rule_worst = max(chain_rule_worst, abs(
            holevo(cq) - first - cq_conditional_holevo(cq, lambda lab: lab[0])))
    regs = (("H1", 2), ("H2", 2))
    uhl_worst = 0.0
    for _ in range(100):
        a, b = random_pure(regs, rng), random_pure(regs, rng)
        U = uhlmann_unitary(a, b, ["H1"])
        uhl_worst = max(uhl_worst, abs(bures(a.apply(U, ["H1"]), b)
                                       - bures(a.reduce(["H2"]), b.reduce(["H2"]))))
    spec = full_send_qprotocol(2)
    rep = q_tradeoff_report(spec)
    slack = min(row.slack for z in ("00", "01", "10", "11")
                for row in hybrid_check(spec, 1, 2, z).rows)
    elapsed = time.perf_counter() - start
    ok = (chain_worst <= 1e-9 and conv_worst <= 1e-9 and chain_rule_worst <= 1e-9
          and enc_worst <= 1e-9 and uhl_worst <= 1e-6 and abs(rep.lhs - 1.0) <= 1e-6
          and abs(rep.rhs - 0.30028) <= 1e-5 and rep.holds and slack >= -1e-6 and elapsed < 60)
    report("quantum suite", ok,
           f"trace/Bures chain {chain_worst:.1e}, convexity {conv_worst:.1e}, chain rule "
           f"{chain_rule_worst:.1e}, average encoding {enc_worst:.1e}, Uhlmann {uhl_worst:.1e}, "
           f"full-send lhs {rep.lhs:.6f} vs rhs {rep.rhs:.5f}, hybrid min slack {slack:.3f}, "
           f"{elapsed:.1f}s (limit 60s)")
