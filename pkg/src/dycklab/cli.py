"""Command-line entry point: ``dycklab <subcommand> [options]``.

Every subcommand writes a table (CSV by default, or JSON with the same
keys in the same order) to ``--out`` or stdout. Failures print one JSON
object ``{"error", "message", "command"}`` to stderr and exit with status 2.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .augindex import (analyze, block_family, block_protocol, make_mu, tradeoff_report,
                       transcript_gap)
from .dyck import (FreeGroupMachine, HeightBandMachine, StackMachine, stack_check, validate)
from .protocol import (DEFAULT_BUDGET, information_costs, protocol_from_json,
                       sampled_information_costs)
from .quantumkit import (constant_qprotocol, full_send_qprotocol, identity_protocol,
                         q_tradeoff_report, qprotocol_from_json, random_qprotocol)
from .reduction import (AscensionInput, all_instances, band_passes_for_embedding,
                        compile_protocol, embed, random_ascension, space_bound)
from .streamvm import ConstantMachine, PassSchedule, run

TRADEOFF_COLUMNS = ("protocol", "n", "l", "error", "eps_source", "ic_alice", "ic_alice_over_n",
                    "ic_bob", "lhs", "rhs", "holds", "mode", "terms", "budget", "seed", "version")
GAP_COLUMNS = ("protocol", "n", "l", "eps", "gap", "lower", "upper", "c", "d1", "patched",
               "holds", "mode", "terms", "budget", "seed", "version")
DYCK_COLUMNS = ("line", "length", "algo", "verdict", "passes", "max_state_bits", "declared_bits")
DYCK_SUMMARY_COLUMNS = ("algo", "words", "accepted", "rejected", "max_state_bits")
STREAM_COLUMNS = ("line", "length", "machine", "verdict", "max_state_bits", "declared_bits",
                  "steps", "steps_per_symbol", "passes_used", "complete", "seed")
EMBED_COLUMNS = ("index", "n", "value", "member", "length", "word")
COMPILE_COLUMNS = ("n", "i", "W", "T", "space_bits", "messages", "max_message_bits", "error",
                   "ic_alice", "ic_bob", "sT_over_n", "public_coins", "mode", "version")
BOUND_COLUMNS = ("N", "T", "eps", "bound")
QUANTUM_COLUMNS = ("protocol", "n", "t", "eps", "eps_source", "qic_alice", "qic_bob", "lhs",
                   "rhs", "holds", "version")
SELFTEST_COLUMNS = ("check", "passed", "detail")


def artifact_version() -> str:
    """Package version, plus the git commit when run from a checkout."""
    try:
        out = subprocess.run(["git", "rev-parse", "--short", "HEAD"], capture_output=True,
                             text=True, cwd=Path(__file__).resolve().parent, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return v


def emit(rows: list[dict], columns, fmt: str, out) -> None:
    if fmt == "json":
        out.write(json.dumps([{c: row[c] for c in columns} for row in rows], indent=1) + "\n")
        return
    w = csv.writer(out, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])


def _read_words(args) -> list[str]:
    if args.word is not None:
        return [args.word]
    if args.file is None:
        raise ValueError("give --word or --file")
    text = Path(args.file).read_text()
    return [line.rstrip("\r") for line in text.split("\n")[:-1]] if text.endswith("\n") \
        else text.split("\n")


def _augindex_protocols(args):
    if args.protocol:
        proto, _, _ = protocol_from_json(Path(args.protocol).read_text())
        return [(proto, "")]
    if args.l is not None:
        return [(block_protocol(args.n, args.l), args.l)]
    return [(p, l) for l, p in enumerate(block_family(args.n), start=1)]


def cmd_tradeoff(args) -> list[dict]:
    rows = []
    mu0 = make_mu(args.n, "mu0").joint
    for proto, l in _augindex_protocols(args):
        run_ = analyze(proto, args.n, args.budget)
        rep = tradeoff_report(proto, args.n, args.eps, args.budget, analysis=run_)
        mode = "exact"
        ic_a, ic_b = rep.ic_alice, rep.ic_bob
        if args.samples:
            s = sampled_information_costs(proto, mu0, args.samples, args.seed, args.budget)
            ic_a, ic_b, mode = s.ic_alice, s.ic_bob, f"sampled({s.samples},+-{s.halfwidth:.4g})"
        d, c = ic_a / args.n, ic_b
        lhs = math.sqrt(d) + math.sqrt(2 * c)
        rows.append({"protocol": proto.name, "n": args.n, "l": l, "error": rep.eps,
                     "eps_source": rep.eps_source, "ic_alice": ic_a, "ic_alice_over_n": d,
                     "ic_bob": ic_b, "lhs": lhs, "rhs": rep.rhs,
                     "holds": lhs >= rep.rhs - args.tolerance, "mode": mode,
                     "terms": len(run_.table.weight), "budget": args.budget, "seed": args.seed,
                     "version": args.version})
    return rows


def cmd_gap(args) -> list[dict]:
    rows = []
    for proto, l in _augindex_protocols(args):
        run_ = analyze(proto, args.n, args.budget)
        g = transcript_gap(proto, args.n, args.eps, args.budget, analysis=run_)
        rows.append({"protocol": proto.name, "n": args.n, "l": l, "eps": g.eps, "gap": g.gap,
                     "lower": g.correctness_lb, "upper": g.lemma1_rhs, "c": g.c, "d1": g.d1,
                     "patched": g.patched,
                     "holds": g.correctness_lb - args.tolerance <= g.gap
                     <= g.lemma1_rhs + args.tolerance,
                     "mode": "exact", "terms": len(run_.table.weight), "budget": args.budget,
                     "seed": args.seed, "version": args.version})
    return rows


def _machine(name: str, W: int, prime_bits: int = 61, trials: int = 2):
    if name == "stack":
        return StackMachine()
    if name == "band":
        return HeightBandMachine(W)
    if name == "freegroup":
        return FreeGroupMachine(prime_bits, trials)
    if name == "constant":
        return ConstantMachine()
    raise ValueError(f"unknown machine {name!r}")


def _default_schedule(m, length: int, T: int | None, mode: str) -> PassSchedule:
    if T is None:
        T = m.passes_needed(length) if isinstance(m, HeightBandMachine) else 1
    return PassSchedule.parse(T, mode)


def cmd_dyck(args) -> tuple[list[dict], list[dict]]:
    rows = []
    for j, w in enumerate(_read_words(args), start=1):
        validate(w)
        if args.algo == "stack":
            verdict, passes, bits, declared = stack_check(w), 1, "", ""
        else:
            m = _machine(args.algo, args.w, args.prime_bits, args.trials)
            r = run(m, w, _default_schedule(m, len(w), None, "fwd"), args.seed)
            verdict, passes, bits, declared = (r.verdict, r.passes_used, r.max_state_bits,
                                               m.space_bits(len(w)))
        rows.append({"line": j, "length": len(w), "algo": args.algo, "verdict": verdict,
                     "passes": passes, "max_state_bits": bits, "declared_bits": declared})
    accepted = sum(r["verdict"] for r in rows)
    bits = [r["max_state_bits"] for r in rows if r["max_state_bits"] != ""]
    summary = [{"algo": args.algo, "words": len(rows), "accepted": accepted,
                "rejected": len(rows) - accepted, "max_state_bits": max(bits) if bits else ""}]
    return rows, summary


def cmd_stream(args) -> list[dict]:
    rows = []
    m = _machine(args.machine, args.w, args.prime_bits, args.trials)
    for j, w in enumerate(_read_words(args), start=1):
        validate(w)
        r = run(m, w, _default_schedule(m, len(w), args.passes, args.dir), args.seed)
        rows.append({"line": j, "length": len(w), "machine": m.name, "verdict": r.verdict,
                     "max_state_bits": r.max_state_bits, "declared_bits": m.space_bits(len(w)),
                     "steps": r.steps, "steps_per_symbol": r.steps_per_symbol,
                     "passes_used": r.passes_used, "complete": r.complete, "seed": args.seed})
    return rows


def cmd_embed(args) -> tuple[list[dict], list[dict]]:
    rng = np.random.default_rng(args.seed)
    rows, sidecar = [], []
    for idx in range(args.count):
        a = random_ascension(args.n, rng, args.zero_rate)
        word, layout = embed(a)
        member = stack_check(word)
        rows.append({"index": idx, "n": args.n, "value": a.value, "member": member,
                     "length": len(word), "word": word})
        sidecar.append({"index": idx, "value": a.value,
                        "instances": [{"x": i.x, "k": i.k, "b": i.b} for i in a.instances],
                        "layout": json.loads(layout.to_json())})
    return rows, sidecar


def cmd_compile(args) -> list[dict]:
    n, W = args.n, args.w
    T = args.passes or band_passes_for_embedding(n, W)
    m = HeightBandMachine(W)
    others = None
    if n > 2 or args.fixed_others:
        rng = np.random.default_rng(args.seed)
        pool = all_instances(n, "mu0")
        others = tuple(pool[int(j)] for j in rng.integers(0, len(pool), size=n - 1))
    targets = [args.i] if args.i else range(1, n + 1)
    rows = []
    mu, mu0 = make_mu(n, "mu").joint, make_mu(n, "mu0").joint
    for i in targets:
        proto = compile_protocol(m, T, i, n, others=others)
        run_ = analyze(proto, n, args.budget)
        ic = information_costs(proto, mu0, budget=args.budget)
        longest = max(len(msg) for transcript in run_.table.m_labels for msg in transcript)
        rows.append({"n": n, "i": i, "W": W, "T": T, "space_bits": m.space_bits(4 * n * n),
                     "messages": len(proto.rounds), "max_message_bits": longest,
                     "error": run_.error, "ic_alice": ic.ic_alice, "ic_bob": ic.ic_bob,
                     "sT_over_n": m.space_bits(4 * n * n) * T / n,
                     "public_coins": len(proto.public_coins.outcomes),
                     "mode": "exact" if others is None else "fixed-others",
                     "version": args.version})
    return rows


def cmd_bound(args) -> list[dict]:
    return [{"N": args.N, "T": args.T, "eps": args.eps, "bound": space_bound(args.N, args.T, args.eps)}]


def cmd_quantum(args) -> list[dict]:
    if args.spec:
        spec = qprotocol_from_json(Path(args.spec).read_text())
    elif args.builtin == "full-send":
        spec = full_send_qprotocol(args.n)
    elif args.builtin == "constant":
        spec = constant_qprotocol(args.n)
    elif args.builtin == "identity":
        spec = identity_protocol(args.n, args.t)
    else:
        spec = random_qprotocol(args.n, args.t, np.random.default_rng(args.seed))
    if args.n is not None and spec.n != args.n and args.spec:
        raise ValueError(f"--n {args.n} does not match the protocol's n={spec.n}")
    rep = q_tradeoff_report(spec, args.eps)
    return [{"protocol": spec.name, "n": rep.n, "t": rep.t, "eps": rep.eps,
             "eps_source": rep.eps_source, "qic_alice": rep.qic_alice, "qic_bob": rep.qic_bob,
             "lhs": rep.lhs, "rhs": rep.rhs, "holds": rep.lhs >= rep.rhs - args.tolerance,
             "version": args.version}]


def cmd_selftest(args) -> list[dict]:
    checks = []

    def check(name, ok, detail=""):
        checks.append({"check": name, "passed": bool(ok), "detail": detail})

    rep = tradeoff_report(block_protocol(2, 1), 2)
    check("block(2,1) costs", (rep.d, rep.c) == (0.0, 1.0), f"d={rep.d} c={rep.c}")
    check("trade-off rhs", abs(rep.rhs - 0.30028) < 1e-5, f"rhs={rep.rhs}")
    g = transcript_gap(block_protocol(2, 1), 2)
    check("transcript gap", g.gap == 2.0 and abs(g.lemma1_rhs - 5.709) < 1e-3,
          f"gap={g.gap} rhs={g.lemma1_rhs}")
    check("band (())", run(HeightBandMachine(1), "(())", PassSchedule.forward(2)).verdict)
    check("freegroup )(", run(FreeGroupMachine(), ")(", PassSchedule.forward(1)).verdict)
    a = AscensionInput(tuple(all_instances(2, "mu0")[:2]))
    check("embedding", stack_check(embed(a)[0]) and len(embed(a)[0]) == 16)
    check("bound", abs(space_bound(1e6, 2, 0) - 3.868) < 0.01,
          f"{space_bound(1e6, 2, 0):.4f}")
    q = q_tradeoff_report(full_send_qprotocol(2))
    check("quantum full-send", abs(q.lhs - 1.0) < 1e-6 and q.holds, f"lhs={q.lhs}")
    return checks


def _add_common(p: argparse.ArgumentParser, suppress: bool):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--seed", type=int, default=d(0), help="random seed (default 0)")
    p.add_argument("--budget", type=int, default=d(DEFAULT_BUDGET),
                   help="maximum number of protocol executions to enumerate")
    p.add_argument("--tolerance", type=float, default=d(1e-9),
                   help="slack allowed when checking inequalities")
    p.add_argument("--out", default=d(None), help="write the report here instead of stdout")
    p.add_argument("--format", choices=("csv", "json"), default=d("csv"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dycklab", description=__doc__.splitlines()[0])
    _add_common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        _add_common(p, suppress=True)
        return p

    for name, help_ in (("tradeoff", "classical information-cost trade-off on block protocols"),
                        ("transcript-gap", "distance between Bob's views on 0- and 1-inputs")):
        p = add(name, help_)
        p.add_argument("--n", type=int, required=True)
        p.add_argument("--l", type=int, help="block protocol parameter (default: every l)")
        p.add_argument("--protocol", help="protocol JSON file instead of block protocols")
        p.add_argument("--eps", type=float, help="asserted error (default: measured)")
        if name == "tradeoff":
            p.add_argument("--samples", type=int, default=0,
                           help="estimate costs from this many public-coin samples")

    p = add("dyck-check", "Dyck(2) membership per line")
    p.add_argument("--algo", choices=("stack", "band", "freegroup"), default="stack")
    p.add_argument("--w", type=int, default=1, help="band width")
    p.add_argument("--file")
    p.add_argument("--word")
    p.add_argument("--summary", help="write the summary table here (default: stderr)")
    p.add_argument("--prime-bits", type=int, default=61)
    p.add_argument("--trials", type=int, default=2)

    p = add("stream-run", "run a streaming machine on words")
    p.add_argument("--machine", choices=("stack", "band", "freegroup", "constant"),
                   default="band")
    p.add_argument("--w", type=int, default=1)
    p.add_argument("--passes", type=int, help="pass count (default: enough for the machine)")
    p.add_argument("--dir", choices=("fwd", "alt"), default="fwd")
    p.add_argument("--file")
    p.add_argument("--word")
    p.add_argument("--prime-bits", type=int, default=61)
    p.add_argument("--trials", type=int, default=2)

    p = add("embed", "embed random Augmented Index tuples as Dyck(2) words")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--zero-rate", type=float, default=0.5,
                   help="fraction of tuples whose OR is 0")

    p = add("compile", "compile the height-band machine into protocols for f_n")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--w", type=int, default=1)
    p.add_argument("--passes", type=int)
    p.add_argument("--i", type=int, help="target coordinate (default: all)")
    p.add_argument("--fixed-others", action="store_true",
                   help="fix the other coordinates from --seed instead of enumerating them")

    p = add("bound", "space lower bound for forward multi-pass checkers")
    p.add_argument("--N", type=float, required=True)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--eps", type=float, required=True)

    p = add("quantum-demo", "quantum information-cost trade-off on a small protocol")
    p.add_argument("--spec", help="protocol JSON file")
    p.add_argument("--builtin", choices=("full-send", "constant", "identity", "random"),
                   default="full-send")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--t", type=int, default=2)
    p.add_argument("--eps", type=float)

    add("selftest", "quick end-to-end checks")
    return parser


def _validate(args):
    if getattr(args, "budget", 1) < 1:
        raise ValueError("--budget must be positive")
    if args.tolerance < 0:
        raise ValueError("--tolerance must be nonnegative")
    if args.command in ("tradeoff", "transcript-gap") and args.eps is not None \
            and not 0 <= args.eps <= 0.25:
        raise ValueError(f"eps must lie in [0, 1/4], got {args.eps}")
    if args.command == "bound" and not 0 <= args.eps < 0.25:
        raise ValueError(f"eps must lie in [0, 1/4), got {args.eps}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.version = artifact_version()
    out = io.StringIO()
    try:
        _validate(args)
        extra = None
        if args.command == "tradeoff":
            rows, cols = cmd_tradeoff(args), TRADEOFF_COLUMNS
        elif args.command == "transcript-gap":
            rows, cols = cmd_gap(args), GAP_COLUMNS
        elif args.command == "dyck-check":
            rows, summary = cmd_dyck(args)
            cols = DYCK_COLUMNS
            extra = (summary, DYCK_SUMMARY_COLUMNS, args.summary)
        elif args.command == "stream-run":
            rows, cols = cmd_stream(args), STREAM_COLUMNS
        elif args.command == "embed":
            rows, sidecar = cmd_embed(args)
            cols = EMBED_COLUMNS
            if args.out:
                Path(args.out + ".layout.json").write_text(json.dumps(sidecar, indent=1) + "\n")
        elif args.command == "compile":
            rows, cols = cmd_compile(args), COMPILE_COLUMNS
        elif args.command == "bound":
            rows, cols = cmd_bound(args), BOUND_COLUMNS
        elif args.command == "quantum-demo":
            rows, cols = cmd_quantum(args), QUANTUM_COLUMNS
        else:
            rows, cols = cmd_selftest(args), SELFTEST_COLUMNS
    except Exception as exc:  # every module error becomes one machine-readable record
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc),
                                     "command": args.command}) + "\n")
        return 2
    emit(rows, cols, args.format, out)
    if args.out:
        Path(args.out).write_text(out.getvalue())
    else:
        sys.stdout.write(out.getvalue())
    if extra is not None:
        summary, scols, path = extra
        buf = io.StringIO()
        emit(summary, scols, args.format, buf)
        if path:
            Path(path).write_text(buf.getvalue())
        else:
            sys.stderr.write(buf.getvalue())
    if args.command == "selftest" and not all(r["passed"] for r in rows):
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
