import csv
import io
import json
import subprocess
import sys

import pytest

from dycklab import cli
from dycklab.augindex import block_protocol, make_mu
from dycklab.protocol import protocol_to_json
from dycklab.quantumkit import full_send_qprotocol, qprotocol_to_json


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_tradeoff_row(capsys):
    code, out, _ = run_cli(capsys, "tradeoff", "--n", "8", "--l", "2", "--seed", "1")
    assert code == 0
    (row,) = rows_of(out)
    assert tuple(row) == cli.TRADEOFF_COLUMNS
    assert row["holds"] == "true" and row["n"] == "8" and row["l"] == "2"
    assert float(row["error"]) == 0
    # lhs is recomputable from the reported columns
    lhs = float(row["ic_alice_over_n"]) ** 0.5 + (2 * float(row["ic_bob"])) ** 0.5
    assert float(row["lhs"]) == pytest.approx(lhs)


def test_tradeoff_all_l(capsys):
    code, out, _ = run_cli(capsys, "tradeoff", "--n", "4")
    assert code == 0
    assert [r["l"] for r in rows_of(out)] == ["1", "2"]


def test_bound(capsys):
    code, out, _ = run_cli(capsys, "bound", "--N", "1000000", "--T", "2", "--eps", "0")
    (row,) = rows_of(out)
    assert float(row["bound"]) == pytest.approx(3.868, abs=0.01)


@pytest.mark.parametrize("argv", [
    ("tradeoff", "--n", "4", "--eps", "0.5"),
    ("bound", "--N", "1000", "--T", "1", "--eps", "0.5"),
])
def test_invalid_eps(capsys, argv):
    code, out, err = run_cli(capsys, *argv)
    assert code == 2 and out == ""
    record = json.loads(err)
    assert record["error"] == "ValueError" and "eps" in record["message"]
    assert record["command"] == argv[0]


def test_module_error_record(capsys):
    code, _, err = run_cli(capsys, "tradeoff", "--n", "6")
    assert code == 2
    assert json.loads(err)["error"] == "ValueError"


def test_common_flags_before_or_after(capsys):
    _, a, _ = run_cli(capsys, "--format", "json", "bound", "--N", "1e6", "--T", "2", "--eps", "0")
    _, b, _ = run_cli(capsys, "bound", "--N", "1e6", "--T", "2", "--eps", "0", "--format", "json")
    assert a == b
    assert json.loads(a)[0]["bound"] == pytest.approx(3.868, abs=0.01)


def test_transcript_gap(capsys):
    code, out, _ = run_cli(capsys, "transcript-gap", "--n", "2", "--l", "1")
    (row,) = rows_of(out)
    assert code == 0 and float(row["gap"]) == pytest.approx(2)
    assert float(row["upper"]) == pytest.approx(5.709, abs=1e-3)


def test_protocol_file(tmp_path, capsys):
    J = make_mu(2, "mu").joint
    path = tmp_path / "p.json"
    path.write_text(protocol_to_json(block_protocol(2, 1), J.labels[0], J.labels[1]))
    code, out, err = run_cli(capsys, "tradeoff", "--n", "2", "--protocol", str(path))
    assert code == 0, err
    (row,) = rows_of(out)
    assert float(row["ic_bob"]) == pytest.approx(1) and row["holds"] == "true"


def test_dyck_check(tmp_path, capsys):
    corpus = tmp_path / "words.txt"
    corpus.write_text("()\n([)]\n\n(())\n")
    summary = tmp_path / "summary.csv"
    code, out, _ = run_cli(capsys, "dyck-check", "--algo", "band", "--w", "1", "--file",
                           str(corpus), "--summary", str(summary))
    assert code == 0
    assert [r["verdict"] for r in rows_of(out)] == ["true", "false", "true", "true"]
    (s,) = rows_of(summary.read_text())
    assert (s["words"], s["accepted"], s["rejected"]) == ("4", "3", "1")


def test_dyck_check_freegroup(capsys):
    _, out, err = run_cli(capsys, "dyck-check", "--algo", "freegroup", "--word", ")(")
    assert rows_of(out)[0]["verdict"] == "true"
    assert "accepted" in err


def test_stream_run(capsys):
    code, out, _ = run_cli(capsys, "stream-run", "--machine", "band", "--w", "1", "--passes",
                           "2", "--word", "(())", "--dir", "fwd")
    (row,) = rows_of(out)
    assert code == 0 and row["verdict"] == "true" and row["passes_used"] == "2"


def test_embed_writes_sidecar(tmp_path, capsys):
    out_path = tmp_path / "embed.csv"
    code, _, _ = run_cli(capsys, "embed", "--n", "3", "--count", "4", "--seed", "2", "--out",
                         str(out_path))
    assert code == 0
    rows = rows_of(out_path.read_text())
    assert len(rows) == 4 and all(r["length"] == "36" for r in rows)
    assert all((r["member"] == "true") == (r["value"] == "0") for r in rows)
    sidecar = json.loads((tmp_path / "embed.csv.layout.json").read_text())
    assert sidecar


def test_compile(capsys):
    code, out, _ = run_cli(capsys, "compile", "--n", "2", "--w", "1")
    assert code == 0
    rows = rows_of(out)
    assert [r["i"] for r in rows] == ["1", "2"]
    for r in rows:
        assert float(r["error"]) == 0
        assert int(r["messages"]) == 2 * int(r["T"])
        assert int(r["max_message_bits"]) <= int(r["space_bits"])
    assert min(float(r["ic_bob"]) for r in rows) <= float(rows[0]["sT_over_n"])


def test_quantum_demo(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "quantum-demo", "--builtin", "full-send", "--n", "2")
    (row,) = rows_of(out)
    assert code == 0 and float(row["lhs"]) == pytest.approx(1.0) and row["holds"] == "true"
    spec = tmp_path / "q.json"
    spec.write_text(qprotocol_to_json(full_send_qprotocol(2)))
    _, out2, _ = run_cli(capsys, "quantum-demo", "--spec", str(spec))
    assert rows_of(out2)[0]["lhs"] == row["lhs"]


def test_selftest(capsys):
    code, out, _ = run_cli(capsys, "selftest")
    assert code == 0
    assert all(r["passed"] == "true" for r in rows_of(out))


def test_deterministic_reports(tmp_path, capsys):
    outs = []
    for j in range(2):
        path = tmp_path / f"r{j}.csv"
        run_cli(capsys, "embed", "--n", "4", "--count", "5", "--seed", "9", "--out", str(path))
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
    a = run_cli(capsys, "tradeoff", "--n", "4", "--seed", "3")[1]
    b = run_cli(capsys, "tradeoff", "--n", "4", "--seed", "3")[1]
    assert a == b


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "dycklab", "bound", "--N", "1e8", "--T", "1",
                           "--eps", "0.2"], capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0
    assert float(rows_of(proc.stdout)[0]["bound"]) == pytest.approx(1.396, abs=0.01)
