import csv
import json

import pytest

from securelsh.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_budget_minhash(capsys):
    code, out, _ = run(capsys, "budget", "--family", "minhash", "--s0", "0.75", "--epsilon", "0.05")
    assert code == 0
    doc = json.loads(out)
    assert doc["k"] == 9
    assert doc["f_noise"] == pytest.approx(0.8667, abs=1e-4)
    assert {"rho_prime", "mi_bound_bits_per_bit"} <= set(doc)


def test_budget_with_l(capsys):
    code, out, _ = run(capsys, "budget", "--s0", "0.75", "--epsilon", "0.05", "--l", "64")
    doc = json.loads(out)
    assert code == 0 and doc["mi_bound_bits_total"] == pytest.approx(64 * doc["mi_bound_bits_per_bit"])


def test_synth_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(capsys, "synth", "--n", "100", "--dim", "20", "--seed", "7", "--out", str(a))[0] == 0
    assert run(capsys, "synth", "--n", "100", "--dim", "20", "--seed", "7", "--out", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_text().splitlines()) == 101


def test_eval_pr_hand_example(tmp_path, capsys):
    data = tmp_path / "train.csv"
    data.write_text("id,x,y\n0,1,0\n1,0.96,0.28\n2,0,1\n")
    queries = tmp_path / "q.csv"
    queries.write_text("id,x,y\n10,1,0\n")
    out = tmp_path / "pr.csv"
    code, stdout, _ = run(capsys, "eval-pr", "--data", str(data), "--queries", str(queries),
                          "--k", "1", "--controls", "--out", str(out))
    assert code == 0
    rows = [r for r in csv.DictReader(out.open()) if r["scheme"] == "oracle"]
    # gold at 0.95 = {0, 1}; oracle order 0, 1, 2
    assert [int(r["depth"]) for r in rows] == [1, 2, 3]
    assert [float(r["recall"]) for r in rows] == [0.5, 1.0, 1.0]
    assert [float(r["precision"]) for r in rows] == pytest.approx([1.0, 1.0, 2 / 3])
    summary = {(s["scheme"], s["param"]): s for s in json.loads(stdout)["summary"]}
    assert summary[("oracle", "-")]["ap_mean"] == 1.0
    assert ("vanilla", "k=1") in summary


def test_hash_index_query_roundtrip(tmp_path, capsys):
    data = tmp_path / "d.csv"
    run(capsys, "synth", "--n", "60", "--dim", "8", "--out", str(data))
    emb = tmp_path / "e.json"
    assert run(capsys, "hash", "--input", str(data), "--k", "4", "--l", "64", "--out", str(emb))[0] == 0
    doc = json.loads(emb.read_text())
    assert len(doc["embeddings"]) == 60 and len(doc["embeddings"][0]["bits"]) == 16
    idx = tmp_path / "i.slsi"
    assert run(capsys, "index", "--embeddings", str(emb), "--band-bits", "8", "--out", str(idx))[0] == 0
    code, out, _ = run(capsys, "query", "--index", str(idx), "--embeddings", str(emb), "--top-k", "3")
    assert code == 0
    res = json.loads(out)["results"]
    assert all(r["neighbors"][0]["distance"] == 0 for r in res)


def test_hash_vector_and_set(capsys):
    code, out, _ = run(capsys, "hash", "--vector", "1,2,3", "--l", "8")
    assert code == 0 and len(json.loads(out)["embeddings"][0]["bits"]) == 2
    code, out, _ = run(capsys, "hash", "--family", "minhash", "--set", "1,2,3", "--k", "2", "--l", "16")
    assert code == 0 and json.loads(out)["scheme"]["family"] == "minhash"


def test_hash_noise_modes(capsys):
    code, out, _ = run(capsys, "hash", "--vector", "1,2", "--noise-mode", "projection", "--sigma", "0.5")
    assert code == 0 and json.loads(out)["scheme"]["sigma"] == 0.5
    assert run(capsys, "hash", "--vector", "1,2", "--noise-mode", "bitflip")[0] == 1


def test_attack_small(tmp_path, capsys):
    csv_path = tmp_path / "attack.csv"
    code, out, _ = run(capsys, "attack", "--k", "1,4", "--l", "128", "--dim", "6", "--trials", "3",
                       "--csv", str(csv_path))
    assert code == 0
    reps = json.loads(out)["reports"]
    assert [r["label"] for r in reps] == [["vanilla", "k=1"], ["secure", "k=4"]]
    assert len(csv_path.read_text().splitlines()) == 7


def test_protocol_demo(tmp_path, capsys):
    trace = tmp_path / "t.jsonl"
    code, out, _ = run(capsys, "protocol-demo", "--runs", "120", "--dim", "4", "--l", "32",
                       "--band-bits", "8", "--trace", str(trace))
    doc = json.loads(out)
    assert code == 0 and doc["reconstruction_matches_direct"] and doc["audit_ok"]
    assert doc["index_size"] == 120
    assert len(trace.read_text().splitlines()) == 600
    code, out, _ = run(capsys, "protocol-demo", "--runs", "5", "--dim", "4", "--band-bits", "8", "--leak")
    assert not json.loads(out)["audit_ok"]


def test_exit_codes(tmp_path, capsys):
    assert run(capsys, "budget", "--bogus")[0] == 1
    assert run(capsys, "nosuch")[0] == 1
    assert run(capsys)[0] == 1
    assert run(capsys, "synth")[0] == 1
    assert run(capsys, "budget", "--s0", "0.75", "--epsilon", "2")[0] == 2
    assert run(capsys, "query", "--index", str(tmp_path / "none"), "--embeddings", "x")[0] == 2
    assert run(capsys, "--help")[0] == 0


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.txt"
    cfg.write_text("# budget\nfamily = minhash\ns0 = 0.75\nepsilon = 0.05\n")
    code, out, _ = run(capsys, "budget", "--config", str(cfg))
    assert code == 0 and json.loads(out)["k"] == 9
    code, out, _ = run(capsys, "budget", "--config", str(cfg), "--epsilon", "0.1")
    assert json.loads(out)["epsilon"] == 0.1
    cfg.write_text("nonsense = 1\n")
    assert run(capsys, "budget", "--config", str(cfg))[0] == 1
