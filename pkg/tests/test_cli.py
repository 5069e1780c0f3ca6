import io
import json

import pytest

from topodep.cli import run
from topodep.models import dump_model, load_model, random_lud_model, random_standard_model


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def files(tmp_path):
    lud = tmp_path / "lud.json"
    lud.write_text(dump_model(random_lud_model(2, 1, seed=0)))
    std = tmp_path / "std.json"
    std.write_text(dump_model(random_standard_model(3, 2, seed=1)))
    return tmp_path, lud, std


def test_valid_exit_codes(tmp_path):
    assert call("valid", "K{x}{y} -> D{x}{y}")[0] == 0
    cm = tmp_path / "cm.json"
    code, out, _ = call("valid", "D{x}{y} -> K{x}{y}", "--certificate", str(cm))
    assert code == 1
    M = load_model(cm.read_text())
    assert M.states


def test_sat_exit_codes(tmp_path):
    cert = tmp_path / "c.json"
    assert call("sat", "D{x}{y} & ~K{x}{y}", "--certificate", str(cert))[0] == 0
    assert load_model(cert.read_text()).states
    code, out, _ = call("sat", "D{x} P(x) & ~P(x)", "--json")
    assert code == 1 and json.loads(out)["status"] == "UNSAT"
    code, out, _ = call("sat", "K{x} P(x)", "--oracle", "--json")
    assert code == 0 and json.loads(out)["oracle"] == "SAT"


def test_errors_exit_two():
    assert call("sat", "P(x")[0] == 2
    assert call("valid", "k{x}{y}")[0] == 2
    assert call("check", "/nonexistent.json", "--formula", "P(x)")[0] == 2
    assert call("frobnicate")[0] == 2
    assert call()[0] == 2


def test_check_all(files):
    _, _, std = files
    code, out, _ = call("check", str(std), "--formula", "D{} P(x)", "--all")
    assert code == 0
    assert [l.split("\t")[0] for l in out.strip().splitlines()] == ["s0", "s1", "s2"]
    code, out, _ = call("check", str(std), "--formula", "k{x}{y}", "--all", "--json")
    assert code == 0 and set(json.loads(out)["truth"]) == {"s0", "s1", "s2"}


def test_model_commands(files):
    tmp, lud, std = files
    assert call("model-validate", str(lud))[0] == 0
    code, out, _ = call("model-expand", str(std))
    assert code == 0 and load_model(out).language == "lcd"
    bad = tmp / "bad.json"
    obj = json.loads(lud.read_text())
    obj["dep"]["D"]["x|"] = []
    bad.write_text(json.dumps(obj))
    code, out, _ = call("model-validate", str(bad), "--json")
    assert code == 1
    assert {v["condition"] for v in json.loads(out)["violations"]} >= {"4", "8"}


def test_unravel_verify(files, tmp_path):
    _, lud, _ = files
    out_path = tmp_path / "tree.json"
    code, out, _ = call("unravel", str(lud), "--root", "s0", "--depth", "2", "--verify",
                        "--out", str(out_path))
    assert code == 0 and "0 violations" in out
    assert json.loads(out_path.read_text())["nodes"][0] == "s0"
    assert call("unravel", str(lud), "--depth", "3", "--max-nodes", "10")[0] == 2
    assert call("unravel", str(lud), "--betas", "1/2")[0] == 2


def test_parse_closure_and_proofs(tmp_path):
    code, out, _ = call("parse", "K{x} (P(x) & D{x}{y})", "--json")
    assert code == 0 and json.loads(out)["language"] == "lcd"
    code, out, _ = call("closure", "D{x} P(x)", "--lang", "lfd", "--json")
    assert code == 0 and "D{x} P(x)" in json.loads(out)["members"]
    proof = tmp_path / "p.json"
    proof.write_text(json.dumps({"lines": [
        {"formula": "K{x}{y} -> D{x}{y}", "by": {"axiom": "KnowableDependence"}},
        {"formula": "K{} (K{x}{y} -> D{x}{y})", "by": {"knec": {"of": 1, "X": []}}},
    ]}))
    assert call("proof-verify", str(proof))[0] == 0
    assert call("proof-verify", str(proof), "--lang", "lfd")[0] == 1
    proof.write_text("{}")
    assert call("proof-verify", str(proof))[0] == 2


def test_oracle_compare():
    code, out, _ = call("oracle-compare", "--seed", "3", "--count", "5", "--json")
    assert code == 0 and json.loads(out)["disagreements"] == 0
    assert call("oracle-compare")[0] == 2


def test_json_reports_are_deterministic(files):
    _, lud, _ = files
    for argv in (["sat", "D{x}{y} & ~K{x}{y}", "--json"],
                 ["unravel", str(lud), "--depth", "2", "--verify", "--json"],
                 ["oracle-compare", "--seed", "5", "--count", "4", "--json"]):
        assert call(*argv)[1] == call(*argv)[1]
