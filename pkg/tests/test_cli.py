import json
import shutil
from pathlib import Path

import pytest

from qcasim.cli import main
from qcasim.io import (automaton_to_json, dump_json, load_automaton, load_coding, load_state,
                       state_to_json)

FIX = Path(__file__).parent / "fixtures"


def run(*args):
    return main([str(a) for a in args])


def read(path):
    return Path(path).read_bytes()


# simulate


def test_simulate_swap_hops_two_sites(tmp_path):
    out = tmp_path / "out.json"
    assert run("simulate", "--automaton", FIX / "swap_pqca.json", "--state", FIX / "a_at_0.json",
               "--rounds", 1, "--out", out) == 0
    cells = json.loads(out.read_text())["terms"]
    assert [t["cells"] for t in cells] == [{"2": "a"}]


def test_simulate_zero_rounds_is_canonical_input(tmp_path):
    out = tmp_path / "out.json"
    assert run("simulate", "--automaton", FIX / "bqca_1d.json", "--state", FIX / "two_terms.json",
               "--rounds", 0, "--out", out) == 0
    a = load_automaton(FIX / "bqca_1d.json")
    want = dump_json(state_to_json(load_state(FIX / "two_terms.json", a.alphabet)))
    assert out.read_text() == want


@pytest.mark.parametrize("name", ["swap_pqca.json", "bqca_1d.json"])
def test_simulate_quiescent_stays_quiescent(tmp_path, name):
    out = tmp_path / "out.json"
    assert run("simulate", "--automaton", FIX / name, "--state", FIX / "quiescent.json",
               "--rounds", 3, "--out", out) == 0
    terms = json.loads(out.read_text())["terms"]
    assert len(terms) == 1 and terms[0]["cells"] == {}


def test_simulate_rejects_unnormalized_input_unless_asked(tmp_path, capsys):
    state = json.loads((FIX / "two_terms.json").read_text())
    state["terms"][0]["amplitude"] = [1.0, 0.0]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(state))
    out = tmp_path / "out.json"
    args = ["simulate", "--automaton", FIX / "swap_pqca.json", "--state", path,
            "--rounds", 1, "--out", out]
    assert run(*args) == 2
    assert "norm" in capsys.readouterr().err
    assert run(*args, "--renormalize") == 0


def test_simulate_negative_rounds(tmp_path):
    assert run("simulate", "--automaton", FIX / "swap_pqca.json", "--state", FIX / "a_at_0.json",
               "--rounds", -1, "--out", tmp_path / "o.json") == 2


def test_parse_error_reports_position(tmp_path, capsys):
    bad = tmp_path / "broken.json"
    bad.write_text('{"format_version": 1,\n "n": }')
    assert run("simulate", "--automaton", bad, "--state", FIX / "a_at_0.json",
               "--rounds", 1, "--out", tmp_path / "o.json") == 2
    assert "line 2" in capsys.readouterr().err


def test_field_error_names_the_field(tmp_path, capsys):
    obj = json.loads((FIX / "swap_pqca.json").read_text())
    del obj["n"]
    bad = tmp_path / "nofield.json"
    bad.write_text(json.dumps(obj))
    assert run("verify", "--automaton", bad, "--check", "unitarity") == 2
    assert "n" in capsys.readouterr().err


def test_non_unitary_file_fails_to_parse(tmp_path):
    obj = json.loads((FIX / "swap_pqca.json").read_text())
    obj["matrices"]["u"] = {"layout": "dense",
                            "rows": [[[1, 0] if i == j else [0, 0] for j in range(4)]
                                     for i in range(3)] + [[[0, 0]] * 3 + [[1.5, 0]]]}
    bad = tmp_path / "nonunitary.json"
    bad.write_text(json.dumps(obj))
    assert run("verify", "--automaton", bad, "--check", "unitarity") == 2


# lower


def test_lower_bqca_to_pqca_round_trips(tmp_path):
    assert run("lower", "--automaton", FIX / "bqca_1d.json", "--pass", "pqca",
               "--out-dir", tmp_path) == 0
    target = load_automaton(tmp_path / "automaton.json")
    assert target.alphabet.size == 2 * 2
    assert dump_json(automaton_to_json(target)) == (tmp_path / "automaton.json").read_text()
    meta = json.loads((tmp_path / "coding.json").read_text())
    assert meta["step_ratio"] == 1
    assert meta["source_grouping"] == {"s": 2, "t": 1, "origin": [0]}
    res = load_coding(tmp_path / "coding.json", load_automaton(FIX / "bqca_1d.json"), target)
    assert res.step_ratio == 1


def test_lower_2d_alphabet_size(tmp_path):
    assert run("lower", "--automaton", FIX / "bqca_2d.json", "--pass", "pqca",
               "--out-dir", tmp_path) == 0
    assert load_automaton(tmp_path / "automaton.json").alphabet.size == 2 * 4


def test_lower_multilayer_full(tmp_path):
    assert run("lower", "--automaton", FIX / "multilayer_1d.json", "--pass", "pqca-full",
               "--out-dir", tmp_path) == 0
    meta = json.loads((tmp_path / "coding.json").read_text())
    assert meta["step_ratio"] == 2
    assert meta["target_grouping"] == {"s": 4, "t": 2, "origin": [1]}


def test_lower_errors(tmp_path, capsys):
    assert run("lower", "--automaton", FIX / "multilayer_3d.json", "--pass", "bqca",
               "--out-dir", tmp_path) == 2
    assert "unsupported dimension" in capsys.readouterr().err
    assert run("lower", "--automaton", FIX / "swap_pqca.json", "--pass", "bqca",
               "--out-dir", tmp_path) == 2
    assert run("lower", "--automaton", FIX / "multilayer_noncommuting.json", "--pass", "bqca",
               "--out-dir", tmp_path) == 2


# verify


@pytest.mark.parametrize("name", ["swap_pqca.json", "bqca_1d.json", "bqca_2d.json"])
def test_verify_unitarity_on_fixtures(name):
    assert run("verify", "--automaton", FIX / name, "--check", "unitarity") == 0


@pytest.mark.parametrize("check", ["shift", "causality"])
def test_verify_axioms_pass(check):
    assert run("verify", "--automaton", FIX / "bqca_1d.json", "--check", check,
               "--samples", 5) == 0


def test_verify_negative_control_exit_code(tmp_path):
    out = tmp_path / "rep.json"
    assert run("verify", "--automaton", FIX / "multilayer_noncommuting.json",
               "--check", "commutation", "--seed", 4, "--out", out) == 1
    rep = json.loads(out.read_text())
    assert rep["passed"] is False
    assert rep["parameters"]["seed"] == 4
    assert rep["parameters"]["tolerance"] == 1e-9
    assert run("verify", "--automaton", FIX / "multilayer_1d.json", "--check", "commutation") == 0


def test_verify_report_records_seed_and_tolerance(tmp_path, capsys):
    out = tmp_path / "rep.json"
    assert run("verify", "--automaton", FIX / "bqca_1d.json", "--check", "shift",
               "--samples", 3, "--seed", 9, "--out", out) == 0
    rep = json.loads(out.read_text())
    assert rep["parameters"]["seed"] == 9
    assert rep["tolerance"] == 1e-10
    assert "shift: PASS" in capsys.readouterr().out


def test_verify_commutation_needs_multilayer():
    assert run("verify", "--automaton", FIX / "swap_pqca.json", "--check", "commutation") == 2


def test_verify_window_arguments():
    assert run("verify", "--automaton", FIX / "bqca_1d.json", "--check", "unitarity",
               "--window", "2", "--window-lo", "2", "--margin", "1") == 0
    assert run("verify", "--automaton", FIX / "bqca_1d.json", "--check", "unitarity",
               "--window", "x") == 2


# check-sim


def test_check_sim_round_trip(tmp_path):
    lowered = tmp_path / "low"
    assert run("lower", "--automaton", FIX / "multilayer_1d.json", "--pass", "bqca",
               "--out-dir", lowered) == 0
    out = tmp_path / "sim.json"
    assert run("check-sim", "--source", FIX / "multilayer_1d.json",
               "--target", lowered / "automaton.json", "--coding", lowered / "coding.json",
               "--steps", 2, "--samples", 3, "--out", out) == 0
    rep = json.loads(out.read_text())
    assert rep["passed"] and rep["step_ratio"] == 2


def test_check_sim_missing_coding(tmp_path, capsys):
    assert run("check-sim", "--source", FIX / "bqca_1d.json", "--target", FIX / "bqca_1d.json",
               "--coding", tmp_path / "absent.json") == 2
    assert "absent.json" in capsys.readouterr().err


def test_usage_errors():
    assert run() == 2
    assert run("simulate") == 2
    assert run("--help") == 0


# determinism


def _twice(tmp_path, argv_for):
    outs = []
    for tag in ("a", "b"):
        d = tmp_path / tag
        d.mkdir()
        assert run(*argv_for(d)) in (0, 1)
        outs.append({p.name: read(p) for p in sorted(d.iterdir())})
    return outs


@pytest.mark.parametrize("argv_for", [
    lambda d: ["simulate", "--automaton", FIX / "bqca_1d.json", "--state", FIX / "two_terms.json",
               "--rounds", 3, "--out", d / "s.json"],
    lambda d: ["lower", "--automaton", FIX / "multilayer_1d.json", "--pass", "pqca-full",
               "--out-dir", d],
    lambda d: ["verify", "--automaton", FIX / "bqca_1d.json", "--check", "causality",
               "--samples", 4, "--seed", 2, "--out", d / "r.json"],
], ids=["simulate", "lower", "verify"])
def test_outputs_are_byte_identical(tmp_path, argv_for):
    a, b = _twice(tmp_path, argv_for)
    assert a == b and a


def test_fixture_corpus_round_trips():
    for path in sorted(FIX.glob("*.json")):
        obj = json.loads(path.read_text())
        if "kind" in obj:
            assert dump_json(automaton_to_json(load_automaton(path))) == path.read_text()
        else:
            assert dump_json(state_to_json(load_state(path))) == path.read_text()


def test_module_entry_point(tmp_path):
    import subprocess
    import sys
    exe = shutil.which("qcasim")
    cmd = [exe] if exe else [sys.executable, "-m", "qcasim"]
    r = subprocess.run(cmd + ["verify", "--automaton", str(FIX / "swap_pqca.json"),
                              "--check", "unitarity"], capture_output=True, text=True)
    assert r.returncode == 0
    assert "unitarity: PASS" in r.stdout
