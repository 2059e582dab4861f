import csv
import json
import os

import pytest

from cbising.cli import main


def run(argv):
    return main(argv)


def test_verify_lemma_hb_pass():
    assert run(["verify", "lemma-hb", "--L1", "1", "--L2", "1",
                "--J", "1", "--h", "1"]) == 0


def test_verify_rp_pass():
    assert run(["verify", "rp", "--L1", "1", "--L2", "1", "--N", "2",
                "--beta", "1"]) == 0


def test_unknown_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        run(["verify", "chessboard", "--unknown-flag"])
    assert exc.value.code == 2


def test_guard_error_exits_2(capsys):
    assert run(["verify", "rp", "--L1", "1", "--L2", "1", "--N", "8",
                "--beta", "1"]) == 2
    assert "error:" in capsys.readouterr().err


def test_bad_config_file_exits_2(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("[1, 2, 3]")
    assert run(["verify", "rp", "--config", str(cfg)]) == 2


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"L1": 1, "L2": 1, "N": 2, "J": 1.0,
                               "h": 5.0, "beta": [1.0]}))
    # config alone: h=5 exceeds the threshold, expected label changes
    out = tmp_path / "o1"
    assert run(["verify", "ground-states", "--config", str(cfg),
                "--out", str(out)]) == 0
    doc = json.loads((out / "verify_ground_states.json").read_text())
    assert doc["config"]["h"] == 5.0
    assert doc["checks"][0]["details"]["expected"] == "field_aligned"
    # flag overrides the file
    out2 = tmp_path / "o2"
    assert run(["verify", "ground-states", "--config", str(cfg), "--h", "1",
                "--out", str(out2)]) == 0
    doc2 = json.loads((out2 / "verify_ground_states.json").read_text())
    assert doc2["config"]["h"] == 1.0
    assert doc2["checks"][0]["details"]["expected"] == "two_symmetric"


def test_run_all_subset_and_outputs(tmp_path):
    out = tmp_path / "battery"
    assert run(["run-all", "--select", "7,8", "--out", str(out)]) == 0
    doc = json.loads((out / "battery.json").read_text())
    assert doc["all_pass"] is True
    assert [c["name"] for c in doc["checks"]] == ["c07_ground_states",
                                                  "c08_antiferro_equivalence"]
    with open(out / "battery.csv") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["name", "lhs", "rhs", "tolerance", "verdict", "seconds"]
    assert all(r[4] == "pass" for r in rows[1:])
    # no stray temp files from the atomic writes
    assert not [p for p in os.listdir(out) if p.endswith(".tmp")]


def test_run_all_bad_select_exits_2():
    assert run(["run-all", "--select", "99"]) == 2


def test_run_all_rerun_identical_modulo_timing(tmp_path):
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        assert run(["run-all", "--select", "7", "--seed", "5",
                    "--out", str(out)]) == 0
        doc = json.loads((out / "battery.json").read_text())

        def strip_timing(node):
            node.pop("seconds", None)
            for ch in node.get("children", ()):
                strip_timing(ch)

        doc.pop("generated_unix")
        for c in doc["checks"]:
            strip_timing(c)
        outs.append(doc)
    assert outs[0] == outs[1]


def test_mc_run_outputs(tmp_path):
    out = tmp_path / "mc"
    assert run(["mc", "run", "--kind", "cellboard", "--L1", "1", "--L2", "2",
                "--N", "2", "--beta", "1", "--sweeps", "4000", "--burn-in",
                "1000", "--thin", "2", "--seed", "3", "--pin", "0,0,+1",
                "--track", "1,1", "--out", str(out), "--gnuplot"]) == 0
    with open(out / "trace.csv") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["sweep", "m", "H", "bad_fraction"]
    assert len(rows) - 1 == (4000 - 1000) // 2
    assert int(rows[1][0]) == 1001  # burn_in + thin - 1
    man = json.loads((out / "manifest.json").read_text())
    assert man["chain"]["pinned"] == [[0, 0, 1]]
    assert "config_sha256" in man
    assert (out / "trace.dat").read_text().startswith("# sweep m H bad_fraction")


def test_mc_scan_outputs(tmp_path):
    out = tmp_path / "scan"
    assert run(["mc", "scan", "--kind", "cellboard", "--L1", "1", "--L2", "1",
                "--N", "8", "--beta", "0.2", "--hs", "1.0", "--sweeps", "2000",
                "--burn-in", "200", "--seed", "1", "--inits", "plus,minus",
                "--out", str(out)]) == 0
    with open(out / "scan.csv") as f:
        rows = list(csv.reader(f))
    assert len(rows) - 1 == 2  # one row per (beta, h, init)
    assert json.loads((out / "manifest.json").read_text())["summaries"]


def test_geometry_dump(capsys):
    assert run(["geometry", "dump", "--kind", "strip", "--L", "2",
                "--N", "4"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["dims"] == [4, 8]
    assert doc["double_kinds"] == ["v1", "v2"]
    assert len(doc["planes"]) == 8


def test_verify_strip_defaults_to_valid_n():
    assert run(["verify", "strip", "--L", "1", "--beta", "1"]) == 0


def test_env_out_dir(tmp_path, monkeypatch):
    out = tmp_path / "envout"
    monkeypatch.setenv("CBISING_OUT", str(out))
    assert run(["verify", "ground-states", "--L1", "1", "--L2", "1",
                "--h", "1"]) == 0
    assert (out / "verify_ground_states.json").exists()
