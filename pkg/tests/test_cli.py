import subprocess
import sys
from pathlib import Path

import pytest

from latticemon.cli import KV_KEYS, main

DATA = Path(__file__).resolve().parent.parent / "examples" / "data"
TANKS = str(DATA / "tanks3.ini")


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def kv(text):
    return dict(line.split("=", 1) for line in text.splitlines())


def test_replay_t2(capsys):
    code, out, _ = run(capsys, "replay", "--config", TANKS, "--events", DATA / "t2.events")
    assert code == 1
    assert "frontier_clock: 1,2" in out
    assert "  1 x F" in out and "  2 x φ" in out


def test_replay_kv_report(capsys):
    code, out, _ = run(capsys, "replay", "--config", TANKS, "--events", DATA / "t2.events", "--report", "kv")
    assert code == 1
    rep = kv(out)
    assert list(rep) == list(KV_KEYS)
    assert rep["observed_events"] == "6" and rep["frontier_clock"] == "1,2"
    assert (rep["formulas_false"], rep["formulas_open"], rep["formulas_true"]) == ("1", "2", "0")
    assert rep["path_count"] == "3"


def test_replay_with_pruning_keeps_the_verdicts(capsys, tmp_path):
    cfg = tmp_path / "pruned.ini"
    cfg.write_text(Path(TANKS).read_text().replace("prune = off", "prune = on"))
    _, full, _ = run(capsys, "replay", "--config", TANKS, "--events", DATA / "t2.events", "--report", "kv")
    code, pruned, _ = run(capsys, "replay", "--config", cfg, "--events", DATA / "t2.events", "--report", "kv")
    a, b = kv(full), kv(pruned)
    assert code == 1
    assert int(b["live_nodes"]) < int(a["live_nodes"])
    for key in ("formulas_false", "formulas_open", "path_count", "frontier_clock"):
        assert a[key] == b[key]


def test_replay_empty_log(capsys, tmp_path):
    empty = tmp_path / "empty.events"
    empty.write_text("")
    code, out, _ = run(capsys, "replay", "--config", TANKS, "--events", empty, "--report", "kv")
    assert code == 0
    rep = kv(out)
    assert rep["observed_events"] == "0" and rep["live_nodes"] == "1" and rep["formulas_open"] == "1"


def test_replay_malformed_line(capsys, tmp_path):
    bad = tmp_path / "bad.events"
    bad.write_text("A 1 fil12 1,0\nA 2 fil3 zero\n")
    code, _, err = run(capsys, "replay", "--config", TANKS, "--events", bad)
    assert code == 2
    assert "line 2" in err


def test_replay_protocol_error_names_the_line(capsys, tmp_path):
    bad = tmp_path / "bad.events"
    bad.write_text("# header\nA 1 fil3 1,0\n")
    code, _, err = run(capsys, "replay", "--config", TANKS, "--events", bad)
    assert code == 2 and "line 2" in err


def test_missing_files(capsys, tmp_path):
    code, _, err = run(capsys, "replay", "--config", tmp_path / "none.ini", "--events", DATA / "t2.events")
    assert code == 2 and err
    code, _, err = run(capsys, "replay", "--config", TANKS, "--events", tmp_path / "none.events")
    assert code == 2 and err


@pytest.mark.parametrize("name,count", [("t2", 3), ("t1", 5)])
def test_paths(capsys, name, count):
    code, out, _ = run(capsys, "paths", "--config", TANKS, "--events", DATA / f"{name}.events")
    assert code == 0
    lines = out.splitlines()
    assert len(lines) == count
    assert all(line.startswith("(d1,d2,d3) {") for line in lines)


def test_paths_of_t2_show_the_joint_step(capsys):
    _, out, _ = run(capsys, "paths", "--config", TANKS, "--events", DATA / "t2.events")
    assert any(" {fil12,fil3} " in line for line in out.splitlines())


def test_paths_budget(capsys):
    code, _, err = run(capsys, "paths", "--config", TANKS, "--events", DATA / "t1.events", "--max", 1)
    assert code == 3 and err


def test_simulate_sweep0(capsys):
    code, out, _ = run(capsys, "simulate", "--config", DATA / "sweep0.ini")
    assert code == 0
    rep = kv(out)
    assert (rep["live_nodes"], rep["removed_nodes"], rep["path_count"]) == ("175", "81", "10681263")


def test_simulate_is_deterministic(capsys, tmp_path):
    cfg = tmp_path / "random.ini"
    cfg.write_text(Path(TANKS).read_text().replace("prune = off", "policy = random\ndelivery = random\nsteps = 30"))
    first = run(capsys, "simulate", "--config", cfg, "--seed", 7)
    second = run(capsys, "simulate", "--config", cfg, "--seed", 7)
    assert first == second


def test_simulate_then_replay_gives_the_same_report(capsys, tmp_path):
    cfg = tmp_path / "random.ini"
    cfg.write_text(Path(TANKS).read_text().replace("prune = off", "policy = random\ndelivery = random\nsteps = 30"))
    log = tmp_path / "run.events"
    code_a, sim_out, _ = run(capsys, "simulate", "--config", cfg, "--seed", 3, "--emit-events", log)
    code_b, replay_out, _ = run(capsys, "replay", "--config", cfg, "--events", log)
    assert log.read_text().strip()
    assert (code_a, sim_out) == (code_b, replay_out)


def test_simulate_fault_config(capsys):
    code, out, _ = run(capsys, "simulate", "--config", DATA / "tpc3_fault.ini", "--report", "kv")
    assert code == 1
    rep = kv(out)
    assert rep["formulas_open"] == "0" and rep["formulas_true"] == "0" and int(rep["formulas_false"]) > 0


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "latticemon", "replay", "--config", TANKS, "--events", DATA / "t2.events"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 1
    assert "frontier_clock: 1,2" in proc.stdout


def test_events_from_stdin():
    proc = subprocess.run(
        [sys.executable, "-m", "latticemon", "replay", "--config", TANKS, "--events", "-", "--report", "kv"],
        input=(DATA / "t2.events").read_text(), capture_output=True, text=True,
    )
    assert proc.returncode == 1 and "observed_events=6" in proc.stdout
