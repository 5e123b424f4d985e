import csv
import json
import xml.etree.ElementTree as ET

import pytest

from fermimap.cli import DEFAULTS, main

FAST = {
    "simulate": ["n=20"],
    "phase-portrait": ["seeds=10", "iterations=30"],
    "find-orbits": ["T_max=4"],
    "scan-A": [],
    "arith-scan": ["N=2000"],
    "island-area": ["m_values=[8,16,32,64]", "iterations=200", "grid=31"],
    "cantor": ["depth=4"],
    "escape-dim": ["depth=3", "samples=50"],
}


def run(tmp_path, command, *overrides, seed=0, name="out"):
    out = tmp_path / name
    args = [command, "--out", str(out), "--seed", str(seed)]
    for o in overrides:
        args += ["--set", o]
    return main(args), out


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def summary(out, command):
    return dict(read_csv(out / f"{command}-summary.csv")[1:])


@pytest.mark.parametrize("command", sorted(DEFAULTS))
def test_outputs_are_deterministic(tmp_path, command):
    code1, out1 = run(tmp_path, command, *FAST[command], seed=42, name="a")
    code2, out2 = run(tmp_path, command, *FAST[command], seed=42, name="b")
    assert code1 == code2 == 0
    files = sorted(p.name for p in out1.iterdir())
    assert files == sorted(p.name for p in out2.iterdir())
    assert f"{command}.csv" in files and f"{command}-summary.csv" in files
    for name in files:
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


@pytest.mark.parametrize("command", sorted(DEFAULTS))
def test_csv_shape(tmp_path, command):
    code, out = run(tmp_path, command, *FAST[command])
    assert code == 0
    for path in (out / f"{command}.csv", out / f"{command}-summary.csv"):
        rows = read_csv(path)
        assert rows and all(len(r) == len(rows[0]) for r in rows)
    assert read_csv(out / f"{command}-summary.csv")[0] == ["key", "value"]


def test_simulate_schema_and_flat_wall(tmp_path):
    code, out = run(tmp_path, "simulate", "A=0", "n=5", "v=3.0", "t=0.1")
    assert code == 0
    rows = read_csv(out / "simulate.csv")
    assert rows[0] == ["n", "t", "v", "T", "flag"]
    assert len(rows) == 7
    assert {r[2] for r in rows[1:]} == {"3"}


def test_simulate_zero_steps_gives_single_row(tmp_path):
    code, out = run(tmp_path, "simulate", "n=0")
    assert code == 0
    assert len(read_csv(out / "simulate.csv")) == 2


def test_simulate_domain_exit_flagged(tmp_path):
    code, out = run(tmp_path, "simulate", "A=1.0", "gamma=1.0", "t=0.0", "v=1.5", "n=5")
    assert code == 0
    rows = read_csv(out / "simulate.csv")
    assert rows[-1][-1] == "domain-exit"
    assert summary(out, "simulate")["domain_exit"] == "true"


def test_floats_use_seventeen_digits(tmp_path):
    code, out = run(tmp_path, "simulate", "A=0", "n=1", "v=0.1", "t=0.1")
    assert read_csv(out / "simulate.csv")[1][2] == "0.10000000000000001"


@pytest.mark.parametrize(
    "args",
    [
        ["simulate", "--set", "A=-1"],
        ["simulate", "--set", "bogus=1"],
        ["simulate", "--set", "noequals"],
        ["simulate", "--set", "n=-3"],
        ["simulate", "--seed", "-1"],
        ["phase-portrait", "--set", "window=[1,0,5,50]"],
        ["cantor", "--set", "depth=0"],
        ["arith-scan", "--set", "C1=0.5"],
        ["escape-dim", "--set", "depth=0"],
    ],
)
def test_config_errors_exit_2(tmp_path, args, capsys):
    assert main(args + ["--out", str(tmp_path)]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_unreadable_config_exits_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path)]) == 2


def test_numeric_failure_exits_3(tmp_path, capsys):
    code, _ = run(tmp_path, "phase-portrait", "A=1.2", "t0=-0.25", "orbit=[2,10]", *FAST["phase-portrait"])
    assert code == 3
    assert "numerical failure" in capsys.readouterr().err


def test_config_file_and_override_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 3, "A": 0.0, "v": 2.0, "t": 0.5}))
    out = tmp_path / "o"
    assert main(["simulate", "--config", str(cfg), "--out", str(out), "--set", "n=4"]) == 0
    rows = read_csv(out / "simulate.csv")
    assert len(rows) == 6 and rows[1][2] == "2"


def test_arith_scan_regime(tmp_path):
    code, out = run(tmp_path, "arith-scan", "N=1000")
    assert code == 0
    s = summary(out, "arith-scan")
    assert s["regime"] == "AllParameters" and s["overlapping"] == "true"
    rows = read_csv(out / "arith-scan.csv")
    assert rows[0] == ["n", "k", "value", "window_lo", "window_hi"]
    assert int(s["hits"]) == len(rows) - 1


def test_find_orbits_empty_below_one(tmp_path):
    code, out = run(tmp_path, "find-orbits", "T_max=0.5")
    assert code == 0
    rows = read_csv(out / "find-orbits.csv")
    assert len(rows) == 1 and rows[0][:3] == ["n", "m", "kind"]


def test_phase_portrait_svg(tmp_path):
    code, out = run(tmp_path, "phase-portrait", "seeds=15", "iterations=20")
    assert code == 0
    root = ET.parse(out / "phase-portrait.svg").getroot()
    assert root.get("viewBox") == "0 0 800 600"
    circles = root.findall("{http://www.w3.org/2000/svg}circle")
    points = read_csv(out / "phase-portrait.csv")[1:]
    assert len(circles) == len(points)
    assert len({r[0] for r in points}) <= 15


@pytest.mark.parametrize("A, cls, lo, hi", [(1.3198, "Elliptic", 0.3, 1.0), (1.4, "Hyperbolic", 0.0, 0.05)])
def test_phase_portrait_stay_fraction(tmp_path, A, cls, lo, hi):
    code, out = run(tmp_path, "phase-portrait", f"A={A}", "t0=-0.25", "orbit=[2,10]", "seeds=5",
                    "iterations=10", "window=[0,1,2,6]")
    assert code == 0
    s = summary(out, "phase-portrait")
    assert s["classification"] == cls
    assert lo <= float(s["stay_fraction"]) < hi
    svg = ET.parse(out / "phase-portrait.svg").getroot()
    assert len([c for c in svg if c.get("stroke") == "red"]) == 2


def test_scan_A_window(tmp_path):
    code, out = run(tmp_path, "scan-A")
    assert code == 0
    s = summary(out, "scan-A")
    assert float(s["A_lo"]) < float(s["A_hi"]) <= float(s["anchor"])
    rows = read_csv(out / "scan-A.csv")[1:]
    assert len(rows) == 20 and {r[2] for r in rows} == {"Elliptic"}


def test_island_area_serial_matches_parallel(tmp_path, monkeypatch):
    monkeypatch.setenv("FERMI_THREADS", "1")
    _, serial = run(tmp_path, "island-area", *FAST["island-area"], name="s")
    monkeypatch.setenv("FERMI_THREADS", "2")
    _, par = run(tmp_path, "island-area", *FAST["island-area"], name="p")
    assert (serial / "island-area.csv").read_bytes() == (par / "island-area.csv").read_bytes()


def test_bad_thread_count_exits_2(tmp_path, monkeypatch):
    monkeypatch.setenv("FERMI_THREADS", "zero")
    code, _ = run(tmp_path, "island-area", *FAST["island-area"])
    assert code == 2


def test_island_area_reports_slope(tmp_path):
    code, out = run(tmp_path, "island-area", "iterations=300", "grid=41")
    assert code == 0
    assert -3.8 <= float(summary(out, "island-area")["slope"]) <= -2.2


def test_island_area_too_narrow_catalog_leaves_slope_empty(tmp_path):
    code, out = run(tmp_path, "island-area", *FAST["island-area"][1:], "m_values=[8,9,10,11]")
    assert code == 0
    s = summary(out, "island-area")
    assert s["slope"] == "" and "decade" in s["slope_note"]


def test_cantor_and_escape_summaries(tmp_path):
    code, out = run(tmp_path, "cantor", "depth=6")
    assert code == 0
    s = summary(out, "cantor")
    assert s["bound_below_observed"] == "true"
    code, out = run(tmp_path, "escape-dim", "depth=3", "samples=50", name="e")
    assert code == 0
    assert summary(out, "escape-dim")["expansion_sandwich"] == "true"
