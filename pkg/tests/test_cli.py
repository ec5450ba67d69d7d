import csv
import json

import pytest

from bottleneck_wft.cli import main

CONFIG = {
    "vb": "1/5",
    "alpha": "9/25",
    "n": 6,
    "T": 2,
    "y0": "1/2",
    "rho0": {"breakpoints": [0, 1, "3/2"], "values": ["1/8", "1/2", "7/8", "1/4"]},
}


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(CONFIG))
    return path


def test_riemann_prints_case1_fan(capsys):
    assert main(["riemann", "--left", "0.5", "--right", "0.5", "--vb", "0.2", "--alpha", "0.36"]) == 0
    out = capsys.readouterr().out
    assert "case 1" in out and "nonclassical 18/25 -> 2/25" in out


def test_riemann_json_with_mesh(capsys):
    assert main(["riemann", "--left", "1/2", "--right", "1/16", "--vb", "1/5", "--alpha", "9/25", "--n", "6", "--json"]) == 0
    body = json.loads(capsys.readouterr().out)
    assert body["case"] == 1 and body["discrete"]["ns"] is True


def test_unknown_subcommand_exits_2(capsys):
    assert main(["frobnicate"]) == 2
    assert "usage" in capsys.readouterr().err


def test_bad_density_is_config_error():
    assert main(["riemann", "--left", "2", "--right", "0.5", "--vb", "0.2", "--alpha", "0.36"]) == 2


def test_simulate_outputs(config, tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--config", str(config), "--out", str(out)]) == 0
    with open(out / "snapshots.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "x", "value", "y"]
    assert rows[1] == ["0", "-inf", "1/8", "1/2"]
    events = [json.loads(line) for line in (out / "events.jsonl").read_text().splitlines()]
    assert events and all("/" in e["t"] or e["t"].isdigit() for e in events)
    assert json.loads((out / "summary.json").read_text())["checks_ok"]


def test_simulate_is_byte_deterministic(config, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", str(config), "--out", str(a)]) == 0
    assert main(["simulate", "--config", str(config), "--out", str(b)]) == 0
    for name in ("snapshots.csv", "events.jsonl", "summary.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_simulate_missing_config(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "nope.json")]) == 2


def test_simulate_event_cap_is_invariant_failure(tmp_path):
    path = tmp_path / "cap.json"
    path.write_text(json.dumps({**CONFIG, "max_events": 2}))
    assert main(["simulate", "--config", str(path), "--out", str(tmp_path)]) == 1


def test_stability_report(tmp_path):
    path = tmp_path / "pair.json"
    pair = {**CONFIG, "y0_b": "0.5005", "rho0_b": {"breakpoints": ["0.001", 1, "3/2"], "values": CONFIG["rho0"]["values"]}}
    path.write_text(json.dumps(pair))
    assert main(["stability", "--config", str(path), "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "stability_report.json").read_text())
    assert rep["ratio"] > 0 and rep["within_constant"]


def test_weights_respects_seed(config, tmp_path, monkeypatch):
    monkeypatch.setenv("BOTTLENECK_WFT_SEED", "7")
    assert main(["weights", "--config", str(config), "--out", str(tmp_path), "--samples", "5"]) == 0
    body = json.loads((tmp_path / "weights.json").read_text())
    assert body["seed"] == 7 and body["failures"] == []
    assert body["W_b"] == "1"
    monkeypatch.setenv("BOTTLENECK_WFT_SEED", "abc")
    assert main(["weights", "--config", str(config), "--out", str(tmp_path)]) == 2


def test_converge_csv(config, tmp_path):
    args = ["converge", "--config", str(config), "--out", str(tmp_path), "--levels", "4", "6", "--cells", "256"]
    assert main(args) == 0
    with open(tmp_path / "convergence.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["n"] for r in rows] == ["4", "6"]
    assert rows[1]["l1_to_next_level"] == ""


def test_converge_without_levels(config, tmp_path):
    assert main(["converge", "--config", str(config), "--out", str(tmp_path)]) == 2
