import csv
import json

import pytest

from zigzag_net.cli import main

GOLDEN_HEADERS = {
    "delivery": "scheme,n,p,q,C,mean_T,ci95,formula_T",
    "streaming": "t,sender,queue_len",
    "probe": "ray,boundary_scale,resolution",
}

DELIVERY = {
    "experiment": "delivery",
    "topology": {"senders": 4},
    "p": 0.3333333333333333,
    "trials": 200,
    "seed": 11,
}


def write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(obj if isinstance(obj, str) else json.dumps(obj, indent=2))
    return str(path)


def header(path):
    with open(path) as fh:
        return fh.readline().rstrip("\n")


def test_delivery_csv_and_header(tmp_path):
    cfg = write(tmp_path, "d.json", DELIVERY)
    out = tmp_path / "d.csv"
    assert main(["run", cfg, "--out", str(out)]) == 0
    assert header(out) == GOLDEN_HEADERS["delivery"]
    rows = list(csv.DictReader(open(out)))
    assert rows[0]["scheme"] == "zigzag" and rows[0]["n"] == "4"
    assert float(rows[0]["formula_T"]) == pytest.approx(sum(1 / (1 - 3.0**-k) for k in range(1, 5)))


def test_single_trial_rerun_is_byte_identical(tmp_path):
    cfg = write(tmp_path, "d.json", dict(DELIVERY, trials=1))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["run", cfg, "--out", str(a)]) == 0
    assert main(["run", cfg, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_manifest_round_trip(tmp_path):
    cfg = write(tmp_path, "d.json", DELIVERY)
    first = tmp_path / "first.csv"
    assert main(["run", cfg, "policy.tx=random_access", "policy.q=0.5", "policy.C=2", "--out", str(first)]) == 0
    manifest = json.loads((tmp_path / "first.manifest.json").read_text())
    assert manifest["policy"]["C"] == 2 and manifest["_meta"]["schemas"]["delivery"] == 1
    second = tmp_path / "second.csv"
    assert main(["run", str(tmp_path / "first.manifest.json"), "--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()


def test_streaming_and_probe_outputs(tmp_path):
    s = write(tmp_path, "s.json", {"experiment": "streaming", "topology": {"senders": 2}, "horizon": 5000,
                                   "every": 1000, "policy": {"ack": "longest_queue"},
                                   "arrivals": {"rates": [0.3, 0.3]}})
    out = tmp_path / "s.csv"
    assert main(["run", s, "--out", str(out)]) == 0
    assert header(out) == GOLDEN_HEADERS["streaming"]
    assert len(out.read_text().splitlines()) == 1 + 5 * 2
    pr = write(tmp_path, "p.json", {"experiment": "stability_probe", "topology": {"senders": 1}, "horizon": 50_000,
                                    "policy": {"ack": "longest_queue"}, "probe": {"ray": [1.0]}})
    out = tmp_path / "p.csv"
    assert main(["run", pr, "--out", str(out)]) == 0
    assert header(out) == GOLDEN_HEADERS["probe"]
    row = next(csv.DictReader(open(out)))
    assert abs(float(row["boundary_scale"]) - 2 / 3) <= 0.02


def test_time_shared_auto_schedule(tmp_path):
    s = write(tmp_path, "s.json", {"experiment": "streaming", "topology": {"senders": 2}, "horizon": 20_000,
                                   "policy": {"ack": "time_shared", "schedule": "auto"},
                                   "arrivals": {"rates": [0.4, 0.4]}})
    assert main(["run", s, "--out", str(tmp_path / "s.csv")]) == 0


def test_bad_value_reports_line(tmp_path, capsys):
    cfg = write(tmp_path, "bad.json", '{\n  "experiment": "delivery",\n  "trials": 10,\n  "p": 1.5\n}\n')
    assert main(["run", cfg]) == 2
    assert "line 4" in capsys.readouterr().err


def test_bad_json_reports_line(tmp_path, capsys):
    cfg = write(tmp_path, "bad.json", '{\n  "experiment": "delivery",\n  "trials": 10,,\n}\n')
    assert main(["validate", cfg]) == 2
    assert "line 3" in capsys.readouterr().err


def test_unknown_key_and_bad_override(tmp_path, capsys):
    cfg = write(tmp_path, "bad.json", '{\n  "experiment": "delivery",\n  "trails": 10\n}\n')
    assert main(["validate", cfg]) == 2
    assert "line 3" in capsys.readouterr().err
    ok = write(tmp_path, "ok.json", DELIVERY)
    assert main(["validate", ok, "policy.tx=teleport"]) == 2
    assert main(["validate", ok, "nonsense"]) == 2
    assert main(["validate", ok]) == 0


def test_wrong_arrival_count_is_config_error(tmp_path, capsys):
    cfg = write(tmp_path, "s.json", '{\n  "experiment": "streaming",\n  "topology": {"senders": 3},\n'
                                    '  "arrivals": {"rates": [0.1]}\n}\n')
    assert main(["validate", cfg]) == 2
    assert "line 4" in capsys.readouterr().err


def test_horizon_exit_code(tmp_path):
    cfg = write(tmp_path, "h.json", dict(DELIVERY, p=1.0, max_slots=20, trials=2))
    assert main(["run", cfg, "--out", str(tmp_path / "h.csv")]) == 3


def test_list_presets(capsys):
    assert main(["list-presets"]) == 0
    names = [line.split("\t")[0] for line in capsys.readouterr().out.splitlines()]
    assert names == ["figure3", "region2d"]


def test_figure3_preset_small(tmp_path):
    out = tmp_path / "f3.csv"
    assert main(["run", "figure3", "preset.n_max=4", "trials=300", "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out)))
    assert header(out) == GOLDEN_HEADERS["delivery"]
    assert [r["scheme"] for r in rows[:4]] == ["random_access", "zigzag_ra_C2", "zigzag_ra_C3", "zigzag"]
    assert len(rows) == 16


def test_region2d_preset_small(tmp_path):
    out = tmp_path / "r.csv"
    assert main(["run", "region2d", "preset.rays=3", "horizon=50000", "--out", str(out)]) == 0
    for name in ("zigzag", "centralized"):
        path = tmp_path / f"r_{name}.csv"
        assert header(path) == GOLDEN_HEADERS["probe"]
        assert len(list(csv.DictReader(open(path)))) == 3
