import math
import subprocess
import sys

import pytest
import yaml

from ehswitch.cli import COMPARE_HEADER, main

TWO_TX = {
    "system": {"bandwidth": "1 MHz", "noise_psd": "1e-19 W/Hz", "gain_ref": "best",
               "target_bits": "1000 Mbit", "initial_energy": "zero"},
    "transmitters": [
        {"id": 1, "lambda": "1 1/s", "dn": "1 mJ", "up": "100 mJ", "pathloss": "-100 dB"},
        {"id": 2, "lambda": "1 1/s", "dn": "1 mJ", "up": "100 mJ", "pathloss": "-100 dB"},
    ],
    "experiment": {"runs": 1, "seed": 1, "policies": ["gp-known", "em", "rm", "bm", "tm"]},
}


@pytest.fixture
def two_tx(tmp_path):
    path = tmp_path / "two.config"
    path.write_text(yaml.safe_dump(TWO_TX))
    return str(path)


def with_target(tmp_path, target):
    doc = dict(TWO_TX, system=dict(TWO_TX["system"], target_bits=f"{target!r} Mbit"))
    path = tmp_path / "target.config"
    path.write_text(yaml.safe_dump(doc))
    return str(path)


def cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_schedule_two_deposit_replay(capsys, tmp_path, two_tx):
    tr = tmp_path / "hand.trace"
    tr.write_text("0,1,10\n5,2,90\n")
    cfg = with_target(tmp_path, 5 * math.log2(3) + 5 * math.log2(19))
    code, out, _ = cli(capsys, "schedule", "--config", cfg, "--trace", str(tr))
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# seed=1 config_sha256=")
    assert float(lines[1].split()[1].split("=")[1]) == pytest.approx(10.0, abs=1e-6)
    rows = [ln.split(",") for ln in lines[3:]]
    assert [float(r[2]) for r in rows] == pytest.approx([2.0, 18.0], rel=1e-6)


def test_schedule_single_deposit(capsys, tmp_path, two_tx):
    tr = tmp_path / "one.trace"
    tr.write_text("0,1,100\n")
    code, out, _ = cli(capsys, "schedule", "--config", two_tx, "--trace", str(tr))
    assert code == 3  # 100 mJ cannot carry 1000 Mbit at one gain
    cfg = with_target(tmp_path, 10 * math.log2(11))
    code, out, _ = cli(capsys, "schedule", "--config", cfg, "--trace", str(tr))
    assert code == 0
    assert len(out.splitlines()) == 4


def test_schedule_bundled_default(capsys):
    code, out, _ = cli(capsys, "schedule", "--seed", "3")
    assert code == 0
    rows = [ln.split(",") for ln in out.splitlines()[3:]]
    powers = [float(r[2]) for r in rows]
    assert powers == sorted(powers)
    assert 1 <= len(rows) <= 40


def test_infeasible_diagnostics(capsys, tmp_path, two_tx):
    tr = tmp_path / "t.trace"
    tr.write_text("0,1,1\n")
    code, _, err = cli(capsys, "schedule", "--config", two_tx, "--trace", str(tr))
    assert code == 3
    assert "trace energy" in err and "target" in err


def test_predict_table(capsys):
    code, out, _ = cli(capsys, "predict", "--tx", "2", "--energy", "22", "--power", "11.2082",
                       "--samples", "20000")
    assert code == 0
    lines = out.splitlines()
    assert lines[1] == "n,T_n_s,PP_n,cum_PP,flag"
    gap = float(lines[-1].split("relative_gap=")[1])
    assert abs(gap) < 0.05


def test_predict_truncation_flag(capsys):
    code, out, _ = cli(capsys, "predict", "--tx", "1", "--energy", "3", "--power", "1",
                       "--n-max", "3", "--samples", "2000")
    assert code == 0
    body = [ln for ln in out.splitlines() if ln and ln[0].isdigit()]
    assert len(body) == 3
    assert body[-1].endswith(",truncated")
    assert "truncated=True" in out


def test_predict_unknown_tx(capsys):
    code, _, err = cli(capsys, "predict", "--tx", "9", "--energy", "1", "--power", "1")
    assert code == 2


def test_simulate_and_work_log(capsys, tmp_path):
    out_file = tmp_path / "log.csv"
    code, out, _ = cli(capsys, "simulate", "--seed", "2", "--policies", "em,gp-known", "--out", str(out_file))
    assert code == 0
    assert "policy,switches,completion_s,bits_Mbit,harvests,termination" in out
    text = out_file.read_text()
    assert text.startswith("# seed=2 ")
    assert "id,t_start,t_end,power_mW,bits" in text


def test_compare_csv(capsys):
    code, out, _ = cli(capsys, "compare", "--runs", "2", "--seed", "4", "--policies", "tm,em,gp-known")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# seed=4 config_sha256=")
    assert lines[1] == COMPARE_HEADER
    assert [ln.split(",")[0] for ln in lines[2:]] == ["em", "gp-known", "tm"]
    assert all(ln.split(",")[-1] == "2" for ln in lines[2:])


def test_simulate_hand_instance(capsys, tmp_path):
    tr = tmp_path / "hand.trace"
    tr.write_text("0,1,20\n0,2,20\n")
    cfg = with_target(tmp_path, 4 * math.log2(11))
    code, out, _ = cli(capsys, "simulate", "--config", cfg, "--trace", str(tr),
                       "--out", str(tmp_path / "log.csv"))
    assert code == 0
    rows = [ln.split(",") for ln in out.splitlines()[3:]]
    assert {r[0]: int(r[1]) for r in rows} == {"bm": 1, "em": 1, "gp-known": 1, "rm": 1, "tm": 1}
    log = (tmp_path / "log.csv").read_text()
    assert "1,0.000000000,2.000000000,10.000000000" in log
    assert "2,2.000000000,4.000000000,10.000000000" in log


def test_config_error_exit_code(capsys, tmp_path):
    assert cli(capsys, "compare", "--config", str(tmp_path / "nope.config"))[0] == 2
    assert cli(capsys, "compare", "--policies", "gp-known,magic")[0] == 2
    bad = tmp_path / "bad.config"
    bad.write_text("transmitters: []\n")
    assert cli(capsys, "schedule", "--config", str(bad))[0] == 2


def test_numerical_failure_exit_code(capsys, monkeypatch):
    from ehswitch import cli as cli_mod
    from ehswitch.errors import NumericalFailure

    def boom(*a, **k):
        raise NumericalFailure("no convergence", depth=30)

    monkeypatch.setattr(cli_mod, "mean_working_time", boom)
    code, _, err = cli(capsys, "predict", "--tx", "1", "--energy", "1", "--power", "1")
    assert code == 4
    assert "depth" in err


@pytest.mark.parametrize("argv", [
    ["schedule", "--seed", "7"],
    ["predict", "--tx", "3", "--energy", "102", "--power", "11.2082", "--samples", "5000"],
    ["simulate", "--seed", "7", "--policies", "gp-known,gp-predicted,tm"],
    ["compare", "--seed", "7", "--runs", "2", "--policies", "em,bm"],
])
def test_byte_identical_outputs(tmp_path, argv):
    outs = []
    for k in range(2):
        target = tmp_path / f"out{k}.txt"
        proc = subprocess.run([sys.executable, "-m", "ehswitch", *argv, "--out", str(target)],
                              capture_output=True, check=True)
        outs.append((proc.stdout, target.read_bytes()))
    assert outs[0] == outs[1]
