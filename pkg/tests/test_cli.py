import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from aspm.cli import CliError, main, parse_range, read_waveform, write_waveform
from aspm.filters import filter_from_csv

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_parse_range():
    assert parse_range("-22:-20:1") == [-22.0, -21.0, -20.0]
    assert parse_range("0:1:0.25") == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert parse_range("4:32", integer=True, geometric=True) == [4, 8, 16, 32]
    assert parse_range("3,5,8", integer=True) == [3, 5, 8]
    assert parse_range("2:4", integer=True) == [2, 3, 4]
    for bad in ("1:0:1", "0:1:0", "1:2:3:4"):
        with pytest.raises(CliError):
            parse_range(bad)
    with pytest.raises(CliError):
        parse_range("0:8", geometric=True)


def test_design_rrc(tmp_path):
    assert main(["design", "--rrc", "--beta", "0.5", "--ns", "2", "--span", "16", "--out", str(tmp_path)]) == 0
    taps = filter_from_csv(tmp_path / "rrc.csv")
    desc = json.loads((tmp_path / "rrc.json").read_text())
    assert len(taps) == desc["n_taps"] == 33
    assert _manifest(tmp_path)["status"] == "ok"


def test_design_pair_descriptor_roundtrip(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["design", "--pair", "--seed", "7", "--sections", "21", "--out", str(a)]) == 0
    assert sorted(p.name for p in a.iterdir()) == [
        "descramble.csv", "descramble.json", "manifest.json", "spread.csv", "spread.json"]
    assert main(["design", "--from", str(a / "spread.json"), "--out", str(b)]) == 0
    np.testing.assert_array_equal(filter_from_csv(b / "spread.csv").taps, filter_from_csv(a / "spread.csv").taps)
    assert (a / "spread.csv").read_bytes() == (b / "spread.csv").read_bytes()


def test_design_needs_a_kind(tmp_path, capsys):
    assert main(["design", "--out", str(tmp_path)]) == 1
    assert "choose one of" in capsys.readouterr().err
    assert _manifest(tmp_path)["status"] == "failed"


def test_sweep_fig5(tmp_path):
    assert main(["sweep", "fig5", "--np", "128:512", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "fig5.csv")
    assert [int(r["Np"]) for r in rows] == [128, 256, 512]
    for r in rows:
        assert 1.12 <= float(r["slope"]) <= 1.17


def test_sweep_fig8_small(tmp_path):
    assert main(["sweep", "fig8", "--np", "32", "--snr", "-6:-4:1", "--bits", "2e4", "--out", str(tmp_path),
                 "--seed", "3"]) == 0
    rows = _rows(tmp_path / "fig8.csv")
    assert list(rows[0]) == ["snr_db", "Np", "Ns", "nbits", "nerrors", "ber_sim", "ber_theory", "papr"]
    assert [float(r["snr_db"]) for r in rows] == [-6.0, -5.0, -4.0]
    for r in rows:
        p, n = float(r["ber_theory"]), int(r["nbits"])
        assert abs(float(r["ber_sim"]) - p) <= 3 * np.sqrt(p * (1 - p) / n)


def test_sweep_zero_bits_header_only(tmp_path):
    assert main(["sweep", "fig8", "--bits", "0", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "fig8.csv").read_text() == "snr_db,Np,Ns,nbits,nerrors,ber_sim,ber_theory,papr\n"


def test_sweep_json_format(tmp_path):
    assert main(["sweep", "fig5", "--np", "64", "--format", "json", "--out", str(tmp_path)]) == 0
    (row,) = json.loads((tmp_path / "fig5.json").read_text())
    assert row["Np"] == 64


def test_config_sweep_long_format(tmp_path):
    out = tmp_path / "k"
    assert main(["sweep", str(CONFIGS / "stego6.cfg"), "--axis", "K", "--values", "2,6", "--out", str(out)]) == 0
    rows = _rows(out / "sweep_K.csv")
    assert list(rows[0]) == ["axis", "value", "component", "metric", "result"]
    snr6 = [float(r["result"]) for r in rows if r["value"] == "6" and r["metric"] == "snr_db"]
    assert len(snr6) == 6 and all(abs(v + 7) < 1 for v in snr6)


def test_config_sweep_snr_axis_negative_values(tmp_path):
    assert main(["sweep", str(CONFIGS / "basic.cfg"), "--axis", "snr_db", "--values", "-14,-12",
                 "--out", str(tmp_path)]) == 0
    vals = {r["value"] for r in _rows(tmp_path / "sweep_snr_db.csv")}
    assert vals == {"-14.0", "-12.0"}


def test_config_sweep_usage_errors(tmp_path):
    assert main(["sweep", str(CONFIGS / "basic.cfg"), "--out", str(tmp_path)]) == 1
    assert main(["sweep", str(CONFIGS / "basic.cfg"), "--axis", "gain", "--values", "1", "--out", str(tmp_path)]) == 1


def test_scenario_stego_report(tmp_path):
    assert main(["scenario", str(CONFIGS / "stego6.cfg"), "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert all(abs(c["snr_db"] + 7) < 1 for c in rep["components"].values())
    rows = _rows(tmp_path / "report.csv")
    assert {"component", "metric", "result"} == set(rows[0])


def test_scenario_deterministic_modulo_volatile_fields(tmp_path):
    reps = []
    for d in ("a", "b"):
        assert main(["scenario", str(CONFIGS / "jam.cfg"), "--out", str(tmp_path / d)]) == 0
        reps.append(json.loads((tmp_path / d / "report.json").read_text()))
    for r in reps:
        r.pop("created")
        r.pop("runtime_s")
    assert reps[0] == reps[1]


def test_scenario_seed_override(tmp_path):
    assert main(["scenario", str(CONFIGS / "jam.cfg"), "--seed", "4", "--out", str(tmp_path / "a")]) == 0
    assert main(["scenario", str(CONFIGS / "jam.cfg"), "--out", str(tmp_path / "b")]) == 0
    a = json.loads((tmp_path / "a" / "report.json").read_text())
    b = json.loads((tmp_path / "b" / "report.json").read_text())
    assert a["config"]["seed"] == 4 and b["config"]["seed"] == 1
    assert a["components"] != b["components"]
    assert _manifest(tmp_path / "a")["master_seed"] == 4
    assert _manifest(tmp_path / "b")["master_seed"] == 1


def test_scenario_dump_taps(tmp_path):
    assert main(["scenario", str(CONFIGS / "jam.cfg"), "--dump-taps", "--out", str(tmp_path)]) == 0
    taps = sorted((tmp_path / "taps").glob("tap_*.csv"))
    assert len(taps) == 5
    x = read_waveform(taps[0])
    assert x.size > 1000 and np.all(np.isfinite(x))


def test_scenario_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[scenario]\nkind = basic\ncolour = red\n[receiver]\nsnyc = MPA\n")
    assert main(["scenario", str(bad), "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert err.count("config error") == 2
    assert _manifest(tmp_path / "o")["status"] == "failed"
    assert main(["scenario", str(tmp_path / "missing.cfg"), "--out", str(tmp_path / "o")]) == 1


def test_analyze(tmp_path):
    x = np.random.default_rng(0).standard_normal(8192)
    write_waveform(tmp_path / "w.csv", x)
    np.testing.assert_array_equal(read_waveform(tmp_path / "w.csv"), x)
    assert main(["analyze", str(tmp_path / "w.csv"), "--psd", "256", "--out", str(tmp_path)]) == 0
    (row,) = _rows(tmp_path / "analysis.csv")
    assert int(row["n"]) == 8192 and abs(float(row["excess_kurtosis"])) < 0.2
    assert len(_rows(tmp_path / "psd.csv")) == 256


def test_analyze_rejects_bad_waveforms(tmp_path):
    (tmp_path / "a.csv").write_text("t,v\n0,1\n")
    (tmp_path / "b.csv").write_text("k,x\n0,1\n2,1\n")
    for name in ("a.csv", "b.csv"):
        assert main(["analyze", str(tmp_path / name), "--out", str(tmp_path)]) == 1


def test_bad_common_flags(tmp_path):
    assert main(["sweep", "fig5", "--seed", "-1", "--out", str(tmp_path)]) == 2
    assert main(["sweep", "fig5", "--jobs", "0", "--out", str(tmp_path)]) == 2
    with pytest.raises(SystemExit):
        main(["frobnicate"])


def test_manifest_written_first(tmp_path):
    # a config that fails after parsing still leaves a manifest behind
    bad = tmp_path / "k.cfg"
    bad.write_text((CONFIGS / "stego6.cfg").read_text().replace("key = 102", "key = 101"))
    out = tmp_path / "o"
    assert main(["sweep", str(bad), "--axis", "K", "--values", "2", "--out", str(out)]) == 1
    m = _manifest(out)
    assert m["status"] == "failed" and m["outputs"] == [] and m["config_path"] == str(bad)


def test_jobs_give_same_rows(tmp_path):
    args = ["sweep", "fig8", "--np", "32", "--snr", "-5,-4", "--bits", "5000"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--jobs", "2", "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "fig8.csv").read_text() == (tmp_path / "b" / "fig8.csv").read_text()


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "aspm.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip()
