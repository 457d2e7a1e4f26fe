import json

import pytest

from eevconv import spectra
from eevconv.cli import RunConfig, cmd_scan, ff_ladder, main, read_csv
from eevconv.pauli_algebra import ModelError


def _files(directory):
    return {p.relative_to(directory): p.read_bytes() for p in sorted(directory.rglob("*")) if p.is_file()}


def test_traces_report(models_dir, tmp_path, capsys):
    code = main(
        ["traces", "--model", str(models_dir / "mixed_field_ising.json"), "--obs", "witness:auto",
         "--nmin", "6", "--nmax", "10", "--out", str(tmp_path)]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "Z1Z2Z4Z5" in out
    assert "N-DEPENDENT" not in out
    data = json.loads((tmp_path / "traces.json").read_text())
    entry = data["witness:auto"]
    assert entry["values"]["obstruction_residual"] == pytest.approx(2 * (1 + 1.05**2 + 0.5**2))
    assert entry["values"]["tr(HA)/d"] == 0
    assert entry["n_dependent_sizes"] == []


def test_malformed_model(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"d_loc": 2, "k": 1, "terms": [{"coeff": [1, 0], "string": {"1": "W"}}]}))
    assert main(["scan", "--model", str(path)]) == 2
    err = capsys.readouterr().err
    assert "terms[0].string['1']" in err and "'W'" in err


def test_missing_model(capsys):
    assert main(["scan"]) == 2
    assert "--model" in capsys.readouterr().err


def test_bad_ranges(models_dir, capsys):
    model = str(models_dir / "mixed_field_ising.json")
    assert main(["scan", "--model", model, "--nmin", "9", "--nmax", "8"]) == 2
    assert main(["scan", "--model", model, "--degree", "6"]) == 2
    assert main(["scan", "--model", model, "--nmin", "14", "--nmax", "15"]) == 2
    assert "cap" in capsys.readouterr().err


def test_witness_command(models_dir, tmp_path, capsys):
    assert main(["witness", "--model", str(models_dir / "mixed_field_ising.json"), "--out", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "witness.json").read_text())
    assert data["witness"] == "Z1Z2Z4Z5"
    assert data["h2_overlap"] == pytest.approx(2)


def test_canonicalize_command(models_dir, capsys):
    assert main(["canonicalize", "--model", str(models_dir / "mixed_field_ising.json"), "--obs", "Z2Z3 + X4"]) == 0
    assert "Z2Z3 + X4 -> X1 + Z1Z2" in capsys.readouterr().out


def test_scan_exact_target(models_dir, tmp_path):
    out = tmp_path / "run"
    code = main(["scan", "--model", str(models_dir / "mixed_field_ising.json"), "--obs", "h",
                 "--nmin", "6", "--nmax", "8", "--no-cache", "--out", str(out)])
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    eth = summary["observables"]["h"]["eth"]
    assert eth["exponent"] is None
    assert eth["exponent_status"].startswith("undefined")
    rows = read_csv(out / "scan_h_eth.csv")
    assert [r["N"] for r in rows] == [6, 7, 8]
    assert all(r["r_f"] <= 1e-10 for r in rows)


def test_scan_transverse_weak_eth(models_dir, tmp_path):
    out = tmp_path / "run"
    main(["scan", "--model", str(models_dir / "transverse_field.json"), "--obs", "X1",
          "--nmin", "6", "--nmax", "9", "--no-cache", "--out", str(out)])
    for row in read_csv(out / "scan_X1_zero.csv"):
        assert row["weak_eth"] == pytest.approx(1 / row["N"], abs=1e-10)


def test_csv_round_trip(models_dir, tmp_path):
    out = tmp_path / "run"
    config = RunConfig(model=models_dir / "mixed_field_ising.json", observables=["X1"], nmin=6, nmax=8,
                       out=out, use_cache=False)
    cmd_scan(config)
    rows = read_csv(out / "scan_X1_fit.csv")
    assert list(rows[0]) == ["N", "r_f", "r_f_l1", "weak_eth", "R_f_proxy"]
    assert all(r["R_f_proxy"] >= r["r_f"] for r in rows)
    assert all(r["r_f_l1"] <= r["r_f"] + 1e-15 for r in rows)


def test_cache_reuse(models_dir, tmp_path):
    cache_dir = tmp_path / "cache"
    args = ["scan", "--model", str(models_dir / "mixed_field_ising.json"), "--obs", "X1", "--obs", "h",
            "--nmin", "6", "--nmax", "8", "--cache", str(cache_dir)]
    before = spectra.DIAGONALIZATIONS["count"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    first = spectra.DIAGONALIZATIONS["count"]
    assert first - before == 3
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    assert spectra.DIAGONALIZATIONS["count"] == first
    assert _files(tmp_path / "a") == _files(tmp_path / "b")
    # a different observable set is a different cache entry
    other = [a if a != "h" else "Z1" for a in args]
    assert main(other) == 0
    assert spectra.DIAGONALIZATIONS["count"] == first + 3


def test_corrupt_cache_is_recomputed(models_dir, tmp_path, caplog):
    cache_dir = tmp_path / "cache"
    args = ["scan", "--model", str(models_dir / "mixed_field_ising.json"), "--obs", "X1",
            "--nmin", "6", "--nmax", "6", "--cache", str(cache_dir)]
    main(args + ["--out", str(tmp_path / "a")])
    for path in cache_dir.glob("spectrum_*.npz"):
        path.write_bytes(b"garbage")
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    assert "unreadable" in caplog.text
    assert _files(tmp_path / "a") == _files(tmp_path / "b")


def test_ff_ladder():
    assert ff_ladder(16, 128) == [16, 32, 64, 128]
    assert ff_ladder(10, 12) == [10]


def test_ff_scan_deterministic(tmp_path):
    args = ["ff-scan", "--g", "0.5", "--obs", "X1", "--nmin", "8", "--nmax", "32", "--samples", "2000", "--seed", "5"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "ff_X1_eth.csv").read_bytes()
    assert a == (tmp_path / "b" / "ff_X1_eth.csv").read_bytes()
    rows = read_csv(tmp_path / "a" / "ff_X1_eth.csv")
    assert [r["N"] for r in rows] == [8, 16, 32]
    assert all(r["samples"] == 2000 and r["stderr"] > 0 for r in rows)
    summary = json.loads((tmp_path / "a" / "ff_summary.json").read_text())
    assert summary["observables"]["X1"]["enumeration_checks"]["8"]["ok"]


def test_ff_scan_guards(tmp_path, capsys):
    assert main(["ff-scan", "--samples", "99"]) == 2
    assert main(["ff-scan", "--nmin", "16", "--nmax", "64", "--max-modes", "32"]) == 2
    assert main(["ff-scan", "--obs", "Z1"]) == 2
    err = capsys.readouterr().err
    assert "100" in err and "mode cap" in err and "bilinear" in err


def test_config_validation():
    with pytest.raises(ModelError):
        RunConfig(nmin=10, nmax=8)


def test_module_entry_point(models_dir):
    import subprocess
    import sys

    proc = subprocess.run(
        [sys.executable, "-m", "eevconv", "witness", "--model", str(models_dir / "mixed_field_ising.json")],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert "Z1Z2Z4Z5" in proc.stdout
