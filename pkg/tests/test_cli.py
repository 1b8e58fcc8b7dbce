"""Command line behaviour: exit codes, outputs, and option validation."""

import numpy as np
import pytest

from swdg.cli import main


def test_verify_reports_ok(capsys):
    assert main(["verify"]) == 0
    out = capsys.readouterr().out
    assert "ok   well-balance order 1" in out
    assert "ok   well-balance order 2" in out
    assert "ok   lemma1 bound" in out
    assert "ok   lemma1 sharpness" in out
    assert "ok   conservation" in out
    assert "all checks passed" in out
    assert "FAIL" not in out


def test_run_writes_snapshot_and_series(tmp_path, capsys):
    code = main(["run", "equilibrium_mono", "--nx", "10", "--ny", "6",
                 "--t-final", "0.5", "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 0
    assert "scenario equilibrium_mono:" in out
    assert "well-balance residual" in out
    snap = tmp_path / "equilibrium_mono_t0.5.csv"
    series = tmp_path / "equilibrium_mono_series.csv"
    assert snap.exists() and series.exists()
    header = series.read_text().splitlines()[0]
    assert header == "t,dt,min_h_nodes,min_h_avg,cells_scaled,total_h,total_p1,total_q1"
    rows = series.read_text().strip().splitlines()[1:]
    t_col = np.array([float(r.split(",")[0]) for r in rows])
    assert t_col[0] == 0.0 and t_col[-1] == pytest.approx(0.5, abs=1e-12)


def test_run_extra_snapshots(tmp_path, capsys):
    code = main(["run", "equilibrium_mono", "--nx", "8", "--ny", "4",
                 "--t-final", "0.4", "--snapshots", "0.1,0.2",
                 "--out", str(tmp_path)])
    assert code == 0
    capsys.readouterr()
    for name in ("equilibrium_mono_t0.1.csv", "equilibrium_mono_t0.2.csv",
                 "equilibrium_mono_t0.4.csv"):
        assert (tmp_path / name).exists()


def test_run_out_dir_from_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("SWDG_OUT", str(tmp_path / "envout"))
    code = main(["run", "equilibrium_mono", "--nx", "8", "--ny", "4",
                 "--t-final", "0.2"])
    assert code == 0
    capsys.readouterr()
    assert (tmp_path / "envout" / "equilibrium_mono_series.csv").exists()


def test_run_accepts_strict_positivity_flag(tmp_path, capsys):
    code = main(["run", "equilibrium_mono", "--nx", "6", "--ny", "4",
                 "--t-final", "0.2", "--strict-positivity", "on",
                 "--out", str(tmp_path)])
    assert code == 0
    capsys.readouterr()


def test_unknown_scenario_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run", "tsunami"])
    assert exc.value.code == 2


def test_bad_strict_positivity_value(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run", "equilibrium_mono", "--strict-positivity", "banana"])
    assert exc.value.code == 2


def test_bad_cfl_returns_usage_code(tmp_path, capsys):
    code = main(["run", "equilibrium_mono", "--cfl", "1.5", "--out", str(tmp_path)])
    assert code == 2
    assert "reason:" in capsys.readouterr().err


def test_custom_scenario_needs_builder(tmp_path, capsys):
    code = main(["run", "still_water_custom", "--out", str(tmp_path)])
    assert code == 2
    assert "build_still_water" in capsys.readouterr().err


def test_converge_prints_order_table(capsys):
    code = main(["converge", "equilibrium_two", "--meshes", "8x4,16x4",
                 "--t-final", "0.5"])
    out = capsys.readouterr().out
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].split() == ["mesh", "c1", "c2"]
    assert lines[1].startswith("8x4")
    assert lines[2].startswith("16x4")
    assert lines[3].startswith("order")


def test_converge_rejects_bad_mesh(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["converge", "equilibrium_two", "--meshes", "8y4"])
    assert exc.value.code == 2
