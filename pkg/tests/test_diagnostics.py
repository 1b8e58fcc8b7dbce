"""Error norms, conservation totals, the depth-update oracle, and CSV output."""

import numpy as np
import pytest

from swdg import (
    Bathymetry,
    ConfigError,
    DgField,
    NodalBasis,
    build_grid,
    build_scenario,
    conserved_totals,
    convergence_table,
    initial_condition,
    l1_error,
    lemma1_oracle,
    run_scenario,
    scenario_grid,
    well_balance_residual,
    write_snapshot,
)


def constant_field(h=0.7, u=0.2, v=-0.1, c=0.4, delta=0.25,
                   bounds=(0.0, 10.0, 0.0, 5.0), mx=5, my=4):
    grid = build_grid(bounds, mx, my)
    basis = NodalBasis(1)
    shape = (mx, my, basis.n_nodes)
    r = 1.0 + delta * c
    data = np.empty(shape + (5,))
    data[..., 0] = h
    data[..., 1] = h * r
    data[..., 2] = h * r * u
    data[..., 3] = h * r * v
    data[..., 4] = h * c
    return DgField(grid, basis, data), Bathymetry(grid, basis, np.zeros(shape))


# ---------------------------------------------------------------- L1 errors


def test_l1_exact_interpolant_is_zero():
    # flood-wave depth at t=0 is a biquadratic the k=2 interpolant carries
    # exactly, and the tracer is constant
    sc = build_scenario("flood_wave", mesh=(8, 8))
    field, bathy = initial_condition(sc, scenario_grid(sc), NodalBasis(2))
    rep = l1_error(field, bathy, sc.exact, 0.0)
    assert rep["h"] <= 1e-14
    assert rep["eta"] <= 1e-14
    assert rep["c1"] == 0.0
    assert set(rep.absolute) == {"u", "v"}
    assert rep["u"] == 0.0 and rep["v"] == 0.0
    assert rep.mesh == (8, 8) and rep.order == 2 and rep.t == 0.0


def test_l1_constant_state_zero():
    field, bathy = constant_field()

    def exact(t, X, Y):
        one = np.ones_like(X)
        return 0.7 * one, 0.2 * one, -0.1 * one, np.stack([0.4 * one])

    rep = l1_error(field, bathy, exact, 0.0)
    assert rep.absolute == ()
    for name in ("h", "eta", "u", "v", "c1"):
        assert rep[name] <= 1e-13


def test_l1_relative_normalization():
    # numeric field 1.1x the exact constants: every relative error is 0.1
    field, bathy = constant_field(h=0.77, c=0.44)

    def exact(t, X, Y):
        one = np.ones_like(X)
        return 0.7 * one, np.zeros_like(X), np.zeros_like(X), np.stack([0.4 * one])

    rep = l1_error(field, bathy, exact, 0.0)
    assert rep["h"] == pytest.approx(0.1, rel=1e-12)
    assert rep["eta"] == pytest.approx(0.1, rel=1e-12)
    assert rep["c1"] == pytest.approx(0.1, rel=1e-12)


def test_l1_constituent_count_mismatch():
    field, bathy = constant_field()

    def exact(t, X, Y):
        one = np.ones_like(X)
        return one, one, one, np.stack([one, one])

    with pytest.raises(ConfigError, match="constituents"):
        l1_error(field, bathy, exact, 0.0)


# ---------------------------------------------------------------- totals


def test_conserved_totals_constant_state():
    field, bathy = constant_field()
    totals = conserved_totals(field, bathy)
    r = 1.0 + 0.25 * 0.4
    assert totals["h"] == pytest.approx(50.0 * 0.7, rel=1e-14)
    assert totals["p1"] == pytest.approx(50.0 * 0.7 * r, rel=1e-14)
    assert totals["q1"] == pytest.approx(50.0 * 0.7 * 0.4, rel=1e-14)


def test_conserved_totals_still_lake():
    # the cosine bump integrates to 5 exactly on a full-period uniform mesh,
    # so the water volume is 45 and the density-weighted volume 49.5
    sc = build_scenario("equilibrium_mono")
    field, bathy = initial_condition(sc, scenario_grid(sc), NodalBasis(1))
    totals = conserved_totals(field, bathy)
    assert totals["h"] == pytest.approx(45.0, abs=1e-12)
    assert totals["p1"] == pytest.approx(49.5, abs=1e-12)
    assert totals["q1"] == pytest.approx(22.5, abs=1e-12)


# ---------------------------------------------------------------- residuals


def test_well_balance_residual_values():
    field, bathy = constant_field()
    same = well_balance_residual(field, field)
    assert set(same) == {"eta", "p1", "p2", "p3", "q1"}
    assert all(v == 0.0 for v in same.values())
    bumped = field.copy()
    bumped.data[2, 1, 3, 0] += 1e-6
    drift = well_balance_residual(bumped, field)
    assert drift["eta"] == pytest.approx(1e-6, rel=1e-12)
    assert drift["p1"] == 0.0


def test_well_balance_residual_shape_mismatch():
    a, _ = constant_field(mx=5, my=4)
    b, _ = constant_field(mx=4, my=4)
    with pytest.raises(ConfigError, match="shapes differ"):
        well_balance_residual(a, b)


# ---------------------------------------------------------------- lemma oracle


def test_depth_update_three_cell_arithmetic():
    # one update of (1, 0, 1) at rest with lam*alpha = 1/2: the dry middle
    # cell receives exactly half the neighbour average
    h = np.array([1.0, 0.0, 1.0])
    lam_alpha = 0.5
    diffusion = 0.5 * lam_alpha * (h[2] - 2.0 * h[1] + h[0])
    assert h[1] + diffusion == 0.5


def test_depth_update_oracle_guarantee():
    stats = lemma1_oracle(trials=2000, lam_alpha=1.0, seed=3)
    assert stats.passed
    assert stats.min_h >= 0.0
    assert stats.trials == 2000


def test_depth_update_oracle_detects_violation():
    stats = lemma1_oracle(trials=2000, lam_alpha=1.5, seed=11)
    assert not stats.passed
    assert stats.negative_trials > 0
    assert stats.min_h < 0.0


# ---------------------------------------------------------------- snapshots


def test_snapshot_round_trip(tmp_path):
    sc = build_scenario("equilibrium_mono", mesh=(2, 2))
    field, bathy = initial_condition(sc, scenario_grid(sc), NodalBasis(1))
    path = write_snapshot(field, bathy, 0.375, tmp_path / "state.csv")
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "# t = 0.375"
    assert lines[1] == "x,y,z,h,eta,u,v,r,c1"
    assert len(lines) == 2 + 4
    rows = [list(map(float, ln.split(","))) for ln in lines[2:]]
    # y-major ordering: x varies fastest
    assert [r[:2] for r in rows] == [
        [2.5, 1.25], [7.5, 1.25], [2.5, 3.75], [7.5, 3.75]]
    for x, y, z, h, eta, u, v, r, c1 in rows:
        assert h + z == pytest.approx(1.0, abs=1e-15)
        assert eta == pytest.approx(1.0, abs=1e-15)
        assert u == 0.0 and v == 0.0
        assert r == pytest.approx(1.1, rel=1e-15)
        assert c1 == pytest.approx(0.5, rel=1e-15)


def test_snapshot_17g_preserves_bits(tmp_path):
    sc = build_scenario("parabolic_bowl", mesh=(6, 6))
    field, bathy = initial_condition(sc, scenario_grid(sc), NodalBasis(1))
    path = write_snapshot(field, bathy, 1.0 / 3.0, tmp_path / "bowl.csv")
    lines = path.read_text().strip().split("\n")
    assert float(lines[0].split("=")[1]) == 1.0 / 3.0
    for ln in lines[2:]:
        for tok in ln.split(","):
            v = float(tok)
            assert float(f"{v:.17g}") == v


def test_snapshot_y_slice_matches_exact(tmp_path):
    sc = build_scenario("parabolic_bowl", mesh=(10, 10))
    grid = scenario_grid(sc)
    field, bathy = initial_condition(sc, grid, NodalBasis(2))
    path = write_snapshot(field, bathy, 0.0, tmp_path / "slice.csv", y_slice=0.3)
    lines = path.read_text().strip().split("\n")
    rows = [list(map(float, ln.split(","))) for ln in lines[2:]]
    assert len(rows) == 10
    ys = {r[1] for r in rows}
    assert len(ys) == 1  # centre of the cell row containing y = 0.3
    assert ys.pop() == pytest.approx(0.2, abs=1e-14)
    from swdg import exact_solution

    xs = np.array([r[0] for r in rows])
    h_exact, _, _, _ = exact_solution(sc, 0.0, xs, np.full_like(xs, 0.2))
    h_got = np.array([r[3] for r in rows])
    assert np.allclose(h_got, h_exact, rtol=0, atol=1e-14)


def test_snapshot_write_failure_names_path(tmp_path):
    field, bathy = constant_field()
    bad = tmp_path / "missing" / "out.csv"
    with pytest.raises(OSError, match="cannot write snapshot"):
        write_snapshot(field, bathy, 0.0, bad)


# ---------------------------------------------------------------- runs


def test_run_scenario_round_trip():
    sc = build_scenario("equilibrium_mono", mesh=(10, 5))
    res = run_scenario(sc, t_final=0.5)
    assert res.record.n_steps >= 1
    rep = res.errors()
    assert set(rep.errors) == {"h", "eta", "u", "v", "c1"}
    # marching leaves the L1 error at its interpolation level
    rep0 = l1_error(res.initial, res.bathymetry, sc.exact, 0.0)
    assert rep["h"] == pytest.approx(rep0["h"], abs=1e-10)
    drift = well_balance_residual(res.field, res.initial)
    assert max(drift.values()) <= 1e-12


def test_convergence_table_needs_two_meshes():
    sc = build_scenario("equilibrium_two")
    with pytest.raises(ConfigError, match="two meshes"):
        convergence_table(sc, [(10, 6)])


def test_convergence_table_requires_exact():
    sc = build_scenario("perturbation")
    with pytest.raises(ConfigError, match="exact"):
        convergence_table(sc, [(10, 6), (20, 6)])


def test_convergence_table_interpolation_orders():
    # t_final = 0 skips time stepping: pure nodal-interpolation errors must
    # shrink at second order for k = 1
    sc = build_scenario("equilibrium_two")
    tab = convergence_table(sc, [(10, 6), (20, 6), (40, 6)], order=1, t_final=0.0)
    for name in ("h", "eta", "c1", "c2"):
        errs = [rep.errors[name] for rep in tab.reports]
        assert errs[0] > errs[1] > errs[2]
        assert np.mean(tab.orders[name]) == pytest.approx(2.0, abs=0.3)
    text = tab.format(["h", "c1"])
    assert text.splitlines()[0].startswith("mesh")
    assert "10x6" in text and "40x6" in text
    assert text.splitlines()[-1].startswith("order")
