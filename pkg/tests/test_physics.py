"""Reformulated fluxes, source, Lax-Friedrichs coupling, and wave speeds."""

import numpy as np
import pytest

from swdg import (
    InvalidStateError,
    NodalBasis,
    build_scenario,
    compute_B,
    initial_condition,
    lf_flux,
    physical_flux,
    point_speeds,
    scenario_grid,
    source_term,
    wave_speed,
)
from swdg.physics import RATIO_GRAD_CAP, flux_pair


def still_water_state(C=1.0, r_b=1.1, z=0.3, c=0.5):
    h = C - z
    return np.array([C, h * r_b, 0.0, 0.0, h * c])


def test_still_water_flux_x():
    U = still_water_state()
    F = physical_flux(U, np.array(0.3), B=1.0, g=1.0, axis=0)
    assert np.allclose(F, [0.0, 0.0, 0.55, 0.0, 0.0], rtol=0, atol=1e-15)


def test_still_water_flux_y():
    U = still_water_state()
    G = physical_flux(U, np.array(0.3), B=1.0, g=1.0, axis=1)
    assert np.allclose(G, [0.0, 0.0, 0.0, 0.55, 0.0], rtol=0, atol=1e-15)


def test_still_water_flux_independent_of_bathymetry():
    # with B equal to the surface level the momentum flux is g C^2 r_b / 2
    # at every point, whatever Z is underneath
    for z in (0.0, 0.2, 0.7):
        U = still_water_state(z=z)
        F = physical_flux(U, np.array(z), B=1.0, g=1.0, axis=0)
        assert F[2] == pytest.approx(0.55, abs=1e-15)


def test_flux_moving_state_example():
    U = np.array([1.0, 1.0, 1.0, 0.0, 0.5])
    F = physical_flux(U, np.array(0.0), B=1.0, g=1.0, axis=0)
    assert np.allclose(F, [1.0, 1.0, 1.5, 0.0, 0.5], rtol=0, atol=1e-15)


def test_flux_rest_state_advective_rows_vanish():
    rng = np.random.default_rng(2)
    n = 16
    z = rng.uniform(0.0, 0.3, n)
    eta = rng.uniform(1.0, 1.5, n)
    h = eta - z
    U = np.stack([eta, 1.2 * h, np.zeros(n), np.zeros(n), 0.4 * h])
    F = physical_flux(U, z, B=1.2, g=1.0, axis=0)
    for row in (0, 1, 3, 4):
        assert np.allclose(F[row], 0.0, atol=1e-15)


def test_flux_pair_matches_directional_fluxes():
    rng = np.random.default_rng(8)
    n = 25
    z = rng.uniform(0.0, 0.2, n)
    h = rng.uniform(0.5, 1.5, n)
    U = np.stack([h + z, 1.1 * h, 0.3 * h, -0.2 * h, 0.5 * h, 0.1 * h])
    F, G = flux_pair(U, z, B=1.0, g=1.0)
    assert np.array_equal(F, physical_flux(U, z, 1.0, 1.0, axis=0))
    assert np.array_equal(G, physical_flux(U, z, 1.0, 1.0, axis=1))


def test_dry_point_keeps_only_hydrostatic_row():
    g, B = 1.0, 0.9
    U = np.array([0.5, 0.0, 0.3, -0.2, 0.1])  # eta equals z: zero depth
    z = np.array(0.5)
    F = physical_flux(U, z, B, g, axis=0)
    hydro = 0.5 * g * 0.5**2 - g * (0.5 - B) * 0.5
    assert F[2] == pytest.approx(hydro, abs=1e-15)
    for row in (0, 1, 3, 4):
        assert F[row] == 0.0


def test_source_still_water_zero():
    # eta constant equal to B: both source products vanish identically
    x = np.linspace(0.0, 2.0, 9)
    z = 0.3 + 0.1 * np.sin(x)
    dz = 0.1 * np.cos(x)
    h = 1.0 - z
    U = np.stack([np.ones_like(x), 1.1 * h, np.zeros_like(x), np.zeros_like(x), 0.5 * h])
    grads = (np.zeros_like(x), -1.1 * dz, np.zeros_like(x), np.zeros_like(x))
    S = source_term(U, grads, z, dz, np.zeros_like(x), B=1.0, g=1.0)
    assert np.allclose(S, 0.0, atol=1e-15)


def test_source_flat_bottom_zero():
    rng = np.random.default_rng(4)
    n = 12
    h = rng.uniform(0.5, 1.5, n)
    U = np.stack([h, 1.05 * h, 0.2 * h, 0.1 * h, 0.3 * h])
    grads = tuple(rng.standard_normal(n) for _ in range(4))
    S = source_term(U, grads, np.zeros(n), np.zeros(n), np.zeros(n), B=1.0, g=1.0)
    assert np.array_equal(S, np.zeros_like(U))


def test_source_momentum_example():
    # eta=1, B=0.9, Z=0.1, Z_x=0.2, p1=0.9 and a p1 gradient chosen so the
    # mixture-ratio derivative vanishes: only the first product survives
    U = np.array([1.0, 0.9, 0.0, 0.0, 0.0])
    grads = (np.array(0.0), np.array(-0.2), np.array(0.0), np.array(0.0))
    S = source_term(U, grads, np.array(0.1), np.array(0.2), np.array(0.0), B=0.9, g=1.0)
    assert S[2] == pytest.approx(-0.02, abs=1e-16)
    assert S[0] == 0.0 and S[1] == 0.0 and S[4] == 0.0


def test_source_ratio_gradient_is_capped():
    # a steep p1 gradient over constant depth would give r_x ~ 1e3; the
    # source must use the clamped value instead
    U = np.array([1.0, 1.0, 0.0, 0.0, 0.0])
    grads = (np.array(0.0), np.array(1e3), np.array(0.0), np.array(0.0))
    z, zx = np.array(0.2), np.array(0.0)
    B, g = 0.9, 1.0
    S = source_term(U, grads, z, zx, np.array(0.0), B, g)
    assert S[2] == pytest.approx(g * RATIO_GRAD_CAP * 0.2 * (B - 0.1), rel=1e-14)


def test_lf_flux_consistency():
    U = still_water_state(z=0.2)
    z = np.array(0.2)
    num = lf_flux(U, U.copy(), z, B=1.0, alpha=1.7, g=1.0, axis=0)
    assert np.allclose(num, physical_flux(U, z, 1.0, 1.0, axis=0), rtol=0, atol=1e-15)


def test_lf_flux_scalar_jump_example():
    # resting traces h=1 and h=0.5 with alpha=1: the mass-row flux is
    # -(1/2) alpha (h+ - h-) = 0.25
    Um = np.array([1.0, 1.0, 0.0, 0.0])
    Up = np.array([0.5, 0.5, 0.0, 0.0])
    num = lf_flux(Um, Up, np.array(0.0), B=1.0, alpha=1.0, g=1.0, axis=0)
    assert num[0] == pytest.approx(0.25, abs=1e-15)


def test_lf_flux_jump_term_sign():
    rng = np.random.default_rng(6)
    z = np.array(0.1)
    hm, hp = 1.0, 1.3
    Um = np.array([hm + 0.1, 1.1 * hm, 0.2, 0.0, 0.3])
    Up = np.array([hp + 0.1, 1.1 * hp, -0.1, 0.1, 0.5])
    alpha = 2.0
    num = lf_flux(Um, Up, z, B=1.0, alpha=alpha, g=1.0, axis=0)
    Fm = physical_flux(Um, z, 1.0, 1.0, axis=0)
    Fp = physical_flux(Up, z, 1.0, 1.0, axis=0)
    jump = num - 0.5 * (Fm + Fp)
    assert np.allclose(jump, -0.5 * alpha * (Up - Um), rtol=0, atol=1e-14)


def test_wave_speed_values():
    assert wave_speed(np.array(1.0), np.array(0.0), 1.0) == pytest.approx(1.0, abs=1e-15)
    assert wave_speed(np.array(0.0), np.array(1.0), 1.0) == pytest.approx(1.0, abs=1e-15)
    speeds = wave_speed(np.array([1.2**2, 0.9**2]), np.zeros(2), 1.0)
    assert speeds.max() == pytest.approx(1.2, abs=1e-15)


def test_wave_speed_negative_depth_raises():
    with pytest.raises(InvalidStateError):
        wave_speed(np.array([1.0, -0.1]), np.zeros(2), 1.0)


def test_wave_speed_tolerates_round_off_depth():
    out = wave_speed(np.array([-1e-16]), np.array([0.5]), 1.0)
    assert out[0] == pytest.approx(0.5, abs=1e-15)


def test_point_speeds_wet_state():
    U = np.array([[1.0], [1.1], [0.33], [-0.55]])
    sx, sy = point_speeds(U, np.zeros(1), g=1.0)
    assert sx[0] == pytest.approx(abs(0.3) + 1.0, abs=1e-14)
    assert sy[0] == pytest.approx(abs(0.5) + 1.0, abs=1e-14)


def test_compute_B_constant_surface():
    sc = build_scenario("equilibrium_mono", mesh=(8, 4))
    grid = scenario_grid(sc)
    field, _ = initial_condition(sc, grid, NodalBasis(1))
    assert compute_B(field) == pytest.approx(1.0, abs=1e-14)


def test_compute_B_linear_surface():
    from swdg import DgField, build_grid, interpolate_nodal

    grid = build_grid((0.0, 2.0, 0.0, 1.0), 5, 3)
    basis = NodalBasis(1)
    eta = interpolate_nodal(lambda x, y: x, grid, basis)
    data = np.zeros((5, 3, basis.n_nodes, 4))
    data[:, :, :, 0] = eta
    assert compute_B(DgField(grid, basis, data)) == pytest.approx(1.0, abs=1e-14)


def test_compute_B_perturbation_strip():
    # area-weighted strip average is 1.0005; nodal interpolation widens the
    # strip by half a cell on each side, adding exactly 2 * 0.005 * dx / |O|
    sc = build_scenario("perturbation")
    grid = scenario_grid(sc)
    field, _ = initial_condition(sc, grid, NodalBasis(1))
    B = compute_B(field)
    assert B == pytest.approx(1.0005, abs=1e-4)
    assert B == pytest.approx(1.0005 + 2.0 * 0.005 * 0.01 * 1.0 / 2.0, abs=1e-12)


def _poly_state():
    def eta(x):
        return 1.2 + 0.05 * x - 0.02 * x**2

    def z(x):
        return 0.3 + 0.1 * x - 0.05 * x**2

    def p1(x):
        return (eta(x) - z(x)) * (1.1 + 0.03 * x)

    def dp1(x):
        return ((0.05 - 0.04 * x) - (0.1 - 0.1 * x)) * (1.1 + 0.03 * x) + (
            eta(x) - z(x)
        ) * 0.03

    comps = (eta, p1, lambda x: 0.2 + 0.1 * x, lambda x: -0.1 + 0.05 * x**2,
             lambda x: 0.4 + 0.02 * x)
    return comps, z, (lambda x: 0.05 - 0.04 * x), dp1, (lambda x: 0.1 - 0.1 * x)


def test_reformulated_flux_equals_original_plus_shift():
    # the two flux forms differ by g r Z (B - Z/2) in the momentum rows only
    comps, z_fn, _, _, _ = _poly_state()
    x = np.random.default_rng(17).uniform(0.0, 2.0, 30)
    U = np.stack([f(x) for f in comps])
    z = z_fn(x)
    h = U[0] - z
    r = U[1] / h
    B, g = 1.05, 1.0
    F = physical_flux(U, z, B, g, axis=0)
    orig_mass = h * U[2] / U[1]
    orig_mom = U[2] ** 2 / U[1] + 0.5 * g * h * U[1]
    shift = g * r * z * (B - 0.5 * z)
    assert np.allclose(F[0], orig_mass, rtol=1e-14)
    assert np.allclose(F[2], orig_mom + shift, rtol=1e-13)


def test_flux_gradient_minus_source_matches_original_form():
    # d/dx F_reformulated - S_reformulated must equal d/dx F_original - S_original
    # on smooth states; flux derivatives come from a complex step, which the
    # flux layer supports end to end
    comps, z_fn, deta, dp1, dz = _poly_state()
    x = np.linspace(0.1, 1.9, 21)
    U = np.stack([f(x) for f in comps])
    z = z_fn(x)
    B, g = 1.05, 1.0

    eps = 1e-30
    xc = x + 1j * eps
    Uc = np.stack([f(xc) for f in comps])
    dF = physical_flux(Uc, z_fn(xc), B, g, axis=0)[2].imag / eps

    grads = (deta(x), dp1(x), np.zeros_like(x), np.zeros_like(x))
    S = source_term(U, grads, z, dz(x), np.zeros_like(x), B, g)[2]

    h = U[0] - z
    dh = deta(x) - dz(x)
    dp2 = np.full_like(x, 0.1)
    dF_orig = (2.0 * U[2] * dp2 * U[1] - U[2] ** 2 * dp1(x)) / U[1] ** 2 + 0.5 * g * (
        dh * U[1] + h * dp1(x)
    )
    S_orig = -g * U[1] * dz(x)
    assert np.allclose(dF - S, dF_orig - S_orig, rtol=0, atol=1e-12)
