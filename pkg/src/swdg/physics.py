"""Fluxes, source terms, and wave speeds for the reformulated system.

The balance law is written in terms of U = (eta, p1, p2, p3, q_i) with a
free-surface flux/source pair that depends on a domain constant B (the mean
surface elevation).  For a lake-at-rest state with constant mixture density
the momentum flux reduces to the constant 0.5*g*C^2*r_b and the source
vanishes identically, so the discrete residual telescopes to zero without
any quadrature balancing tricks.

All functions are componentwise and vectorized: U is components-first with
shape (4 + N, ...), z and the derivative inputs broadcast against the point
shape.  Dry and degenerate points (see wet_parts) contribute zero
advective flux but keep the hydrostatic gauge terms with the dry-state
mixture ratio r = 1, which keeps dry regions exactly frozen.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidStateError
from .state import ETA, P1, P2, P3, Q0, RATIO_BAND, SPEED_CAP, DgField, cell_averages

# The quotient-rule gradient of r = p1/h is noise amplified by 1/h at thin
# points; physical composition gradients are O(0.1), so a generous fixed cap
# is inert in resolved water.
RATIO_GRAD_CAP = 10.0


@dataclass(frozen=True)
class AuxiliaryB:
    """Domain-mean surface elevation, frozen for the duration of one step."""

    value: float


@dataclass(frozen=True)
class WaveSpeeds:
    """Global directional wave speed bounds max(|u| + sqrt(g h))."""

    alpha_x: float
    alpha_y: float


def wet_parts(U: np.ndarray, z: np.ndarray, h_eps: float):
    """Common desingularized quantities: (h, wet, ratio p1/h, u, v).

    A point is active only when h > h_eps, p1/h lies inside RATIO_BAND, and
    the implied velocities stay below SPEED_CAP.  The positivity limiter
    rescales h without touching p1, so near a dry front the pair can
    decouple (tiny positive h against a stale or negative p1, or parked
    momentum with no mass behind it); such degenerate points are treated as
    dry and contribute nothing, exactly like h <= 0.
    """
    h = U[ETA] - z
    h_re = np.real(h)
    p1_re = np.real(U[P1])
    wet = h_re > h_eps
    wet &= p1_re > RATIO_BAND[0] * h_re
    wet &= p1_re < RATIO_BAND[1] * h_re
    wet &= np.abs(np.real(U[P2])) <= SPEED_CAP * p1_re
    wet &= np.abs(np.real(U[P3])) <= SPEED_CAP * p1_re
    # masked divides skip dry lanes entirely; out starts at the dry value 0
    ratio = np.zeros_like(h)
    np.divide(U[P1], h, out=ratio, where=wet)
    u = np.zeros_like(h)
    np.divide(U[P2], U[P1], out=u, where=wet)
    v = np.zeros_like(h)
    np.divide(U[P3], U[P1], out=v, where=wet)
    return h, wet, ratio, u, v


def _clamp_real(x: np.ndarray, cap: float) -> np.ndarray:
    """Clamp by the magnitude of the real part (complex-step safe)."""
    if np.iscomplexobj(x):
        mag = np.abs(np.real(x))
        return np.where(mag <= cap, x, np.sign(np.real(x)) * cap)
    return np.clip(x, -cap, cap)


def physical_flux(
    U: np.ndarray, z: np.ndarray, B: float, g: float, axis: int, h_eps: float = 1e-8,
    parts=None,
) -> np.ndarray:
    """Reformulated flux in direction axis (0 = x, 1 = y).

    x direction:
        ( (eta-Z) p2/p1,
          p2,
          p2^2/p1 + (g eta^2 / 2 - g (eta - B) Z) p1/(eta-Z),
          p2 p3 / p1,
          q_i p2/p1 )
    and the symmetric form with p3 in the y direction.  parts lets the
    caller reuse one wet_parts evaluation across F, G, sources, and speeds
    at the same points; it is recomputed when omitted.
    """
    h, wet, ratio, u, v = wet_parts(U, z, h_eps) if parts is None else parts
    vel = u if axis == 0 else v
    F = np.empty_like(U)
    F[ETA] = h * vel
    hyd = _gauge_flux(U, z, B, g, wet, ratio)
    if axis == 0:
        F[P1] = np.where(wet, U[P2], 0.0)
        F[P2] = U[P2] * vel + hyd
        F[P3] = U[P3] * vel
    else:
        F[P1] = np.where(wet, U[P3], 0.0)
        F[P2] = U[P2] * vel
        F[P3] = U[P3] * vel + hyd
    F[Q0:] = U[Q0:] * vel[None]
    return F


def _gauge_flux(U, z, B, g, wet, ratio):
    # Dry and degenerate points keep the hydrostatic gauge term with the
    # dry-state ratio r = 1.  For eta == Z this flux telescopes exactly
    # against the source, so dry regions stay frozen; zeroing it instead
    # makes every partially masked front cell a spurious wave maker.
    return (0.5 * g * U[ETA] * U[ETA] - g * (U[ETA] - B) * z) * np.where(wet, ratio, 1.0)


def flux_pair(
    U: np.ndarray, z: np.ndarray, B: float, g: float, h_eps: float = 1e-8,
    parts=None,
) -> tuple[np.ndarray, np.ndarray]:
    """Both directional fluxes at once, sharing the hydrostatic gauge term."""
    h, wet, ratio, u, v = wet_parts(U, z, h_eps) if parts is None else parts
    hyd = _gauge_flux(U, z, B, g, wet, ratio)
    F = np.empty_like(U)
    G = np.empty_like(U)
    F[ETA] = h * u
    G[ETA] = h * v
    F[P1] = np.where(wet, U[P2], 0.0)
    G[P1] = np.where(wet, U[P3], 0.0)
    F[P2] = U[P2] * u + hyd
    G[P2] = U[P2] * v
    F[P3] = U[P3] * u
    G[P3] = U[P3] * v + hyd
    F[Q0:] = U[Q0:] * u[None]
    G[Q0:] = U[Q0:] * v[None]
    return F, G


def source_term(
    U: np.ndarray,
    grads: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray],
    z: np.ndarray,
    z_x: np.ndarray,
    z_y: np.ndarray,
    B: float,
    g: float,
    h_eps: float = 1e-8,
    parts=None,
) -> np.ndarray:
    """Momentum source of the reformulated system.

    grads supplies the pointwise spatial derivatives (eta_x, p1_x, eta_y,
    p1_y) of the DG polynomials.  The derivative of the density ratio
    r = p1/(eta - Z) is expanded by the quotient rule:

        S_p2 = g (B - eta) Z_x r + g r_x Z (B - Z/2)

    and symmetrically in y.  Dry points contribute nothing.
    """
    s2, s3 = source_rows(U, grads, z, z_x, z_y, B, g, h_eps, parts)
    S = np.zeros_like(U)
    S[P2] = s2
    S[P3] = s3
    return S


def source_rows(U, grads, z, z_x, z_y, B, g, h_eps=1e-8, parts=None):
    """The two nonzero source components (momentum only), as a pair."""
    eta_x, p1_x, eta_y, p1_y = grads
    h, wet, ratio, _, _ = wet_parts(U, z, h_eps) if parts is None else parts
    h_denom = np.where(wet, h, h_eps)
    r_x = np.where(wet, (p1_x - ratio * (eta_x - z_x)) / h_denom, 0.0)
    r_y = np.where(wet, (p1_y - ratio * (eta_y - z_y)) / h_denom, 0.0)
    r_x = _clamp_real(r_x, RATIO_GRAD_CAP)
    r_y = _clamp_real(r_y, RATIO_GRAD_CAP)
    zb = z * (B - 0.5 * z)
    # Same dry-state gauge as physical_flux: inactive points use r = 1 and a
    # flat ratio gradient so the topography source balances the retained
    # hydrostatic flux there.
    ratio_eff = np.where(wet, ratio, 1.0)
    s2 = g * (B - U[ETA]) * z_x * ratio_eff + g * r_x * zb
    s3 = g * (B - U[ETA]) * z_y * ratio_eff + g * r_y * zb
    return s2, s3


def lf_flux(
    U_minus: np.ndarray,
    U_plus: np.ndarray,
    z: np.ndarray,
    B: float,
    alpha: np.ndarray,
    g: float,
    axis: int,
    h_eps: float = 1e-8,
    parts_minus=None,
    parts_plus=None,
) -> np.ndarray:
    """Lax-Friedrichs interface flux 0.5 (F(U-) + F(U+) - alpha (U+ - U-)).

    z is the single-valued trace of the bathymetry on the interface; alpha
    broadcasts over the interface points (edge-local wave speed bound).
    """
    Fm = physical_flux(U_minus, z, B, g, axis, h_eps, parts=parts_minus)
    Fp = physical_flux(U_plus, z, B, g, axis, h_eps, parts=parts_plus)
    out = Fm
    out += Fp
    jump = U_plus - U_minus
    jump *= alpha
    out -= jump
    out *= 0.5
    return out


def wave_speed(h: np.ndarray, vel: np.ndarray, g: float) -> np.ndarray:
    """Pointwise |vel| + sqrt(g h); raises if any depth is materially negative."""
    h = np.asarray(h, dtype=float)
    if np.any(h < -1e-12 * max(1.0, float(np.max(np.abs(h), initial=0.0)))):
        raise InvalidStateError(f"negative depth {float(np.min(h))} in wave_speed")
    return np.abs(vel) + np.sqrt(g * np.maximum(h, 0.0))


def point_speeds(
    U: np.ndarray, z: np.ndarray, g: float, h_eps: float = 1e-8, parts=None
) -> tuple[np.ndarray, np.ndarray]:
    """Directional characteristic speeds (|u|+c, |v|+c) at given points."""
    h, wet, _, u, v = wet_parts(U, z, h_eps) if parts is None else parts
    c = np.sqrt(g * np.maximum(h, 0.0))
    return np.abs(u) + c, np.abs(v) + c


def compute_B(field: DgField) -> float:
    """Domain average of the surface elevation eta.

    Cells are uniform, so this is the plain mean of the cell averages.  For a
    lake at rest eta == C this returns C up to round-off, which keeps the
    still-water source identically zero.
    """
    return float(np.mean(cell_averages(field)[:, :, ETA]))
