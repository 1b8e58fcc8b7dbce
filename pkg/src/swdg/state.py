"""Conserved/primitive state containers and conversions.

The conserved vector per point is (eta, p1, p2, p3, q_1..q_N) with

    eta = h + Z          free surface elevation
    p1  = h * r          depth times relative density
    p2  = h * u * r      x momentum (density weighted)
    p3  = h * v * r      y momentum
    q_i = h * c_i        depth-integrated constituent concentrations

and relative density r = 1 + sum_i Delta_i c_i.  Coefficient blocks are
stored nodally with shape (mx, my, n_nodes, 4 + N).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, InvalidStateError
from .grid import Grid, NodalBasis

# component indices in the conserved vector
ETA, P1, P2, P3 = 0, 1, 2, 3
Q0 = 4

# Degenerate-point taxonomy.  The positivity limiter rescales h without
# touching p1/p2/p3, so near a wet/dry front the pointwise state can stop
# describing actual water: a mixture ratio p1/h outside RATIO_BAND or an
# implied speed beyond SPEED_CAP marks the point as dry for both primitive
# recovery and the flux layer.  Benchmark ratios stay within a few percent
# of 1 and speeds stay below ~3, so both bands are inert on healthy states.
RATIO_BAND = (0.1, 10.0)
SPEED_CAP = 20.0


def n_components(n_constituents: int) -> int:
    return 4 + n_constituents


@dataclass(eq=False)
class DgField:
    """Nodal DG coefficients for all conserved components on one grid.

    data has shape (mx, my, n_nodes, 4 + N); data[i, j, m, c] is the value of
    component c at basis node m of cell (i, j).
    """

    grid: Grid
    basis: NodalBasis
    data: np.ndarray

    def __post_init__(self):
        expect = (self.grid.mx, self.grid.my, self.basis.n_nodes)
        if self.data.shape[:3] != expect or self.data.ndim != 4:
            raise ConfigError(
                f"DgField data shape {self.data.shape} does not match grid/basis {expect} + components"
            )

    @property
    def n_constituents(self) -> int:
        return self.data.shape[3] - 4

    def copy(self) -> "DgField":
        return DgField(self.grid, self.basis, self.data.copy())


@dataclass(eq=False)
class Bathymetry:
    """Nodal interpolant of the bottom elevation Z on the same grid/basis."""

    grid: Grid
    basis: NodalBasis
    coeffs: np.ndarray  # (mx, my, n_nodes)

    def __post_init__(self):
        expect = (self.grid.mx, self.grid.my, self.basis.n_nodes)
        if self.coeffs.shape != expect:
            raise ConfigError(f"Bathymetry coeffs shape {self.coeffs.shape} != {expect}")


@dataclass
class Primitive:
    """Pointwise primitive fields recovered from a conserved state."""

    h: np.ndarray
    u: np.ndarray
    v: np.ndarray
    r: np.ndarray
    c: np.ndarray  # (N, ...) stacked constituent concentrations


def relative_density(c: np.ndarray, deltas: np.ndarray) -> np.ndarray:
    """r = 1 + sum_i Delta_i c_i; c has shape (N, ...), deltas (N,)."""
    c = np.asarray(c, dtype=float)
    deltas = np.asarray(deltas, dtype=float)
    if c.shape[0] != deltas.shape[0]:
        raise ConfigError(f"{c.shape[0]} concentration rows vs {deltas.shape[0]} deltas")
    return 1.0 + np.tensordot(deltas, c, axes=(0, 0))


def active_points(U: np.ndarray, z: np.ndarray, h_eps: float) -> np.ndarray:
    """Boolean mask of points that carry believable water.

    A point is active when h > h_eps, the mixture ratio p1/h sits inside
    RATIO_BAND and the implied speeds |p2|/p1, |p3|/p1 stay under SPEED_CAP.
    Everything else is treated as dry by primitive recovery, by the flux
    layer, and by the momentum blanking in the integrator.
    """
    h = U[ETA] - z
    return (
        (h > h_eps)
        & (U[P1] > RATIO_BAND[0] * h)
        & (U[P1] < RATIO_BAND[1] * h)
        & (np.abs(U[P2]) <= SPEED_CAP * U[P1])
        & (np.abs(U[P3]) <= SPEED_CAP * U[P1])
    )


def recover_primitive(U: np.ndarray, z: np.ndarray, h_eps: float = 1e-8,
                      strict: bool = True) -> Primitive:
    """Recover (h, u, v, r, c) from conserved values.

    U is components-first, shape (4 + N, ...); z broadcasts against the point
    shape.  Cells with h <= h_eps are treated as dry: velocities and
    concentrations are zeroed and r falls back to 1 (clear water).  A wet
    point with p1 <= 0 means the density-weighted depth collapsed, which the
    conserved system cannot represent; that is an InvalidStateError.  With
    strict=False such points are downgraded to dry instead, and the full
    degenerate-point taxonomy from the flux layer applies (ratio and speed
    bands), which is the right reading for post-limiter states near fronts,
    where h is rescaled but p1 is not.
    """
    U = np.asarray(U, dtype=float)
    h = U[ETA] - z
    wet = h > h_eps
    if strict:
        if np.any(wet & (U[P1] <= 0.0)):
            raise InvalidStateError("density collapse: p1 <= 0 at a wet point")
    else:
        wet = active_points(U, z, h_eps)
    safe_p1 = np.where(wet, U[P1], 1.0)
    safe_h = np.where(wet, h, 1.0)
    u = np.where(wet, U[P2] / safe_p1, 0.0)
    v = np.where(wet, U[P3] / safe_p1, 0.0)
    r = np.where(wet, safe_p1 / safe_h, 1.0)
    c = np.where(wet[None, ...], U[Q0:] / safe_h[None, ...], 0.0)
    return Primitive(h=np.maximum(h, 0.0), u=u, v=v, r=r, c=c)


def pack_conserved(
    h: np.ndarray,
    u: np.ndarray,
    v: np.ndarray,
    c: np.ndarray,
    z: np.ndarray,
    deltas: np.ndarray,
) -> np.ndarray:
    """Assemble the conserved vector from primitives; c is (N, ...)."""
    r = relative_density(c, deltas)
    out = np.empty((4 + len(deltas),) + np.shape(h), dtype=float)
    out[ETA] = h + z
    out[P1] = h * r
    out[P2] = h * u * r
    out[P3] = h * v * r
    out[Q0:] = h * np.asarray(c, dtype=float)
    return out


def cell_averages(field: DgField) -> np.ndarray:
    """Cell averages of every component, shape (mx, my, 4 + N)."""
    return np.tensordot(field.data, field.basis.avg_weights, axes=([2], [0]))


def cell_average(field: DgField, cell: tuple[int, int], component: int) -> float:
    """Average of one component over one cell via the volume quadrature rule."""
    i, j = cell
    mx, my = field.grid.mx, field.grid.my
    if not (0 <= i < mx and 0 <= j < my):
        raise ConfigError(f"cell {cell} outside mesh {mx}x{my}")
    return float(field.data[i, j, :, component] @ field.basis.avg_weights)
