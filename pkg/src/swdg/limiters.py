"""Positivity-preserving rescale and TVD minmod slope limiting.

The positivity limiter compresses a cell polynomial toward its own mean,

    u_tilde = delta (u - u_bar) + u_bar,   delta = min(1, u_bar/(u_bar - m)),

where m is the minimum over the mixed Gauss/Gauss-Lobatto node set that
controls the first-order positivity argument.  The mean is untouched, and
cells that are already nonnegative on the node set are skipped without
rewriting their coefficients (delta == 1 exactly).  Depth is limited through
h = eta - Z and written back as eta = Z + h_tilde; the momentum components
are never rescaled.  Because h and the q_i are rescaled independently while
p1 is not, limited cells no longer satisfy p1 = (eta - Z) + sum Delta_i q_i;
when the pipeline knows the Delta_i it rebuilds p1 from that identity in
exactly those cells (see LimiterConfig.deltas).

Minmod limiting replaces each direction's linear-mode slope with
minmod(own slope, forward mean difference, backward mean difference),
dropping quadratic content (k=2) in cells it modifies.  It keeps constants
and is mean-preserving, but it does modify smooth non-constant profiles, so
equilibrium scenarios run with it disabled.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import PositivityError
from .grid import NodalBasis, gauss_legendre, gauss_lobatto
from .state import ETA, P1, Q0, Bathymetry, DgField

_CONSTITUENT_BASE = Q0


@dataclass(frozen=True, eq=False)
class PositivityNodeSet:
    """Mixed node set S_ij: (Gauss x) x (Lobatto y) union (Lobatto x) x (Gauss y).

    omega_hat1 is the first Gauss-Lobatto weight; the provable time-step
    restriction is dt (a1/dx + a2/dy) <= omega_hat1.
    """

    points: np.ndarray  # (nS, 2)
    phi: np.ndarray  # (n_nodes, nS)
    omega_hat1: float


def positivity_node_set(basis: NodalBasis, m_lobatto: int = 3) -> PositivityNodeSet:
    """Build S_ij for the basis; m_lobatto = 3 covers k <= 3 (2M - 3 > k)."""
    gauss = gauss_legendre(basis.k + 1).points
    lob = gauss_lobatto(m_lobatto).points
    ax, ay = np.meshgrid(gauss, lob, indexing="ij")
    bx, by = np.meshgrid(lob, gauss, indexing="ij")
    pts = np.concatenate(
        [
            np.column_stack([ax.ravel(), ay.ravel()]),
            np.column_stack([bx.ravel(), by.ravel()]),
        ]
    )
    phi, _, _ = basis.eval(pts)
    return PositivityNodeSet(points=pts, phi=phi, omega_hat1=gauss_lobatto(m_lobatto).weights[0])


@dataclass
class LimiterConfig:
    use_minmod: bool = False
    avg_atol: float = 1e-12  # tolerated round-off dip of a cell mean below zero
    # Constituent density increments Delta_i.  When given, cells the limiters
    # modified get p1 rebuilt from the algebraic identity
    # p1 = (eta - Z) + sum_i Delta_i q_i, which limiting breaks (h and q_i
    # are rescaled independently while p1 is not).  The residual preserves
    # the identity exactly, and the limiter preserves the means of h and
    # every q_i, so the repair also preserves the mean of p1.
    deltas: Optional[np.ndarray] = None


@dataclass
class LimiterReport:
    cells_scaled: int = 0
    min_theta: float = 1.0
    minmod_cells: int = 0
    cells_repaired: int = 0
    components: tuple[str, ...] = ()

    def merge(self, other: "LimiterReport") -> "LimiterReport":
        return LimiterReport(
            cells_scaled=self.cells_scaled + other.cells_scaled,
            min_theta=min(self.min_theta, other.min_theta),
            minmod_cells=self.minmod_cells + other.minmod_cells,
            cells_repaired=self.cells_repaired + other.cells_repaired,
            components=tuple(dict.fromkeys(self.components + other.components)),
        )


def _scale_nonneg(comp: np.ndarray, avg_w: np.ndarray, phi_s: np.ndarray,
                  atol: float, my: int, name: str) -> tuple[np.ndarray, float]:
    """Rescale rows of comp (cells, n_nodes) in place; returns (scaled rows, min delta).

    Cells whose mean dips below -atol are a hard error: the rescale cannot
    repair a negative mean.  Means in [-atol, 0] are flattened to the
    constant mean, which preserves it exactly.
    """
    means = comp @ avg_w
    if np.any(means < -atol):
        c = int(np.argmin(means))
        raise PositivityError(
            f"negative cell average of {name}: {means[c]:.3e} at cell {divmod(c, my)}"
        )
    mins = (comp @ phi_s).min(axis=1)
    idx = np.nonzero(mins < 0.0)[0]
    if idx.size == 0:
        return idx, 1.0
    mb = means[idx]
    vb = mins[idx]
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = np.where(mb > 0.0, mb / (mb - vb), 0.0)
    delta = np.minimum(delta, 1.0)
    comp[idx] = mb[:, None] + delta[:, None] * (comp[idx] - mb[:, None])
    return idx, float(delta.min())


def _minmod3(own: np.ndarray, fwd: np.ndarray, bwd: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized minmod; returns (limited slope, changed mask).

    When the own slope is already the smallest same-sign candidate the result
    equals it bit-for-bit (sign * abs is exact), so untouched cells can be
    detected by plain equality and skipped.
    """
    s = np.sign(own)
    agree = (s == np.sign(fwd)) & (s == np.sign(bwd)) & (s != 0.0)
    mag = np.minimum(np.abs(own), np.minimum(np.abs(fwd), np.abs(bwd)))
    limited = np.where(agree, s * mag, 0.0)
    return limited, limited != own


def minmod_state(
    U: np.ndarray, mx: int, my: int, basis: NodalBasis,
    touched: Optional[np.ndarray] = None,
) -> int:
    """Apply minmod slope limiting to all components of U (ncomp, mx*my, n).

    Boundary cells (missing a neighbour in the limited direction) are left
    alone.  Returns the number of rebuilt (component, cell) pairs; touched,
    if given, is a (mx*my,) bool mask that gets marked for rebuilt cells.
    """
    ncomp = U.shape[0]
    px, py, pxy = basis.slope_weights
    avg_w = basis.avg_weights
    means = U @ avg_w
    bx = U @ px
    by = U @ py
    m4 = means.reshape(ncomp, mx, my)
    dx_fwd = np.diff(m4, axis=1)  # (ncomp, mx-1, my)
    dy_fwd = np.diff(m4, axis=2)
    bx4 = bx.reshape(ncomp, mx, my)
    by4 = by.reshape(ncomp, mx, my)

    new_bx = bx4.copy()
    new_by = by4.copy()
    changed = np.zeros((ncomp, mx, my), dtype=bool)
    if mx > 2:
        lim, ch = _minmod3(bx4[:, 1:-1, :], dx_fwd[:, 1:, :], dx_fwd[:, :-1, :])
        new_bx[:, 1:-1, :] = lim
        changed[:, 1:-1, :] |= ch
    if my > 2:
        lim, ch = _minmod3(by4[:, :, 1:-1], dy_fwd[:, :, 1:], dy_fwd[:, :, :-1])
        new_by[:, :, 1:-1] = lim
        changed[:, :, 1:-1] |= ch

    if not changed.any():
        return 0
    flat = changed.reshape(ncomp, mx * my)
    comp_idx, cell_idx = np.nonzero(flat)
    if touched is not None:
        touched[cell_idx] = True
    mean_v = means[comp_idx, cell_idx][:, None]
    bx_v = new_bx.reshape(ncomp, mx * my)[comp_idx, cell_idx][:, None]
    by_v = new_by.reshape(ncomp, mx * my)[comp_idx, cell_idx][:, None]
    rebuilt = mean_v + bx_v * basis.node_xi[None, :] + by_v * basis.node_eta[None, :]
    if basis.k == 1:
        cross = (U @ pxy)[comp_idx, cell_idx][:, None]
        rebuilt = rebuilt + cross * (basis.node_xi * basis.node_eta)[None, :]
    U[comp_idx, cell_idx, :] = rebuilt
    return int(comp_idx.size)


def limit_state(
    U: np.ndarray,
    z_nodes: np.ndarray,
    basis: NodalBasis,
    node_set: PositivityNodeSet,
    mx: int,
    my: int,
    cfg: LimiterConfig,
) -> LimiterReport:
    """Full stage pipeline on the internal layout U (ncomp, mx*my, n_nodes).

    Optional minmod on all components, then the positivity rescale on
    h = eta - Z and on every q_i, then (with cfg.deltas) the p1 consistency
    repair in the cells that changed.  Mutates U; z_nodes is (mx*my, n).
    """
    report = LimiterReport()
    touched = np.zeros(U.shape[1], dtype=bool) if cfg.deltas is not None else None
    if cfg.use_minmod:
        report.minmod_cells = minmod_state(U, mx, my, basis, touched)

    avg_w = basis.avg_weights
    phi_s = node_set.phi
    h = U[ETA] - z_nodes
    idx, dmin = _scale_nonneg(h, avg_w, phi_s, cfg.avg_atol, my, "h")
    if idx.size:
        U[ETA][idx] = z_nodes[idx] + h[idx]
        report.cells_scaled += int(idx.size)
        report.min_theta = min(report.min_theta, dmin)
        report.components += ("h",)
        if touched is not None:
            touched[idx] = True
    for i in range(_CONSTITUENT_BASE, U.shape[0]):
        idx, dmin = _scale_nonneg(U[i], avg_w, phi_s, cfg.avg_atol, my, f"q{i - Q0 + 1}")
        if idx.size:
            report.cells_scaled += int(idx.size)
            report.min_theta = min(report.min_theta, dmin)
            report.components += (f"q{i - Q0 + 1}",)
            if touched is not None:
                touched[idx] = True

    if touched is not None and touched.any():
        sel = np.nonzero(touched)[0]
        p1_new = U[ETA][sel] - z_nodes[sel]
        deltas = np.asarray(cfg.deltas, dtype=float)
        if deltas.size:
            p1_new = p1_new + np.tensordot(deltas, U[Q0:, sel, :], axes=(0, 0))
        U[P1][sel] = p1_new
        report.cells_repaired = int(sel.size)
    return report


def positivity_scale(
    field: DgField, bathymetry: Bathymetry, atol: float = 1e-12
) -> tuple[DgField, LimiterReport]:
    """Positivity rescale of h and all q_i on a DgField (pure; returns a copy)."""
    out = field.copy()
    U = np.ascontiguousarray(out.data.transpose(3, 0, 1, 2)).reshape(
        out.data.shape[3], field.grid.n_cells, field.basis.n_nodes
    )
    z = bathymetry.coeffs.reshape(field.grid.n_cells, field.basis.n_nodes)
    cfg = LimiterConfig(use_minmod=False, avg_atol=atol)
    report = limit_state(U, z, field.basis, positivity_node_set(field.basis),
                         field.grid.mx, field.grid.my, cfg)
    out.data = U.reshape(out.data.shape[3], field.grid.mx, field.grid.my,
                         field.basis.n_nodes).transpose(1, 2, 3, 0).copy()
    return out, report


def minmod_slope(field: DgField) -> tuple[DgField, int]:
    """Minmod-limit all components of a DgField (pure; returns a copy)."""
    out = field.copy()
    U = np.ascontiguousarray(out.data.transpose(3, 0, 1, 2)).reshape(
        out.data.shape[3], field.grid.n_cells, field.basis.n_nodes
    )
    n = minmod_state(U, field.grid.mx, field.grid.my, field.basis)
    out.data = U.reshape(out.data.shape[3], field.grid.mx, field.grid.my,
                         field.basis.n_nodes).transpose(1, 2, 3, 0).copy()
    return out, n


def apply_stage_limiters(
    field: DgField, bathymetry: Bathymetry, cfg: LimiterConfig
) -> tuple[DgField, LimiterReport]:
    """Minmod (if configured) followed by the positivity rescale, as one stage."""
    out = field.copy()
    U = np.ascontiguousarray(out.data.transpose(3, 0, 1, 2)).reshape(
        out.data.shape[3], field.grid.n_cells, field.basis.n_nodes
    )
    z = bathymetry.coeffs.reshape(field.grid.n_cells, field.basis.n_nodes)
    report = limit_state(U, z, field.basis, positivity_node_set(field.basis),
                         field.grid.mx, field.grid.my, cfg)
    out.data = U.reshape(out.data.shape[3], field.grid.mx, field.grid.my,
                         field.basis.n_nodes).transpose(1, 2, 3, 0).copy()
    return out, report