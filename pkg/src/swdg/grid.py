"""Uniform rectangular grid, quadrature rules, and the tensor-product nodal basis.

Reference cell is [-1/2, 1/2]^2; all quadrature weights are normalized to sum
to one so that cell integrals are plain weighted sums times the cell area.
Basis nodes are Gauss-Lobatto points per direction, which places nodes on cell
boundaries.  Shared edge nodes are assigned identical floating-point
coordinates in both adjacent cells, so nodal interpolation of a continuous
function produces bit-identical traces on interior edges.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .exceptions import ConfigError


@dataclass(frozen=True)
class QuadratureRule:
    """1D quadrature on the reference interval [-1/2, 1/2], weights sum to 1."""

    points: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return len(self.points)


def gauss_legendre(n: int) -> QuadratureRule:
    """Gauss-Legendre rule with n points on [-1/2, 1/2].

    Exact for polynomials of degree <= 2n - 1.
    """
    if n < 1:
        raise ConfigError(f"gauss_legendre needs n >= 1, got {n}")
    pts, wts = np.polynomial.legendre.leggauss(n)
    return QuadratureRule(points=pts / 2.0, weights=wts / 2.0)


def gauss_lobatto(n: int) -> QuadratureRule:
    """Gauss-Lobatto rule with n points on [-1/2, 1/2], endpoints included.

    Exact for polynomials of degree <= 2n - 3.  Nodes are the roots of
    (1 - x^2) P'_{n-1}(x), found by Newton iteration from Chebyshev-Lobatto
    initial guesses; weights are 2 / (n (n-1) P_{n-1}(x)^2) on [-1, 1].
    The node set is symmetrized so that, e.g., n = 3 yields exactly
    (-1/2, 0, 1/2) with weights (1/6, 2/3, 1/6).
    """
    if n < 2:
        raise ConfigError(f"gauss_lobatto needs n >= 2, got {n}")
    x = np.cos(np.pi * np.arange(n) / (n - 1))[::-1].copy()
    x[0], x[-1] = -1.0, 1.0
    for _ in range(100):
        # Legendre values P_{n-1}(x) and P'_{n-1}(x) by recurrence
        p0 = np.ones_like(x)
        p1 = x.copy()
        for m in range(2, n):
            p0, p1 = p1, ((2 * m - 1) * x * p1 - (m - 1) * p0) / m
        dp = (n - 1) * (x * p1 - p0) / (x * x - 1.0 + 1e-300)
        # interior nodes solve f := (1 - x^2) P'_{n-1} = 0; the Legendre ODE
        # collapses the derivative to f' = -n(n-1) P_{n-1}
        f = (1.0 - x * x) * dp
        df = -float(n * (n - 1)) * p1
        step = np.zeros_like(x)
        step[1:-1] = f[1:-1] / df[1:-1]
        x[1:-1] -= step[1:-1]
        if np.max(np.abs(step)) < 1e-15:
            break
    p0 = np.ones_like(x)
    p1 = x.copy()
    for m in range(2, n):
        p0, p1 = p1, ((2 * m - 1) * x * p1 - (m - 1) * p0) / m
    w = 2.0 / (n * (n - 1) * p1 * p1)
    # enforce exact symmetry (gives an exact middle zero for odd n)
    x = (x - x[::-1]) / 2.0
    w = (w + w[::-1]) / 2.0
    return QuadratureRule(points=x / 2.0, weights=w / 2.0)


def lagrange_eval(nodes: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Values and derivatives of the Lagrange cardinal polynomials.

    Returns arrays of shape (len(nodes), len(x)): row j holds ell_j(x) and
    ell'_j(x).  Direct product formulas; fine for the small node counts used
    here.
    """
    nodes = np.asarray(nodes, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = len(nodes)
    vals = np.ones((n, len(x)))
    ders = np.zeros((n, len(x)))
    for j in range(n):
        for i in range(n):
            if i == j:
                continue
            vals[j] *= (x - nodes[i]) / (nodes[j] - nodes[i])
        for i in range(n):
            if i == j:
                continue
            term = np.ones(len(x)) / (nodes[j] - nodes[i])
            for l in range(n):
                if l == j or l == i:
                    continue
                term *= (x - nodes[l]) / (nodes[j] - nodes[l])
            ders[j] += term
    return vals, ders


class NodalBasis:
    """Tensor-product nodal basis of degree k per direction on Gauss-Lobatto nodes.

    Node m corresponds to the 1D node pair (ix, iy) with m = ix*(k+1) + iy,
    so the right-edge nodes (ix = k) occupy one contiguous block.  Supported
    degrees are 1 and 2: both place 1D nodes exactly at -1/2 (and 0) and 1/2,
    so every node lies on a cell edge or at the cell center.
    """

    def __init__(self, k: int):
        if k not in (1, 2):
            raise ConfigError(f"basis degree must be 1 or 2, got {k}")
        self.k = k
        self.n_1d = k + 1
        self.n_nodes = (k + 1) ** 2
        self.nodes_1d = gauss_lobatto(k + 1).points
        ix, iy = np.divmod(np.arange(self.n_nodes), self.n_1d)
        self.node_ix = ix
        self.node_iy = iy
        self.node_xi = self.nodes_1d[ix]
        self.node_eta = self.nodes_1d[iy]
        # node index slices for each cell edge
        self.left_nodes = slice(0, k + 1)
        self.right_nodes = slice(k * (k + 1), (k + 1) * (k + 1))
        self.bottom_nodes = slice(0, None, k + 1)
        self.top_nodes = slice(k, None, k + 1)

    def __repr__(self) -> str:
        return f"NodalBasis(k={self.k})"

    def eval(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Basis values and reference gradients at points of shape (P, 2).

        Returns (phi, dxi, deta), each (n_nodes, P).
        """
        points = np.asarray(points, dtype=float)
        vx, dx = lagrange_eval(self.nodes_1d, points[:, 0])
        vy, dy = lagrange_eval(self.nodes_1d, points[:, 1])
        phi = vx[self.node_ix] * vy[self.node_iy]
        dxi = dx[self.node_ix] * vy[self.node_iy]
        deta = vx[self.node_ix] * dy[self.node_iy]
        return phi, dxi, deta

    @cached_property
    def volume_rule(self) -> tuple[np.ndarray, np.ndarray]:
        """Tensor (k+2)x(k+2) Gauss rule: (points (Q,2), weights (Q,))."""
        g = gauss_legendre(self.k + 2)
        px, py = np.meshgrid(g.points, g.points, indexing="ij")
        wx, wy = np.meshgrid(g.weights, g.weights, indexing="ij")
        pts = np.column_stack([px.ravel(), py.ravel()])
        return pts, (wx * wy).ravel()

    @cached_property
    def vol_matrices(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(phi, dxi, deta) at the volume rule points, each (n_nodes, Q)."""
        pts, _ = self.volume_rule
        return self.eval(pts)

    @cached_property
    def mass(self) -> np.ndarray:
        """Reference-cell mass matrix, exact for degree 2k."""
        phi, _, _ = self.vol_matrices
        _, w = self.volume_rule
        return (phi * w) @ phi.T

    @cached_property
    def mass_inv(self) -> np.ndarray:
        return np.linalg.inv(self.mass)

    @cached_property
    def avg_weights(self) -> np.ndarray:
        """Vector a with cell_average = coeffs . a (integral of each phi)."""
        phi, _, _ = self.vol_matrices
        _, w = self.volume_rule
        return phi @ w

    @cached_property
    def edge_rule(self) -> QuadratureRule:
        """(k+1)-point Gauss rule for edge integrals."""
        return gauss_legendre(self.k + 1)

    @cached_property
    def edge_eval_1d(self) -> np.ndarray:
        """1D cardinal values at the edge rule points, shape (k+1, L).

        A cell's trace on an edge is its edge-node coefficients times this
        matrix; basis functions of all other nodes vanish on the edge.
        """
        vals, _ = lagrange_eval(self.nodes_1d, self.edge_rule.points)
        return vals

    @cached_property
    def slope_weights(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Projection vectors (px, py, pxy) extracting the linear/cross modes.

        coeffs . px = 12 * integral(u * xi) is the slope of the L2-projected
        linear part in reference units; pxy gives the bilinear cross
        coefficient (used for k=1 where it is carried unchanged).
        """
        pts, w = self.volume_rule
        phi, _, _ = self.vol_matrices
        px = 12.0 * (phi @ (w * pts[:, 0]))
        py = 12.0 * (phi @ (w * pts[:, 1]))
        pxy = 144.0 * (phi @ (w * pts[:, 0] * pts[:, 1]))
        # enforce the exact mirror antisymmetry the quadrature only gives to
        # round-off, so constant cells project to slopes of exactly zero
        ix, iy = divmod(np.arange(self.n_nodes), self.n_1d)
        mir_x = (self.k - ix) * self.n_1d + iy
        mir_y = ix * self.n_1d + (self.k - iy)
        px = 0.5 * (px - px[mir_x])
        py = 0.5 * (py - py[mir_y])
        pxy = 0.5 * (pxy - pxy[mir_x])
        pxy = 0.5 * (pxy - pxy[mir_y])
        return px, py, pxy


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform rectangular mesh of mx-by-my cells.

    Edge and center coordinate arrays are the single source of node
    positions: both cells adjacent to an interior edge read the same array
    entry, making shared node coordinates bit-identical.
    """

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    mx: int
    my: int
    x_edges: np.ndarray = field(init=False, repr=False)
    y_edges: np.ndarray = field(init=False, repr=False)
    x_centers: np.ndarray = field(init=False, repr=False)
    y_centers: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ConfigError("grid bounds must satisfy x_max > x_min, y_max > y_min")
        if self.mx < 1 or self.my < 1:
            raise ConfigError(f"mesh sizes must be >= 1, got {self.mx}x{self.my}")
        dx = (self.x_max - self.x_min) / self.mx
        dy = (self.y_max - self.y_min) / self.my
        xe = self.x_min + dx * np.arange(self.mx + 1)
        ye = self.y_min + dy * np.arange(self.my + 1)
        xe[-1] = self.x_max
        ye[-1] = self.y_max
        object.__setattr__(self, "x_edges", xe)
        object.__setattr__(self, "y_edges", ye)
        object.__setattr__(self, "x_centers", self.x_min + dx * (np.arange(self.mx) + 0.5))
        object.__setattr__(self, "y_centers", self.y_min + dy * (np.arange(self.my) + 0.5))

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.mx

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / self.my

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def n_cells(self) -> int:
        return self.mx * self.my


def build_grid(bounds: tuple[float, float, float, float], mx: int, my: int) -> Grid:
    """Construct a Grid from (x_min, x_max, y_min, y_max)."""
    x_min, x_max, y_min, y_max = bounds
    return Grid(x_min=x_min, x_max=x_max, y_min=y_min, y_max=y_max, mx=mx, my=my)


def node_coordinates(grid: Grid, basis: NodalBasis) -> tuple[np.ndarray, np.ndarray]:
    """Physical coordinates of every basis node, shapes (mx, my, n_nodes).

    Edge nodes take their coordinate from the shared edge array and center
    nodes from the center array, never from x_center + offset arithmetic, so
    the same physical node gets the same float in both adjacent cells.
    """
    k = basis.k
    x1 = np.empty((grid.mx, k + 1))
    y1 = np.empty((grid.my, k + 1))
    x1[:, 0] = grid.x_edges[:-1]
    x1[:, k] = grid.x_edges[1:]
    y1[:, 0] = grid.y_edges[:-1]
    y1[:, k] = grid.y_edges[1:]
    if k == 2:
        x1[:, 1] = grid.x_centers
        y1[:, 1] = grid.y_centers
    X = x1[:, None, basis.node_ix] * np.ones((1, grid.my, 1))
    Y = y1[None, :, basis.node_iy] * np.ones((grid.mx, 1, 1))
    return X, Y


def interpolate_nodal(
    f: Callable[[np.ndarray, np.ndarray], np.ndarray], grid: Grid, basis: NodalBasis
) -> np.ndarray:
    """Nodal-interpolation coefficients of f, shape (mx, my, n_nodes).

    f must accept broadcastable arrays.  For the nodal basis the coefficients
    are simply the function values at the nodes.
    """
    X, Y = node_coordinates(grid, basis)
    vals = np.asarray(f(X, Y), dtype=float)
    if vals.shape != X.shape:
        vals = np.broadcast_to(vals, X.shape).copy()
    return vals
