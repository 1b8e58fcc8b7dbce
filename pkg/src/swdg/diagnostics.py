"""Error metrics, conservation audits, snapshots, and run orchestration.

Cell values entering the L1 metric are cell averages: numerical primitives
are recovered pointwise at the volume quadrature points and averaged with
the quadrature weights, and the exact solution is averaged with the same
rule, so E = 0 exactly when the two agree at every quadrature point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .exceptions import ConfigError
from .grid import Grid, NodalBasis
from .integrator import RunRecord, simulate_field
from .scenarios import ExactSolution, Scenario, initial_condition, scenario_grid
from .state import ETA, P1, Q0, Bathymetry, DgField, recover_primitive


@dataclass
class ErrorReport:
    """Relative L1 errors per field; entries in `absolute` fell back to the
    unnormalized norm because the exact field integrates to zero."""

    errors: dict[str, float]
    absolute: tuple[str, ...]
    mesh: tuple[int, int]
    order: int
    t: float

    def __getitem__(self, name: str) -> float:
        return self.errors[name]


def _volume_points(grid: Grid, basis: NodalBasis) -> tuple[np.ndarray, np.ndarray]:
    pts, _ = basis.volume_rule
    shape = (grid.mx, grid.my, len(pts))
    X = grid.x_centers[:, None, None] + grid.dx * pts[None, None, :, 0]
    Y = grid.y_centers[None, :, None] + grid.dy * pts[None, None, :, 1]
    return np.broadcast_to(X, shape), np.broadcast_to(Y, shape)


def _primitives_at_volume(field: DgField, bathymetry: Bathymetry, h_eps: float = 1e-8):
    phi, _, _ = field.basis.vol_matrices
    vals = np.tensordot(field.data, phi, axes=([2], [0]))  # (mx, my, ncomp, Q)
    U = np.moveaxis(vals, 2, 0)
    z = np.tensordot(bathymetry.coeffs, phi, axes=([2], [0]))
    # post-limiter front states can pair tiny h with stale p1; report as dry
    return recover_primitive(U, z, h_eps, strict=False), z


def l1_error(
    field: DgField,
    bathymetry: Bathymetry,
    exact: Union[ExactSolution, Callable],
    t: float,
) -> ErrorReport:
    """Relative L1 errors of h, eta, u, v, and each concentration at time t.

    Velocity errors on still-water states come out absolute (flagged), since
    the exact velocity integrates to zero.
    """
    fn = exact.fn if isinstance(exact, ExactSolution) else exact
    grid, basis = field.grid, field.basis
    _, w = basis.volume_rule
    X, Y = _volume_points(grid, basis)
    prim, z = _primitives_at_volume(field, bathymetry)
    he, ue, ve, ce = fn(t, X, Y)

    shape = X.shape

    def avg(a) -> np.ndarray:
        return np.broadcast_to(np.asarray(a, dtype=float), shape) @ w

    pairs: list[tuple[str, np.ndarray, np.ndarray]] = [
        ("h", avg(prim.h), avg(he)),
        ("eta", avg(prim.h + z), avg(he + z)),
        ("u", avg(prim.u), avg(ue)),
        ("v", avg(prim.v), avg(ve)),
    ]
    n_c = field.n_constituents
    if len(ce) != n_c:
        raise ConfigError(f"exact solution has {len(ce)} constituents, field has {n_c}")
    for i in range(n_c):
        pairs.append((f"c{i + 1}", avg(prim.c[i]), avg(ce[i])))

    errors: dict[str, float] = {}
    flagged: list[str] = []
    for name, num, exa in pairs:
        diff = float(np.abs(num - exa).sum())
        den = float(np.abs(exa).sum())
        if den == 0.0:
            errors[name] = diff * grid.cell_area
            flagged.append(name)
        else:
            errors[name] = diff / den
    return ErrorReport(
        errors=errors,
        absolute=tuple(flagged),
        mesh=(grid.mx, grid.my),
        order=basis.k,
        t=t,
    )


def conserved_totals(field: DgField, bathymetry: Bathymetry) -> dict[str, float]:
    """Domain integrals of the conserved densities h, p1, and each q_i."""
    avg = np.tensordot(field.data, field.basis.avg_weights, axes=([2], [0]))
    z_avg = bathymetry.coeffs @ field.basis.avg_weights
    area = field.grid.cell_area
    out = {
        "h": float((avg[:, :, ETA] - z_avg).sum()) * area,
        "p1": float(avg[:, :, P1].sum()) * area,
    }
    for i in range(field.n_constituents):
        out[f"q{i + 1}"] = float(avg[:, :, Q0 + i].sum()) * area
    return out


def well_balance_residual(field: DgField, reference: DgField) -> dict[str, float]:
    """Max-norm coefficient deviation per component between two fields."""
    if field.data.shape != reference.data.shape:
        raise ConfigError(
            f"field shapes differ: {field.data.shape} vs {reference.data.shape}"
        )
    dev = np.abs(field.data - reference.data).max(axis=(0, 1, 2))
    names = ["eta", "p1", "p2", "p3"] + [f"q{i + 1}" for i in range(field.n_constituents)]
    return {name: float(dev[i]) for i, name in enumerate(names)}


@dataclass
class Lemma1Stats:
    trials: int
    min_h: float
    negative_trials: int

    @property
    def passed(self) -> bool:
        return self.negative_trials == 0


def lemma1_oracle(trials: int = 10_000, cells: int = 50, lam_alpha: float = 1.0,
                  seed: int = 0, g: float = 1.0) -> Lemma1Stats:
    """First-order 1D Lax-Friedrichs depth update on random nonnegative data.

    One periodic update h_i' = h_i - lam/2 [(hu)_{i+1} - (hu)_{i-1}]
    + lam*alpha/2 [h_{i+1} - 2 h_i + h_{i-1}] with alpha = max(|u| + sqrt(gh))
    and lam scaled so lam*alpha equals the requested product.  With
    lam_alpha <= 1 the update is a convex combination of nonnegative terms;
    larger products break the guarantee, which the stats make visible.
    """
    rng = np.random.default_rng(seed)
    min_h = math.inf
    negative = 0
    for _ in range(trials):
        h = rng.uniform(0.0, 2.0, cells)
        h[rng.uniform(size=cells) < 0.2] = 0.0  # force dry cells into the mix
        u = rng.uniform(-2.0, 2.0, cells)
        alpha = float(np.max(np.abs(u) + np.sqrt(g * h)))
        if alpha == 0.0:
            continue
        lam = lam_alpha / alpha
        hu = h * u
        hp, hm = np.roll(h, -1), np.roll(h, 1)
        flux = np.roll(hu, -1) - np.roll(hu, 1)
        h_new = h - 0.5 * lam * flux + 0.5 * lam * alpha * (hp - 2.0 * h + hm)
        m = float(h_new.min())
        min_h = min(min_h, m)
        if m < 0.0:
            negative += 1
    return Lemma1Stats(trials=trials, min_h=min_h, negative_trials=negative)


def _center_rows(field: DgField, bathymetry: Bathymetry):
    basis = field.basis
    phi_c, _, _ = basis.eval(np.zeros((1, 2)))
    vals = np.tensordot(field.data, phi_c[:, 0], axes=([2], [0]))  # (mx, my, ncomp)
    z = bathymetry.coeffs @ phi_c[:, 0]
    prim = recover_primitive(np.moveaxis(vals, 2, 0), z, strict=False)
    return prim, z


def write_snapshot(
    field: DgField,
    bathymetry: Bathymetry,
    t: float,
    path,
    y_slice: Optional[float] = None,
) -> Path:
    """CSV of cell-center values, y-major row order, 17 significant digits.

    Columns: x,y,z,h,eta,u,v,r,c1..cN.  With y_slice, only the row of cells
    containing that y is written (fixed-y cross section).
    """
    path = Path(path)
    grid = field.grid
    prim, z = _center_rows(field, bathymetry)
    n_c = field.n_constituents
    header = "x,y,z,h,eta,u,v,r," + ",".join(f"c{i + 1}" for i in range(n_c))
    header = header.rstrip(",")

    if y_slice is None:
        j_range = range(grid.my)
    else:
        j = int(np.clip((y_slice - grid.y_min) / grid.dy, 0, grid.my - 1))
        j_range = range(j, j + 1)

    def fmt(v: float) -> str:
        return f"{v:.17g}"

    lines = [f"# t = {fmt(t)}", header]
    for j in j_range:
        for i in range(grid.mx):
            row = [
                grid.x_centers[i],
                grid.y_centers[j],
                z[i, j],
                prim.h[i, j],
                prim.h[i, j] + z[i, j],
                prim.u[i, j],
                prim.v[i, j],
                prim.r[i, j],
            ]
            row.extend(prim.c[q, i, j] for q in range(n_c))
            lines.append(",".join(fmt(float(v)) for v in row))
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write snapshot to {path}: {exc}") from exc
    return path


@dataclass
class RunResult:
    scenario: Scenario
    grid: Grid
    basis: NodalBasis
    field: DgField
    bathymetry: Bathymetry
    initial: DgField
    record: RunRecord

    def errors(self, t: Optional[float] = None) -> ErrorReport:
        if self.scenario.exact is None:
            raise ConfigError(f"scenario {self.scenario.name!r} has no exact solution")
        t_eval = self.scenario.t_final if t is None else t
        return l1_error(self.field, self.bathymetry, self.scenario.exact, t_eval)


def run_scenario(
    scenario: Scenario,
    mx: Optional[int] = None,
    my: Optional[int] = None,
    order: int = 1,
    t_final: Optional[float] = None,
    snapshot_times: Sequence[float] = (),
    on_snapshot=None,
    max_steps: int = 10_000_000,
) -> RunResult:
    """Discretize, march to t_final, and collect the run record."""
    grid = scenario_grid(scenario, mx, my)
    basis = NodalBasis(order)
    field0, bathy = initial_condition(scenario, grid, basis)
    t_end = scenario.t_final if t_final is None else float(t_final)
    final, record = simulate_field(
        field0,
        bathy,
        scenario.boundary,
        t_end,
        scenario.controls(),
        g=scenario.g,
        exact=scenario.exact_conserved(),
        deltas=np.asarray(scenario.deltas, dtype=float),
        snapshot_times=tuple(snapshot_times),
        on_snapshot=on_snapshot,
        max_steps=max_steps,
    )
    return RunResult(
        scenario=scenario,
        grid=grid,
        basis=basis,
        field=final,
        bathymetry=bathy,
        initial=field0,
        record=record,
    )


@dataclass
class ConvergenceTable:
    meshes: list[tuple[int, int]]
    reports: list[ErrorReport]
    orders: dict[str, list[float]] = dc_field(default_factory=dict)

    def format(self, components: Optional[Sequence[str]] = None) -> str:
        names = list(components) if components else sorted(self.reports[0].errors)
        head = "mesh".ljust(12) + "".join(n.rjust(14) for n in names)
        rows = [head]
        for (nx, ny), rep in zip(self.meshes, self.reports):
            cells = f"{nx}x{ny}".ljust(12)
            rows.append(cells + "".join(f"{rep.errors[n]:14.4e}" for n in names))
        if self.orders:
            tail = "order".ljust(12) + "".join(
                f"{np.mean(self.orders[n]):14.2f}" if self.orders.get(n) else " " * 14
                for n in names
            )
            rows.append(tail)
        return "\n".join(rows)


def convergence_table(
    scenario: Scenario,
    meshes: Sequence[tuple[int, int]],
    order: int = 1,
    t_final: Optional[float] = None,
) -> ConvergenceTable:
    """Run the scenario on each mesh and tabulate errors plus observed orders."""
    if scenario.exact is None:
        raise ConfigError(f"scenario {scenario.name!r} has no exact solution")
    if len(meshes) < 2:
        raise ConfigError("convergence study needs at least two meshes")
    reports = []
    for nx, ny in meshes:
        res = run_scenario(scenario, mx=nx, my=ny, order=order, t_final=t_final)
        reports.append(res.errors(t_final if t_final is not None else None))
    orders: dict[str, list[float]] = {name: [] for name in reports[0].errors}
    for prev, cur, (nx0, _), (nx1, _) in zip(reports, reports[1:], meshes, meshes[1:]):
        ratio = nx1 / nx0
        if ratio <= 1.0:
            continue
        for name in orders:
            e0, e1 = prev.errors[name], cur.errors[name]
            if e0 > 0.0 and e1 > 0.0:
                orders[name].append(math.log(e0 / e1) / math.log(ratio))
    return ConvergenceTable(meshes=list(meshes), reports=reports, orders=orders)
