"""Benchmark catalog: domains, bathymetry, initial fields, and exact solutions.

Each scenario bundles everything a run needs: bounds, default mesh, physical
constants, boundary closure, limiter defaults, and (where one exists) the
analytic solution used for Dirichlet boundaries and error measurement.
Exact solutions are expressed in primitives (h, u, v, c) with the depth
measured from the analytic bathymetry, so packing them against the discrete
bathymetry trace stays consistent with the solver's h = eta - Z convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .exceptions import ConfigError, DomainError
from .grid import Grid, NodalBasis, build_grid, interpolate_nodal, node_coordinates
from .integrator import (
    BoundaryCondition,
    BoundarySpec,
    DIRICHLET,
    OUTFLOW,
    StepControls,
    WALL,
)
from .state import P3, Bathymetry, DgField, pack_conserved

SCENARIO_NAMES = (
    "perturbation",
    "parabolic_bowl",
    "equilibrium_mono",
    "equilibrium_two",
    "equilibrium_four",
    "flood_wave",
    "dam_break",
    "still_water_custom",
)

# primitive-field evaluators: (t, X, Y) -> (h, u, v, c) with c stacked (N, ...)
PrimitiveFn = Callable[[float, np.ndarray, np.ndarray], tuple]


@dataclass(frozen=True, eq=False)
class ExactSolution:
    """Analytic solution in primitives; c rows are stacked first."""

    fn: PrimitiveFn

    def __call__(self, t: float, x: np.ndarray, y: np.ndarray):
        return self.fn(t, x, y)


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    bounds: tuple[float, float, float, float]
    default_mesh: tuple[int, int]
    deltas: np.ndarray
    g: float
    t_final: float
    cfl: float
    boundary: BoundarySpec
    strict_positivity: bool
    use_minmod: bool
    bathymetry_fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    initial_fn: PrimitiveFn  # evaluated at t = 0
    exact: Optional[ExactSolution]
    description: str = ""

    @property
    def n_constituents(self) -> int:
        return len(self.deltas)

    def controls(self) -> StepControls:
        return StepControls(
            cfl=self.cfl,
            strict_positivity=self.strict_positivity,
            use_minmod=self.use_minmod,
        )

    def exact_conserved(self):
        """Ghost-state callable (t, X, Y, z_trace) -> conserved, or None."""
        if self.exact is None:
            return None
        deltas = self.deltas

        def fn(t, X, Y, z):
            h, u, v, c = self.exact(t, X, Y)
            return pack_conserved(h, u, v, c, z, deltas)

        return fn


def _no_tracers(shape) -> np.ndarray:
    return np.zeros((0,) + shape)


def _constant_tracers(values: np.ndarray, shape) -> np.ndarray:
    out = np.empty((len(values),) + shape)
    out[:] = np.reshape(values, (len(values),) + (1,) * len(shape))
    return out


def _perturbation() -> Scenario:
    def z_fn(x, y):
        return 0.8 * np.exp(-5.0 * (x - 0.9) ** 2 - 50.0 * (y - 0.5) ** 2)

    def initial(t, x, y):
        eta = np.where((x >= 0.05) & (x <= 0.15), 1.01, 1.0)
        h = eta - z_fn(x, y)
        zero = np.zeros_like(h)
        return h, zero, zero.copy(), _no_tracers(np.shape(h))

    return Scenario(
        name="perturbation",
        bounds=(0.0, 2.0, 0.0, 1.0),
        default_mesh=(200, 50),
        deltas=np.zeros(0),
        g=1.0,
        t_final=1.7,
        cfl=0.3,
        boundary=BoundarySpec(left=WALL, right=WALL, bottom=OUTFLOW, top=OUTFLOW),
        strict_positivity=False,
        use_minmod=True,
        bathymetry_fn=z_fn,
        initial_fn=initial,
        exact=None,
        description="small surface hump over an exponential bump, pure shallow water",
    )


BOWL_H0 = 0.1
BOWL_A = 1.0
BOWL_R0 = 0.8
BOWL_OMEGA = math.sqrt(8.0 * BOWL_H0) / BOWL_A  # g = 1
BOWL_AMP = (BOWL_A**2 - BOWL_R0**2) / (BOWL_A**2 + BOWL_R0**2)
BOWL_PERIOD = 2.0 * math.pi / BOWL_OMEGA


def _parabolic_bowl() -> Scenario:
    h0, a, A, om = BOWL_H0, BOWL_A, BOWL_AMP, BOWL_OMEGA

    def z_fn(x, y):
        return h0 * ((x * x + y * y) / (a * a) - 1.0)

    def exact_fn(t, x, y):
        d = 1.0 - A * math.cos(om * t)
        rr = (x * x + y * y) / (a * a)
        eta = h0 * (math.sqrt(1.0 - A * A) / d - 1.0 - rr * ((1.0 - A * A) / (d * d) - 1.0))
        h = np.maximum(eta - z_fn(x, y), 0.0)
        wet = h > 0.0
        fac = 0.5 * om * math.sin(om * t) / d
        u = np.where(wet, fac * x, 0.0)
        v = np.where(wet, fac * y, 0.0)
        return h, u, v, _no_tracers(np.shape(h))

    return Scenario(
        name="parabolic_bowl",
        bounds=(-2.0, 2.0, -2.0, 2.0),
        default_mesh=(200, 200),
        deltas=np.zeros(0),
        g=1.0,
        t_final=BOWL_PERIOD,
        cfl=0.2,
        boundary=BoundarySpec.uniform(DIRICHLET),
        strict_positivity=True,
        use_minmod=True,
        bathymetry_fn=z_fn,
        initial_fn=lambda t, x, y: exact_fn(0.0, x, y),
        exact=ExactSolution(exact_fn),
        description="oscillating surface in a parabolic bowl with moving wet/dry fronts",
    )


def _equilibrium_z(x, y):
    return 0.1 * (1.0 - np.cos(2.0 * np.pi * x / 10.0))


def _equilibrium(name: str, c_fns: tuple, deltas: np.ndarray, description: str) -> Scenario:
    def initial(t, x, y):
        h = 1.0 - _equilibrium_z(x, y)
        zero = np.zeros_like(h)
        c = np.stack([np.broadcast_to(f(x, y), np.shape(h)) for f in c_fns]) \
            if c_fns else _no_tracers(np.shape(h))
        return h, zero, zero.copy(), c

    return Scenario(
        name=name,
        bounds=(0.0, 10.0, 0.0, 5.0),
        default_mesh=(80, 40),
        deltas=deltas,
        g=1.0,
        t_final=50.0,
        cfl=0.2,
        boundary=BoundarySpec.uniform(WALL),
        strict_positivity=False,
        use_minmod=False,
        bathymetry_fn=_equilibrium_z,
        initial_fn=initial,
        exact=ExactSolution(initial),
        description=description,
    )


def _equilibrium_mono(n: int = 1) -> Scenario:
    c_fns = tuple(lambda x, y: np.full(np.shape(x), 0.5) for _ in range(n))
    deltas = np.full(n, 0.2 / n)
    return _equilibrium(
        "equilibrium_mono", c_fns, deltas,
        "lake at rest with uniform concentration, trivial steady state",
    )


def _c1(x, y):
    return 0.2 + 0.1 * np.cos(np.pi * x / 10.0) ** 2


def _c2(x, y):
    return 0.3 + 0.1 * np.sin(np.pi * x / 10.0) ** 2


def _c3(x, y):
    return 0.2 + 0.1 * np.cos(np.pi * x / 20.0) ** 2


def _c4(x, y):
    return 0.3 + 0.1 * np.sin(np.pi * x / 20.0) ** 2


FLOOD_H0 = 1.0
FLOOD_R0 = 14.0
FLOOD_T = FLOOD_R0 / math.sqrt(2.0 * FLOOD_H0)  # g = 1


def _flood_wave(n: int = 1) -> Scenario:
    h0, R0, T = FLOOD_H0, FLOOD_R0, FLOOD_T
    cvals = np.full(n, 0.5)
    deltas = np.full(n, 0.2 / n)

    def exact_fn(t, x, y):
        s = T * T / (t * t + T * T)
        rr = (x * x + y * y) / (R0 * R0)
        h = h0 * s * (1.0 - rr * s)
        u = x * t / (t * t + T * T)
        v = y * t / (t * t + T * T)
        return h, u, v, _constant_tracers(cvals, np.shape(h))

    return Scenario(
        name="flood_wave",
        bounds=(-6.0, 6.0, -6.0, 6.0),
        default_mesh=(80, 80),
        deltas=deltas,
        g=1.0,
        t_final=4.0,
        cfl=0.2,
        boundary=BoundarySpec.uniform(DIRICHLET),
        strict_positivity=True,
        use_minmod=True,
        bathymetry_fn=lambda x, y: np.zeros(np.shape(x)),
        initial_fn=lambda t, x, y: exact_fn(0.0, x, y),
        exact=ExactSolution(exact_fn),
        description="spreading parabolic mound on a flat bottom, constant concentration",
    )


def _dam_break(n: int = 1) -> Scenario:
    cvals = np.full(n, 0.5)
    deltas = np.full(n, 0.2 / n)

    def initial(t, x, y):
        h = np.where(x <= 5.0, 1.0, 0.1)
        zero = np.zeros_like(h)
        return h, zero, zero.copy(), _constant_tracers(cvals, np.shape(h))

    p3_zero = BoundaryCondition("override", component=P3, value=0.0)
    return Scenario(
        name="dam_break",
        bounds=(0.0, 10.0, 0.0, 5.0),
        default_mesh=(200, 50),
        deltas=deltas,
        g=1.0,
        t_final=3.0,
        cfl=0.2,
        boundary=BoundarySpec(left=OUTFLOW, right=OUTFLOW, bottom=p3_zero, top=p3_zero),
        strict_positivity=False,
        use_minmod=True,
        bathymetry_fn=lambda x, y: np.zeros(np.shape(x)),
        initial_fn=initial,
        exact=None,
        description="dam break with passive transport, flat bottom",
    )


def build_still_water(
    bounds: tuple[float, float, float, float],
    bathymetry_fn,
    c_fns: tuple,
    deltas,
    surface: float = 1.0,
    mesh: tuple[int, int] = (80, 40),
    t_final: float = 10.0,
) -> Scenario:
    """Custom lake-at-rest scenario; validates the steady-state compatibility.

    The concentrations must keep sum(Delta_i c_i) constant over the domain,
    otherwise the state is not steady and the construction is rejected.
    """
    deltas = np.asarray(deltas, dtype=float)
    if len(c_fns) != len(deltas):
        raise ConfigError(f"{len(c_fns)} concentration profiles vs {len(deltas)} deltas")
    rng = np.random.default_rng(2024)
    xs = rng.uniform(bounds[0], bounds[1], 257)
    ys = rng.uniform(bounds[2], bounds[3], 257)
    if len(deltas):
        sig = sum(d * np.asarray(f(xs, ys), dtype=float) for d, f in zip(deltas, c_fns))
        sig = np.broadcast_to(sig, xs.shape)
        if np.ptp(sig) > 1e-12 * max(1.0, float(np.max(np.abs(sig)))):
            raise DomainError(
                "sum(Delta_i c_i) varies over the domain; not a steady state"
            )
    z = bathymetry_fn(xs, ys)
    if np.any(surface - z <= 0.0):
        raise DomainError("surface level must exceed the bathymetry everywhere")

    def initial(t, x, y):
        h = surface - np.asarray(bathymetry_fn(x, y), dtype=float)
        zero = np.zeros_like(h)
        c = np.stack([np.broadcast_to(f(x, y), np.shape(h)) for f in c_fns]) \
            if len(c_fns) else _no_tracers(np.shape(h))
        return h, zero, zero.copy(), c

    return Scenario(
        name="still_water_custom",
        bounds=bounds,
        default_mesh=mesh,
        deltas=deltas,
        g=1.0,
        t_final=t_final,
        cfl=0.2,
        boundary=BoundarySpec.uniform(WALL),
        strict_positivity=False,
        use_minmod=False,
        bathymetry_fn=bathymetry_fn,
        initial_fn=initial,
        exact=ExactSolution(initial),
        description="user-supplied lake-at-rest configuration",
    )


def build_scenario(
    name: str,
    n_constituents: Optional[int] = None,
    mesh: Optional[tuple[int, int]] = None,
    cfl: Optional[float] = None,
    t_final: Optional[float] = None,
    strict_positivity: Optional[bool] = None,
    use_minmod: Optional[bool] = None,
) -> Scenario:
    """Catalog lookup with overrides for mesh, CFL, end time, and limiter modes.

    n_constituents replicates the uniform tracer of the mono/flood/dam cases
    into N copies with Delta_i = 0.2/N, leaving the mixture density (and so
    the dynamics) unchanged; scenarios with structured profiles reject it.
    """
    base_n = {"equilibrium_mono": 1, "flood_wave": 1, "dam_break": 1}
    if n_constituents is not None:
        if name not in base_n:
            raise ConfigError(f"scenario {name!r} has a fixed constituent count")
        if n_constituents < 1:
            raise ConfigError("n_constituents must be >= 1")

    if name == "perturbation":
        sc = _perturbation()
    elif name == "parabolic_bowl":
        sc = _parabolic_bowl()
    elif name == "equilibrium_mono":
        sc = _equilibrium_mono(n_constituents or 1)
    elif name == "equilibrium_two":
        sc = _equilibrium(
            "equilibrium_two", (_c1, _c2), np.array([0.2, 0.2]),
            "lake at rest with two compensating concentration profiles",
        )
    elif name == "equilibrium_four":
        sc = _equilibrium(
            "equilibrium_four", (_c1, _c2, _c3, _c4), np.array([0.2, 0.2, 0.2, 0.2]),
            "lake at rest with four compensating concentration profiles",
        )
    elif name == "flood_wave":
        sc = _flood_wave(n_constituents or 1)
    elif name == "dam_break":
        sc = _dam_break(n_constituents or 1)
    elif name == "still_water_custom":
        raise ConfigError(
            "still_water_custom is built with build_still_water(...), not by name"
        )
    else:
        raise ConfigError(f"unknown scenario {name!r}; choose from {SCENARIO_NAMES}")

    updates = {}
    if mesh is not None:
        mx, my = mesh
        if mx < 1 or my < 1:
            raise ConfigError(f"mesh must be positive, got {mesh}")
        updates["default_mesh"] = (int(mx), int(my))
    if cfl is not None:
        if not 0.0 < cfl <= 1.0:
            raise ConfigError(f"cfl must be in (0, 1], got {cfl}")
        updates["cfl"] = float(cfl)
    if t_final is not None:
        if t_final <= 0.0:
            raise ConfigError(f"t_final must be positive, got {t_final}")
        updates["t_final"] = float(t_final)
    if strict_positivity is not None:
        updates["strict_positivity"] = bool(strict_positivity)
    if use_minmod is not None:
        updates["use_minmod"] = bool(use_minmod)
    return replace(sc, **updates) if updates else sc


def exact_solution(scenario: Scenario, t: float, x: np.ndarray, y: np.ndarray):
    """Primitives (h, u, v, c) of the scenario's analytic solution at time t."""
    if scenario.exact is None:
        raise ConfigError(f"scenario {scenario.name!r} has no closed-form solution")
    return scenario.exact(t, np.asarray(x, dtype=float), np.asarray(y, dtype=float))


def scenario_grid(scenario: Scenario, mx: Optional[int] = None, my: Optional[int] = None) -> Grid:
    nx, ny = scenario.default_mesh
    return build_grid(scenario.bounds, mx or nx, my or ny)


def initial_condition(
    scenario: Scenario, grid: Grid, basis: NodalBasis
) -> tuple[DgField, Bathymetry]:
    """Nodal-interpolated initial field and bathymetry on the given mesh.

    Conserved values are packed pointwise at the basis nodes, so a shared
    edge node receives bit-identical values in both adjacent cells.
    """
    z = interpolate_nodal(scenario.bathymetry_fn, grid, basis)
    X, Y = node_coordinates(grid, basis)
    h, u, v, c = scenario.initial_fn(0.0, X, Y)
    h = np.broadcast_to(np.asarray(h, dtype=float), X.shape)
    if np.any(h < 0.0):
        raise DomainError(f"initial depth is negative somewhere in {scenario.name!r}")
    if np.any(np.asarray(c) < 0.0):
        raise DomainError(f"initial concentrations are negative in {scenario.name!r}")
    U = pack_conserved(h, u, v, c, z, scenario.deltas)
    data = np.ascontiguousarray(np.moveaxis(U, 0, -1))
    return DgField(grid, basis, data), Bathymetry(grid, basis, z)
