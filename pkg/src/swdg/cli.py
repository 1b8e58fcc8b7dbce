"""Command line front end: run benchmarks, convergence studies, quick checks.

Exit codes: 0 success, 1 invariant breach (with a reason line), 2 usage.
The output directory resolves as --out flag, then $SWDG_OUT, then ./swdg-out.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from .diagnostics import (
    convergence_table,
    lemma1_oracle,
    run_scenario,
    well_balance_residual,
    write_snapshot,
)
from .exceptions import ConfigError, DomainError, InvalidStateError, PositivityError
from .scenarios import SCENARIO_NAMES, build_scenario

WB_TOL = 1e-12

# scenarios whose exact solution is the initial lake-at-rest state; for these
# a run prints (and enforces) the well-balance residual
_STEADY = ("equilibrium_mono", "equilibrium_two", "equilibrium_four")


def _on_off(value: str) -> bool:
    if value not in ("on", "off"):
        raise argparse.ArgumentTypeError(f"expected on|off, got {value!r}")
    return value == "on"


def _mesh_list(value: str) -> list[tuple[int, int]]:
    meshes = []
    for part in value.split(","):
        try:
            nx, ny = part.lower().split("x")
            meshes.append((int(nx), int(ny)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad mesh {part!r}, expected NXxNY")
    return meshes


def _time_list(value: str) -> list[float]:
    try:
        return [float(p) for p in value.split(",") if p]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad snapshot list {value!r}")


def _out_dir(flag: str | None) -> Path:
    path = Path(flag or os.environ.get("SWDG_OUT") or "swdg-out")
    path.mkdir(parents=True, exist_ok=True)
    return path


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swdg",
        description="well-balanced positivity-preserving DG shallow water benchmarks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario and write snapshots")
    run.add_argument("scenario", choices=SCENARIO_NAMES)
    run.add_argument("--nx", type=int, default=None)
    run.add_argument("--ny", type=int, default=None)
    run.add_argument("--order", type=int, choices=(1, 2), default=1)
    run.add_argument("--cfl", type=float, default=None)
    run.add_argument("--t-final", type=float, default=None)
    run.add_argument("--strict-positivity", type=_on_off, default=None,
                     metavar="on|off")
    run.add_argument("--out", default=None, help="output directory")
    run.add_argument("--snapshots", type=_time_list, default=[],
                     metavar="t1,t2,...", help="extra snapshot times")

    conv = sub.add_parser("converge", help="error table over a mesh sequence")
    conv.add_argument("scenario", choices=SCENARIO_NAMES)
    conv.add_argument("--meshes", type=_mesh_list, required=True,
                      metavar="80x40,160x40,...")
    conv.add_argument("--t-final", type=float, default=None)
    conv.add_argument("--order", type=int, choices=(1, 2), default=1)

    sub.add_parser("verify", help="quick property suite (seconds)")
    return parser


def _cmd_run(args) -> int:
    sc = build_scenario(
        args.scenario,
        cfl=args.cfl,
        t_final=args.t_final,
        strict_positivity=args.strict_positivity,
    )
    out = _out_dir(args.out)
    t_end = sc.t_final
    held = []

    t0 = time.time()
    res = run_scenario(
        sc, mx=args.nx, my=args.ny, order=args.order,
        snapshot_times=tuple(args.snapshots),
        on_snapshot=lambda t_now, f: held.append((t_now, f)),
    )
    elapsed = time.time() - t0

    written = []
    for t_now, f in held:
        path = out / f"{sc.name}_t{t_now:.6g}.csv"
        write_snapshot(f, res.bathymetry, t_now, path)
        written.append(path)
    final_path = out / f"{sc.name}_t{t_end:.6g}.csv"
    write_snapshot(res.field, res.bathymetry, t_end, final_path)
    written.append(final_path)
    series_path = out / f"{sc.name}_series.csv"
    _write_series(res, series_path)
    written.append(series_path)

    rec = res.record
    print(f"scenario {sc.name}: {rec.n_steps} steps to t={t_end:g} "
          f"({res.grid.mx}x{res.grid.my}, order {args.order}) in {elapsed:.1f}s")
    print(f"min h at limiter nodes: {rec.series('min_h_nodes').min():.3e}; "
          f"max conserved-total drift: {rec.max_total_drift().max():.3e}")
    if sc.exact is not None:
        err = res.errors(t_end)
        keys = [k for k in err.errors if k == "h" or k.startswith("c")]
        print("L1 errors: " + ", ".join(f"E({k})={err.errors[k]:.4e}" for k in keys))
    for p in written:
        print(f"wrote {p}")

    if args.scenario in _STEADY:
        dev = well_balance_residual(res.field, res.initial)
        worst = max(dev.values())
        print(f"well-balance residual (max coefficient deviation): {worst:.3e}")
        if worst > WB_TOL:
            print(f"reason: steady state drifted by {worst:.3e} > {WB_TOL:g}")
            return 1
    return 0


def _write_series(res, path: Path) -> None:
    rec = res.record
    n_c = res.field.n_constituents
    cols = ["t", "dt", "min_h_nodes", "min_h_avg", "cells_scaled",
            "total_h", "total_p1"] + [f"total_q{i + 1}" for i in range(n_c)]
    lines = [",".join(cols)]
    for s in rec.steps:
        row = [s.t, s.dt, s.min_h_nodes, s.min_h_avg, float(s.cells_scaled)]
        row.extend(s.totals)
        lines.append(",".join(f"{v:.17g}" for v in row))
    path.write_text("\n".join(lines) + "\n")


def _cmd_converge(args) -> int:
    sc = build_scenario(args.scenario, t_final=args.t_final)
    table = convergence_table(sc, args.meshes, order=args.order,
                              t_final=args.t_final)
    names = [k for k in table.reports[0].errors if k.startswith("c")] or ["h"]
    print(table.format(components=names))
    return 0


def _cmd_verify() -> int:
    failures = []

    def check(label: str, ok: bool, detail: str) -> None:
        print(f"{'ok  ' if ok else 'FAIL'} {label}: {detail}")
        if not ok:
            failures.append(label)

    for order in (1, 2):
        sc = build_scenario("equilibrium_two", mesh=(20, 10), t_final=2.0)
        res = run_scenario(sc, order=order)
        worst = max(well_balance_residual(res.field, res.initial).values())
        check(f"well-balance order {order}", worst <= WB_TOL,
              f"max coefficient deviation {worst:.2e}")

    stats = lemma1_oracle(trials=2000, lam_alpha=1.0, seed=11)
    check("lemma1 bound", stats.negative_trials == 0,
          f"min depth {stats.min_h:.2e} over {stats.trials} trials")
    stats = lemma1_oracle(trials=2000, lam_alpha=1.5, seed=11)
    check("lemma1 sharpness", stats.negative_trials > 0,
          f"{stats.negative_trials} negative trials at lam*alpha=1.5")

    sc = build_scenario("equilibrium_mono", mesh=(40, 20), t_final=1.0)
    res = run_scenario(sc, order=1)
    T = res.record.totals_matrix()
    rel = float((np.abs(T - T[0]).max(axis=0) / np.abs(T[0])).max())
    check("conservation", rel <= 1e-12,
          f"relative drift {rel:.2e} over {res.record.n_steps} steps")

    if failures:
        print(f"reason: {len(failures)} check(s) failed: {', '.join(failures)}")
        return 1
    print("all checks passed")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "converge":
            return _cmd_converge(args)
        return _cmd_verify()
    except (ConfigError, DomainError) as exc:
        print(f"reason: {exc}", file=sys.stderr)
        return 2
    except (InvalidStateError, PositivityError) as exc:
        print(f"reason: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
