"""Command-line front end.

Subcommands
-----------
simulate     integrate a scenario and write trajectory + metrics answer files
analytic     evaluate the closed-form mode fields and their honesty report
verify       run built-in cross-checks (residuals, oracle, mass, convergence)
sweep        rerun a scenario across one parameter's values

Exit codes: 0 success, 1 invalid config/parameters, 2 numerical failure or
failed verification, 3 I/O failure.  Fatal errors also emit one JSON line on
stderr with the error class and message.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, replace
from datetime import datetime, timezone
from math import isinf
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import AnalyticParams, default_mode, interface_fluxes, residuals
from .errors import NumericalError, ValidationError
from .metrics import release_metrics, sweep as run_sweep
from .params import DimensionlessParams
from .runio import (hash_file, load_config, spec_to_config, write_analytic_csv,
                    write_flux_mismatch_csv, write_json, write_matrix_csv,
                    write_sweep_csv, write_tissue_csv)
from .scenario import RunSpec, default_spec, run_spec
from .solver import SINK, ZERO_FLUX, make_grid
from .verification import (convergence_study, mass_audit, ode_oracle,
                           oracle_time_grid)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _dimless_dict(p: DimensionlessParams) -> dict:
    d = asdict(p)
    if isinf(d["pm"]):
        d["pm"] = "infinite"
    return d


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="releasesim",
        description="two-layer drug release simulator (polymeric matrix + tissue)",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file (defaults apply when omitted)")
        sp.add_argument("--out", default="out", help="output directory (default: ./out)")
        sp.add_argument("--t-end", type=float, dest="t_end", help="override solver.t_end")
        sp.add_argument("--dt", type=float, help="override solver.dt")
        sp.add_argument("--nx0", type=int, help="override matrix-layer cell count")
        sp.add_argument("--nx1", type=int, help="override tissue-layer cell count")
        sp.add_argument("--theta", type=float, help="override time-stepping theta")
        sp.add_argument("--outer-bc", dest="outer_bc", choices=[ZERO_FLUX, SINK],
                        help="override the outer tissue boundary condition")

    common(sub.add_parser("simulate", help="integrate the scenario"))
    common(sub.add_parser("analytic", help="evaluate the closed-form mode"))

    sp_verify = sub.add_parser("verify", help="run built-in cross-checks")
    common(sp_verify)
    sp_verify.add_argument("check", nargs="?", default="all",
                           choices=["residuals", "oracle", "mass", "convergence", "all"],
                           help="which check to run (default: all)")

    sp_sweep = sub.add_parser("sweep", help="rerun across one parameter's values")
    common(sp_sweep)
    sp_sweep.add_argument("--param", required=True, help="flat parameter name, e.g. ka")
    sp_sweep.add_argument("--values", required=True,
                          help="comma-separated values, e.g. 0.1,0.2,0.5")
    return parser


def _load_spec(args) -> tuple[RunSpec, dict]:
    if args.config:
        spec, analytic_overrides = load_config(args.config)
    else:
        spec, analytic_overrides = default_spec(), {}
    solver_updates = {}
    if args.t_end is not None:
        solver_updates["t_end"] = args.t_end
    if args.dt is not None:
        solver_updates["dt"] = args.dt
    if args.theta is not None:
        solver_updates["theta"] = args.theta
    if args.outer_bc is not None:
        solver_updates["outer_bc"] = args.outer_bc
    if solver_updates:
        spec = replace(spec, solver=replace(spec.solver, **solver_updates))
    if args.nx0 is not None:
        spec = replace(spec, nx0=args.nx0)
    if args.nx1 is not None:
        spec = replace(spec, nx1=args.nx1)
    return spec, analytic_overrides


def _resolve_mode(p: DimensionlessParams, overrides: dict) -> AnalyticParams:
    mode = default_mode(p)
    if overrides:
        mode = replace(mode, **overrides)
    return mode


def _sample_times(spec: RunSpec) -> np.ndarray:
    cfg = spec.solver
    n_steps = int(round(cfg.t_end / cfg.dt)) if cfg.t_end > 0 else 0
    idx = [j for j in range(n_steps + 1)
           if j % cfg.sample_every == 0 or j == n_steps]
    return np.asarray(idx, float) * cfg.dt


def _finish(out: Path, args, spec: RunSpec, p, started: str,
            artifact_names: list[str], extra: dict | None = None) -> None:
    """Write config.resolved.json and the run manifest with output hashes."""
    resolved = spec_to_config(spec)
    if extra and "analytic" in extra:
        resolved["analytic"] = extra["analytic"]
    write_json(out / "config.resolved.json", resolved)
    names = artifact_names + ["config.resolved.json"]
    manifest = {
        "version": __version__,
        "command": args.command,
        "params": {"dimensional": spec_to_config(spec),
                   "dimensionless": _dimless_dict(p)},
        "started": started,
        "finished": _now(),
        "outputs": {name: hash_file(out / name) for name in names},
    }
    if extra:
        manifest.update(extra)
    write_json(out / "run.json", manifest)
    for name in names + ["run.json"]:
        print(f"wrote {out / name}")


def _cmd_simulate(args) -> int:
    started = _now()
    spec, _ = _load_spec(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ts = run_spec(spec)
    p = spec.dimensionless()
    write_matrix_csv(out / "matrix.csv", ts)
    write_tissue_csv(out / "tissue.csv", ts)
    metrics = release_metrics(ts)
    write_json(out / "metrics.json", metrics.to_dict())
    write_json(out / "ledger.json", mass_audit(ts).to_dict())
    _finish(out, args, spec, p, started,
            ["matrix.csv", "tissue.csv", "metrics.json", "ledger.json"])
    print(f"matrix fraction {metrics.matrix_fraction:.4f}, "
          f"degraded fraction {metrics.degraded_fraction:.4f} at t={metrics.t_end:g}")
    return 0


def _cmd_analytic(args) -> int:
    started = _now()
    spec, overrides = _load_spec(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    p = spec.dimensionless()
    mode = _resolve_mode(p, overrides)
    times = _sample_times(spec)
    grid = make_grid(p, spec.nx0, spec.nx1)
    write_analytic_csv(out / "analytic.csv", times, grid.x_matrix, grid.x_tissue, p, mode)
    fm, ft = interface_fluxes(p, mode, times)
    write_flux_mismatch_csv(out / "flux_mismatch.csv", times, np.atleast_1d(fm),
                            np.atleast_1d(ft))
    res = residuals(p, mode)
    res_report = {
        name: {"max_abs": float(np.max(np.abs(vals))),
               "expected_zero": name in ("matrix_solid", "tissue_bound", "internalized")}
        for name, vals in res.items()
    }
    res_report["note"] = (
        "free-drug residuals and the interface flux gap are properties of the "
        "closed-form mode, not solver defects; see README"
    )
    write_json(out / "residuals.json", res_report)
    mode_dict = {"a": mode.a, "b": mode.b, "e1": mode.e1, "e2": mode.e2}
    _finish(out, args, spec, p, started,
            ["analytic.csv", "flux_mismatch.csv", "residuals.json"],
            extra={"analytic": mode_dict})
    print(f"max interface flux mismatch {float(np.max(np.abs(fm - ft))):.6g}")
    return 0


def _check_residuals(p, mode) -> dict:
    res = residuals(p, mode)
    kinetic = {k: float(np.max(np.abs(res[k])))
               for k in ("matrix_solid", "tissue_bound", "internalized")}
    free = {k: float(np.max(np.abs(res[k]))) for k in ("matrix_free", "tissue_free")}
    passed = all(v <= 1e-10 for v in kinetic.values())
    return {"name": "residuals", "passed": passed,
            "kinetic_max_abs": kinetic, "free_max_abs": free,
            "tolerance": 1e-10,
            "note": "free balances keep their startup transients by design"}


def _check_oracle(p, mode) -> dict:
    t_grid = oracle_time_grid(p, mode)
    # mid-layer stations keep clear of the mode's spatial nodes
    x_t = 0.5 * (p.l0 + p.l1)
    devs = {
        "matrix_solid": ode_oracle("matrix_solid", p, mode, 0.0, t_grid),
        "tissue_bound": ode_oracle("tissue_bound", p, mode, x_t, t_grid),
        "internalized": ode_oracle("internalized", p, mode, x_t, t_grid),
    }
    passed = all(v <= 1e-6 for v in devs.values())
    return {"name": "oracle", "passed": passed, "deviations": devs, "tolerance": 1e-6}


def _check_mass(spec: RunSpec) -> dict:
    base = replace(spec, nx0=32, nx1=32,
                   solver=replace(spec.solver, dt=0.01, t_end=5.0, sample_every=5,
                                  outer_bc=ZERO_FLUX))
    closed = replace(base, tissue=replace(base.tissue, kid=0.0))
    defect_closed = mass_audit(run_spec(closed)).max_rel_defect
    defect_sink = mass_audit(run_spec(base)).max_rel_defect
    passed = defect_closed <= 1e-4 and defect_sink <= 1e-3
    return {"name": "mass", "passed": passed,
            "closed_system_defect": defect_closed, "closed_tolerance": 1e-4,
            "with_degradation_defect": defect_sink, "degradation_tolerance": 1e-3}


def _check_convergence(p) -> dict:
    study = convergence_study(p)
    orders = {
        "spatial": study["spatial"].observed_order,
        "temporal_trapezoid": study["temporal_trapezoid"].observed_order,
        "temporal_implicit": study["temporal_implicit"].observed_order,
    }
    passed = (orders["spatial"] >= 1.9 and orders["temporal_trapezoid"] >= 1.9
              and orders["temporal_implicit"] >= 0.9)
    return {"name": "convergence", "passed": passed, "observed_orders": orders,
            "required": {"spatial": 1.9, "temporal_trapezoid": 1.9,
                         "temporal_implicit": 0.9}}


def _cmd_verify(args) -> int:
    started = _now()
    spec, overrides = _load_spec(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    p = spec.dimensionless()
    mode = _resolve_mode(p, overrides)
    runners = {
        "residuals": lambda: _check_residuals(p, mode),
        "oracle": lambda: _check_oracle(p, mode),
        "mass": lambda: _check_mass(spec),
        "convergence": lambda: _check_convergence(p),
    }
    names = list(runners) if args.check == "all" else [args.check]
    checks = []
    for name in names:
        check = runners[name]()
        checks.append(check)
        detail = {k: v for k, v in check.items() if k not in ("name", "passed")}
        print(f"{'PASS' if check['passed'] else 'FAIL'} {name}: "
              f"{json.dumps(detail, sort_keys=True, default=str)}")
    all_passed = all(c["passed"] for c in checks)
    write_json(out / "verify.json", {"checks": checks, "passed": all_passed})
    _finish(out, args, spec, p, started, ["verify.json"])
    return 0 if all_passed else 2


def _cmd_sweep(args) -> int:
    started = _now()
    spec, _ = _load_spec(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    p = spec.dimensionless()
    try:
        values = [float(v) for v in args.values.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise ValidationError(f"--values must be comma-separated numbers: {exc}") from exc
    if not values:
        raise ValidationError("--values is empty")
    rows = run_sweep(spec, args.param, values)
    for row in rows:
        if row.error is not None:
            print(f"warning: {args.param}={row.value:g} failed: {row.error}",
                  file=sys.stderr)
    write_sweep_csv(out / "sweep.csv", rows)
    _finish(out, args, spec, p, started, ["sweep.csv"],
            extra={"sweep": {"param": args.param, "values": values,
                             "failed": sum(r.error is not None for r in rows)}})
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"simulate": _cmd_simulate, "analytic": _cmd_analytic,
                "verify": _cmd_verify, "sweep": _cmd_sweep}
    try:
        return handlers[args.command](args)
    except (ValidationError, ValueError) as exc:
        _emit_error(exc, 1)
        return 1
    except NumericalError as exc:
        _emit_error(exc, 2)
        return 2
    except OSError as exc:
        _emit_error(exc, 3)
        return 3


def _emit_error(exc: Exception, code: int) -> None:
    print(json.dumps({"error": type(exc).__name__, "message": str(exc),
                      "exit_code": code}), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
