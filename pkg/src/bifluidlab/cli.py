"""Command-line entry points: run, verify eos, compare, sweep.

Config files use a flat dotted-key format (one `key = value` per line, `#`
comments).  Unknown keys are hard errors.  All float output is printed with
17 significant digits so files round-trip bit-faithfully.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from .coupler import RunConfig, Trajectory, run
from .diagnostics import RelEnergyRecord, defect_proxy, gronwall_check
from .eos import EosParams, convexity_constants
from .errors import (
    BifluidError,
    CertificationError,
    ConfigError,
    InvariantViolation,
    NonConvergenceError,
    SolverError,
)
from .reference import restrict, uniform_steady

__all__ = ["parse_config", "main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_INVARIANT = 4

TRACE_COLUMNS = [
    "t",
    "mass_R",
    "mass_Z",
    "kinetic",
    "helmholtz",
    "dissipation_cum",
    "residual_E7",
    "min_R",
    "max_R",
    "min_Z",
    "max_Z",
    "cone_margin_low",
    "cone_margin_high",
    "picard_iters",
    "rel_energy",
]

TRACE_SCHEMA_VERSION = "1"

# Keys accepted in config files, mapped to RunConfig constructor arguments.
# Value None marks keys that need bespoke handling.
_KEYMAP = {
    "grid.n_cells": ("n_cells", int),
    "galerkin.n_modes": ("n_modes", int),
    "transport.epsilon": ("epsilon", float),
    "transport.theta": ("theta", float),
    "time.dt": ("dt", float),
    "time.horizon": ("horizon", float),
    "fluid.mu": ("mu", float),
    "fluid.lambda": ("lam", float),
    "eos.a1": (None, float),
    "eos.a2": (None, float),
    "eos.gamma": (None, float),
    "eos.beta": (None, float),
    "eos.b_low": (None, float),
    "eos.b_high": (None, float),
    "bc.u_b": ("u_b", "expr"),
    "bc.r_b": ("r_b", float),
    "bc.z_b": ("z_b", float),
    "init.r0": ("r0", "expr"),
    "init.z0": ("z0", "expr"),
    "init.u0": ("u0", "expr"),
    "picard.tol": ("picard_tol", float),
    "picard.max": ("picard_max", int),
    "picard.relaxation": ("picard_relaxation", float),
    "output.every_n_steps": ("every_n_steps", int),
    "output.dir": ("out_dir", str),
}

_EXPR_NAMES = {
    "sin": np.sin,
    "cos": np.cos,
    "tanh": np.tanh,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "pi": math.pi,
}


def _parse_expr(text: str, key: str, line_no: int):
    """A constant, or an expression in x over a small whitelisted namespace."""
    try:
        return float(text)
    except ValueError:
        pass
    code = compile(text, f"<config:{key}>", "eval")
    for name in code.co_names:
        if name not in _EXPR_NAMES and name != "x":
            raise ConfigError(
                [f"line {line_no}: key {key}: unknown name {name!r} in expression {text!r}"]
            )

    def fn(x, _code=code):
        return eval(_code, {"__builtins__": {}}, {**_EXPR_NAMES, "x": x})

    fn.source = text
    return fn


def parse_config(path) -> RunConfig:
    """Read a flat dotted-key config file into a validated RunConfig."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError([f"config file not found: {path}"])
    kwargs: dict = {}
    eos_kwargs: dict = {}
    problems: list = []
    seen: set = set()
    for line_no, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"line {line_no}: expected `key = value`, got {raw.strip()!r}")
            continue
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _KEYMAP:
            problems.append(f"line {line_no}: unknown key {key!r}")
            continue
        if key in seen:
            problems.append(f"line {line_no}: duplicate key {key!r}")
            continue
        seen.add(key)
        dest, conv = _KEYMAP[key]
        try:
            if conv == "expr":
                parsed = _parse_expr(value, key, line_no)
            elif conv is str:
                parsed = value
            else:
                parsed = conv(value)
        except ConfigError as exc:
            problems.extend(exc.violations)
            continue
        except (ValueError, SyntaxError) as exc:
            problems.append(f"line {line_no}: key {key}: {exc}")
            continue
        if dest is None:
            eos_kwargs[key.split(".", 1)[1]] = parsed
        else:
            kwargs[dest] = parsed
    if problems:
        raise ConfigError(problems)
    try:
        if eos_kwargs:
            kwargs["eos"] = EosParams(**eos_kwargs)
        return RunConfig(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError, BifluidError) as exc:
        raise ConfigError([str(exc)]) from exc


def _fmt(x) -> str:
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x)}")


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")


def write_trace(traj: Trajectory, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "trace.csv").open("w", newline="") as fh:
        fh.write(f"# trace schema v{TRACE_SCHEMA_VERSION}\n")
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for rec in traj.records:
            row = []
            for col in TRACE_COLUMNS:
                if col == "rel_energy" and col not in rec:
                    row.append("")
                    continue
                value = rec[col]
                if not (isinstance(value, (int, np.integer)) or math.isfinite(float(value))):
                    raise InvariantViolation(
                        f"non-finite value in trace column {col} at t={rec['t']:.6g}"
                    )
                row.append(_fmt(value))
            writer.writerow(row)


def _summary_payload(traj: Trajectory, proxies_k=(2, 4, 8)) -> dict:
    cfg = traj.config
    last = traj.records[-1]
    grid, basis, bc = cfg.grid(), cfg.basis(), cfg.boundary()
    extremes = {"delta_p": 0.0, "delta_h": 0.0, "delta_kinetic": 0.0}
    for snap in traj.snapshots:
        for k in proxies_k:
            if grid.n_cells % k:
                continue
            dp = defect_proxy(snap, k, cfg.eos, basis, grid, bc)
            extremes["delta_p"] = max(extremes["delta_p"], float(np.max(dp.delta_p)))
            extremes["delta_h"] = max(extremes["delta_h"], float(np.max(dp.delta_h)))
            extremes["delta_kinetic"] = max(
                extremes["delta_kinetic"], float(np.max(dp.delta_kinetic))
            )
    payload = {
        "schema": TRACE_SCHEMA_VERSION,
        "final_t": last["t"],
        "final_kinetic": last["kinetic"],
        "final_helmholtz": last["helmholtz"],
        "dissipation_total": last["dissipation_cum"],
        "max_residual_E7": max(abs(r["residual_E7"]) for r in traj.records),
        "max_mass_budget": max(
            max(abs(r["mass_budget_R"]), abs(r["mass_budget_Z"])) for r in traj.records
        ),
        "max_picard_iters": max(r["picard_iters"] for r in traj.records),
        "min_cone_margin_low": min(r["cone_margin_low"] for r in traj.records),
        "min_cone_margin_high": min(r["cone_margin_high"] for r in traj.records),
        "defect_proxy_max": extremes,
        "exit_status": EXIT_OK,
    }
    if "rel_energy" in last:
        series = [RelEnergyRecord(t=r["t"], value=r["rel_energy"]) for r in traj.records]
        c_fit, ok = gronwall_check(series)
        payload["gronwall_c_fit"] = c_fit
        payload["gronwall_ok"] = ok
    return payload


def _cmd_run(args) -> int:
    cfg = parse_config(args.config)
    reference = None
    if args.steady_reference:
        r0, z0, u0 = (cfg.r0, cfg.z0, cfg.u0)
        if any(callable(f) for f in (r0, z0, u0)):
            raise ConfigError(["--steady-reference requires constant initial data"])
        reference = uniform_steady(float(r0), float(z0), float(u0), cfg)
    traj = run(cfg, reference=reference)
    out_dir = Path(args.out or cfg.out_dir)
    write_trace(traj, out_dir)
    _write_json(out_dir / "summary.json", _summary_payload(traj))
    _save_snapshots(traj, out_dir)
    return EXIT_OK


def _save_snapshots(traj: Trajectory, out_dir: Path) -> None:
    np.savez(
        out_dir / "snapshots.npz",
        t=np.array([s.t for s in traj.snapshots]),
        R=np.stack([s.R for s in traj.snapshots]),
        Z=np.stack([s.Z for s in traj.snapshots]),
        v=np.stack([s.v for s in traj.snapshots]),
    )


def _cmd_verify_eos(args) -> int:
    cfg = parse_config(args.config)
    try:
        report = convexity_constants(cfg.eos, sample_n=args.samples, seed=args.seed)
        ok = True
    except CertificationError as exc:
        report = exc.report
        ok = False
    payload = {
        "a_low": report.a_low,
        "a_high": report.a_high,
        "gamma_coercive": report.gamma_coercive,
        "hessian_min_eig": report.hessian_min_eig,
        "samples": report.samples,
        "passed": ok,
    }
    print(json.dumps(payload, indent=2, sort_keys=True, default=_json_default))
    return EXIT_OK if ok else EXIT_NUMERICAL


def _load_snapshots(path: Path):
    data = np.load(path / "snapshots.npz")
    return data["t"], data["R"], data["Z"], data["v"]


def _cmd_compare(args) -> int:
    from .discretization import reconstruct
    from .diagnostics import relative_energy
    from .coupler import SimState

    coarse_dir, fine_dir = Path(args.coarse), Path(args.fine)
    ct, cR, cZ, cv = _load_snapshots(coarse_dir)
    ft, fR, fZ, fv = _load_snapshots(fine_dir)
    cfg = parse_config(args.config)
    grid, basis, bc = cfg.grid(), cfg.basis(), cfg.boundary()
    if cR.shape[1] != grid.n_cells:
        raise ConfigError(
            [f"coarse snapshots have {cR.shape[1]} cells, config says {grid.n_cells}"]
        )
    if fR.shape[1] % cR.shape[1]:
        raise ConfigError(
            [f"fine cell count {fR.shape[1]} is not a multiple of coarse {cR.shape[1]}"]
        )
    refine = fR.shape[1] // cR.shape[1]
    from .discretization import Grid1D, build_basis
    from .transport import make_boundary_data

    fine_grid = Grid1D(fR.shape[1])
    fine_basis = build_basis(fv.shape[1], fine_grid)
    fine_bc = make_boundary_data(cfg.u_b, cfg.r_b, cfg.z_b, fine_grid, cfg.eos)

    series = []
    proxies = {}
    for i, t in enumerate(ct):
        j = int(np.argmin(np.abs(ft - t)))
        u_fine = reconstruct(fv[j], fine_basis) + fine_bc.u_nodes
        ref = (restrict(fR[j], refine), restrict(fZ[j], refine), restrict(u_fine, refine))
        snap = SimState(t=float(t), R=cR[i], Z=cZ[i], v=cv[i])
        series.append(RelEnergyRecord(t=float(t), value=relative_energy(snap, ref, cfg.eos, basis, grid, bc)))
        for k in (2, 4, 8):
            if grid.n_cells % k:
                continue
            dp = defect_proxy(snap, k, cfg.eos, basis, grid, bc)
            cur = proxies.setdefault(str(k), {"delta_p": 0.0, "delta_h": 0.0, "delta_kinetic": 0.0})
            cur["delta_p"] = max(cur["delta_p"], float(np.max(dp.delta_p)))
            cur["delta_h"] = max(cur["delta_h"], float(np.max(dp.delta_h)))
            cur["delta_kinetic"] = max(cur["delta_kinetic"], float(np.max(dp.delta_kinetic)))
    c_fit, ok = gronwall_check(series)
    payload = {
        "rel_energy": [{"t": rec.t, "value": rec.value} for rec in series],
        "gronwall_c_fit": c_fit,
        "gronwall_ok": ok,
        "defect_proxy_max": proxies,
        "refine": refine,
    }
    out = coarse_dir / "compare.json"
    _write_json(out, payload)
    print(f"wrote {out}")
    return EXIT_OK if ok else EXIT_NUMERICAL


def _sweep_one(base_path: str, key: str, value: str, out_dir: str) -> int:
    cfg = parse_config(base_path)
    dest, conv = _KEYMAP[key]
    parsed = _parse_expr(value, key, 0) if conv == "expr" else (value if conv is str else conv(value))
    if dest is None:
        eos = dataclasses.replace(cfg.eos, **{key.split(".", 1)[1]: parsed})
        cfg = dataclasses.replace(cfg, eos=eos)
    else:
        cfg = dataclasses.replace(cfg, **{dest: parsed})
    cfg = dataclasses.replace(cfg, out_dir=out_dir)
    traj = run(cfg)
    write_trace(traj, Path(out_dir))
    _write_json(Path(out_dir) / "summary.json", _summary_payload(traj))
    _save_snapshots(traj, Path(out_dir))
    return EXIT_OK


def _cmd_sweep(args) -> int:
    key, _, values = args.vary.partition("=")
    key = key.strip()
    if not values:
        raise ConfigError(["--vary expects key=v1,v2,..."])
    if key not in _KEYMAP:
        raise ConfigError([f"unknown sweep key {key!r}"])
    cfg = parse_config(args.config)  # validate the base config up front
    base_out = Path(args.out or cfg.out_dir)
    jobs = []
    with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
        for value in values.split(","):
            sub = base_out / f"{key.replace('.', '_')}={value.strip()}"
            jobs.append(
                pool.submit(_sweep_one, str(args.config), key, value.strip(), str(sub))
            )
        codes = [job.result() for job in jobs]
    return max(codes)


def _error_payload(exc: BaseException, code: int) -> dict:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, ConfigError):
        payload["violations"] = exc.violations
    if isinstance(exc, NonConvergenceError):
        payload["residuals"] = list(exc.residuals)
    return payload


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bifluidlab",
        description="1D bi-fluid flow laboratory: runs, certification, comparisons.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a simulation from a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None, help="override output.dir")
    p_run.add_argument(
        "--steady-reference",
        action="store_true",
        help="attach the constant initial state as the relative-energy reference",
    )
    p_run.set_defaults(fn=_cmd_run)

    p_verify = sub.add_parser("verify", help="certification checks")
    verify_sub = p_verify.add_subparsers(dest="target", required=True)
    p_eos = verify_sub.add_parser("eos", help="certify pressure-law convexity constants")
    p_eos.add_argument("--config", required=True)
    p_eos.add_argument("--samples", type=int, default=4096)
    p_eos.add_argument("--seed", type=int, default=0)
    p_eos.set_defaults(fn=_cmd_verify_eos)

    p_cmp = sub.add_parser("compare", help="relative energy of a coarse run against a fine one")
    p_cmp.add_argument("--coarse", required=True)
    p_cmp.add_argument("--fine", required=True)
    p_cmp.add_argument("--config", required=True, help="config matching the coarse run")
    p_cmp.set_defaults(fn=_cmd_compare)

    p_sweep = sub.add_parser("sweep", help="independent runs over values of one key")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--vary", required=True, help="key=v1,v2,...")
    p_sweep.add_argument("--out", default=None)
    p_sweep.add_argument("--jobs", type=int, default=None)
    p_sweep.set_defaults(fn=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(json.dumps(_error_payload(exc, EXIT_CONFIG)), file=sys.stderr)
        return EXIT_CONFIG
    except (NonConvergenceError, SolverError, CertificationError) as exc:
        print(json.dumps(_error_payload(exc, EXIT_NUMERICAL)), file=sys.stderr)
        return EXIT_NUMERICAL
    except InvariantViolation as exc:
        print(json.dumps(_error_payload(exc, EXIT_INVARIANT)), file=sys.stderr)
        return EXIT_INVARIANT
    except BifluidError as exc:
        print(json.dumps(_error_payload(exc, EXIT_NUMERICAL)), file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
