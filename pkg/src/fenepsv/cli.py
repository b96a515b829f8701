"""Command-line interface.

Subcommands:
  solve     run one scenario and write snapshots, diagnostics, run.json, final.svg
  converge  grid-refinement study of a scenario
  check     run the self-verification oracle battery

Configuration comes from a flat `key = value` file (`#` starts a comment);
command-line flags override file values.  Exit codes: 0 success, 2 bad
configuration, 3 solver failure, 4 free-energy dissipation violation when
--strict-dissipation is active.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .model import AdmissibilityError, NonHyperbolicError, PhysParams
from .oracles import DEFAULT_SEED, run_all_checks
from .riemann import StarStateError
from .scenarios import ConfigError, RunConfig, convergence_study, run
from .timeloop import (
    AdmissibilityLoss,
    DissipationViolation,
    SourceSolveFailure,
    TimeStepCollapse,
)

__all__ = ["main", "parse_config_file", "build_config"]

_FLOAT_KEYS = {
    "g", "G", "lambda", "zeta", "ell",
    "x_min", "x_max", "t_end", "cfl", "jump_x", "dt_min_factor",
    "left_h", "left_u", "left_sxx", "left_szz",
    "right_h", "right_u", "right_sxx", "right_szz",
}
_INT_KEYS = {"cells", "snapshots", "seed"}
_BOOL_KEYS = {"strict_dissipation", "strict_subchar"}
_STR_KEYS = {"scenario", "bc", "outdir"}
_ALL_KEYS = _FLOAT_KEYS | _INT_KEYS | _BOOL_KEYS | _STR_KEYS

_DEFAULTS = {
    "scenario": "dam-break",
    "g": 10.0, "G": 0.1, "lambda": 0.1, "zeta": 0.0, "ell": 10.0,
    "x_min": 0.0, "x_max": 1.0, "cells": 256, "t_end": 0.1,
    "cfl": 0.5, "bc": "transmissive", "snapshots": 10, "jump_x": 0.5,
    "left_h": 1.0, "left_u": 0.0, "left_sxx": 1.0, "left_szz": 1.0,
    "right_h": 0.1, "right_u": 0.0, "right_sxx": 1.0, "right_szz": 1.0,
    "outdir": None, "strict_dissipation": False, "strict_subchar": False,
    "dt_min_factor": 1e-12, "seed": 0,
}


def _parse_value(key: str, raw: str, where: str):
    try:
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _INT_KEYS:
            return int(raw)
        if key in _BOOL_KEYS:
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        return raw
    except ValueError as e:
        raise ConfigError(f"{where}: bad value for {key!r}: {e}") from e


def parse_config_file(path: str | Path) -> dict:
    """Read a flat `key = value` file; `#` comments, blank lines ignored."""
    values: dict = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        where = f"{path}:{lineno}"
        if "=" not in stripped:
            raise ConfigError(f"{where}: expected 'key = value', got {line.rstrip()!r}")
        key, _, raw = stripped.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in _ALL_KEYS:
            raise ConfigError(f"{where}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{where}: duplicate key {key!r}")
        if not raw:
            raise ConfigError(f"{where}: empty value for {key!r}")
        values[key] = _parse_value(key, raw, where)
    return values


def build_config(file_values: dict, overrides: dict) -> RunConfig:
    """Merge defaults <- config file <- CLI flags into a validated RunConfig."""
    merged = dict(_DEFAULTS)
    merged.update(file_values)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    try:
        params = PhysParams(
            g=merged["g"], G=merged["G"], lam=merged["lambda"],
            zeta=merged["zeta"], ell=merged["ell"],
        )
    except ValueError as e:
        raise ConfigError(str(e)) from e
    cfg = RunConfig(
        params=params,
        x_min=merged["x_min"],
        x_max=merged["x_max"],
        cells=merged["cells"],
        t_end=merged["t_end"],
        cfl=merged["cfl"],
        bc=merged["bc"],
        snapshots=merged["snapshots"],
        scenario=merged["scenario"],
        jump_x=merged["jump_x"],
        left=(merged["left_h"], merged["left_u"], merged["left_sxx"], merged["left_szz"]),
        right=(merged["right_h"], merged["right_u"], merged["right_sxx"], merged["right_szz"]),
        outdir=merged["outdir"],
        strict_dissipation=merged["strict_dissipation"],
        strict_subchar=merged["strict_subchar"],
        dt_min_factor=merged["dt_min_factor"],
        seed=merged["seed"],
    )
    return cfg.validated()


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fenepsv",
        description="Finite-volume solver for shallow viscoelastic flows",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="run one scenario and write its artifacts")
    solve.add_argument("--config", required=True, help="flat key = value configuration file")
    solve.add_argument("--scenario", choices=("dam-break", "uniform", "smooth-wave"))
    solve.add_argument("--ell", type=float, help="extensibility parameter")
    solve.add_argument("--cells", type=int)
    solve.add_argument("--t-end", type=float, dest="t_end")
    solve.add_argument("--cfl", type=float)
    solve.add_argument("--bc", choices=("transmissive", "reflective", "periodic"))
    solve.add_argument("--out", dest="outdir", help="output directory (default: out)")
    solve.add_argument(
        "--strict-dissipation",
        action="store_true",
        default=None,
        help="abort with exit code 4 on any free-energy dissipation violation",
    )
    solve.add_argument("--seed", type=int)

    conv = sub.add_parser("converge", help="grid-refinement study")
    conv.add_argument("--config", required=True)
    conv.add_argument(
        "--levels", required=True, help="comma-separated cell counts, e.g. 64,128,256,512"
    )
    conv.add_argument("--reference", choices=("auto", "exact-sw", "self"), default="auto")

    chk = sub.add_parser("check", help="run the oracle/property battery")
    chk.add_argument("--seed", type=int, default=DEFAULT_SEED)
    chk.add_argument("--samples", type=int, default=2000)
    chk.add_argument("--json", action="store_true", help="emit reports as JSON")
    return ap


_SOLVER_ERRORS = (
    AdmissibilityError,
    NonHyperbolicError,
    StarStateError,
    TimeStepCollapse,
    AdmissibilityLoss,
    SourceSolveFailure,
)


def _write_error_record(outdir: str | None, cfg: RunConfig | None, exc: Exception) -> None:
    if outdir is None:
        return
    try:
        path = Path(outdir)
        path.mkdir(parents=True, exist_ok=True)
        payload = {
            "status": "error",
            "error": f"{type(exc).__name__}: {exc}",
            "config": cfg.as_dict() if cfg is not None else None,
        }
        with open(path / "run.json", "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")
    except OSError:
        pass


def _cmd_solve(args) -> int:
    overrides = {
        "scenario": args.scenario,
        "ell": args.ell,
        "cells": args.cells,
        "t_end": args.t_end,
        "cfl": args.cfl,
        "bc": args.bc,
        "outdir": args.outdir,
        "strict_dissipation": args.strict_dissipation,
        "seed": args.seed,
    }
    cfg = build_config(parse_config_file(args.config), overrides)
    if cfg.outdir is None:
        cfg = dataclasses.replace(cfg, outdir="out")
    try:
        result = run(cfg)
    except DissipationViolation as e:
        _write_error_record(cfg.outdir, cfg, e)
        print(f"dissipation violation: {e}", file=sys.stderr)
        return 4
    except _SOLVER_ERRORS as e:
        _write_error_record(cfg.outdir, cfg, e)
        print(f"solver failure: {type(e).__name__}: {e}", file=sys.stderr)
        return 3
    s = result.summary()
    print(
        f"completed {s['steps']} steps to t={s['final_time']:g} "
        f"({result.config.cells} cells, scenario {result.config.scenario})"
    )
    print(
        f"min dt {s['min_dt']:.3e}, dissipation violations {s['dissipation_violations']}, "
        f"worst subcharacteristic ratio {s['worst_subchar_ratio']:.6f}"
        if s["steps"]
        else "no steps taken (t_end = 0)"
    )
    print(f"artifacts in {result.outdir}/ ({len(result.snapshot_files)} snapshots)")
    return 0


def _cmd_converge(args) -> int:
    try:
        levels = [int(tok) for tok in args.levels.split(",") if tok.strip()]
    except ValueError as e:
        raise ConfigError(f"bad --levels: {e}") from e
    cfg = build_config(parse_config_file(args.config), {})
    try:
        result = convergence_study(cfg, levels, reference=args.reference)
    except _SOLVER_ERRORS as e:
        print(f"solver failure: {type(e).__name__}: {e}", file=sys.stderr)
        return 3
    print(f"reference: {result.reference}")
    print(result.table())
    return 0


def _cmd_check(args) -> int:
    reports = run_all_checks(seed=args.seed, samples=args.samples)
    if args.json:
        print(json.dumps([dataclasses.asdict(r) for r in reports], indent=2))
    else:
        for r in reports:
            print(r.line())
    if all(r.passed for r in reports):
        if not args.json:
            print("all checks passed")
        return 0
    print("CHECK FAILURES PRESENT", file=sys.stderr)
    return 3


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "converge":
            return _cmd_converge(args)
        return _cmd_check(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
