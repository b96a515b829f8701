"""Scenario configuration, the run driver, and on-disk artifacts.

A run is described by a flat `RunConfig` (physics, domain, initial data,
output policy).  `run` integrates to the final time with exact snapshot
landing and writes, per run: one CSV per snapshot, a per-step diagnostics
CSV, a machine-readable run.json, and a dependency-free SVG summary plot.
All file content is deterministic for a given configuration.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import (
    Conserved,
    PhysParams,
    Primitive,
    equilibrium_sigma,
    free_energy,
    is_admissible,
    normal_stress,
)
from .oracles import exact_sw_dam_break
from .timeloop import (
    BOUNDARY_KINDS,
    Grid,
    SimState,
    StepControl,
    full_step,
)

__all__ = [
    "ConfigError",
    "RunConfig",
    "RunResult",
    "ConvergenceResult",
    "preset_dam_break",
    "preset_uniform",
    "preset_smooth_wave",
    "initial_condition",
    "run",
    "convergence_study",
    "write_snapshot_csv",
    "write_svg_summary",
    "SNAPSHOT_COLUMNS",
]

SNAPSHOT_COLUMNS = ("x", "h", "u", "sigma_xx", "sigma_zz", "N", "stretch", "free_energy")

SCENARIOS = ("dam-break", "uniform", "smooth-wave")


class ConfigError(ValueError):
    """A run configuration is malformed or inconsistent."""


@dataclass(frozen=True)
class RunConfig:
    """Complete description of one run.

    `left`/`right` are (h, u, sigma_xx, sigma_zz) quadruples; `uniform` uses
    only `left`, `smooth-wave` ignores both and modulates an equilibrium
    state.  `outdir=None` runs without writing any files.
    """

    params: PhysParams
    x_min: float = 0.0
    x_max: float = 1.0
    cells: int = 256
    t_end: float = 0.1
    cfl: float = 0.5
    bc: str = "transmissive"
    snapshots: int = 10
    scenario: str = "dam-break"
    jump_x: float = 0.5
    left: tuple = (1.0, 0.0, 1.0, 1.0)
    right: tuple = (0.1, 0.0, 1.0, 1.0)
    outdir: str | None = None
    strict_dissipation: bool = False
    strict_subchar: bool = False
    dt_min_factor: float = 1e-12
    seed: int = 0

    def validated(self) -> "RunConfig":
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        if self.bc not in BOUNDARY_KINDS:
            raise ConfigError(f"unknown bc {self.bc!r}; choose from {BOUNDARY_KINDS}")
        if not self.x_max > self.x_min:
            raise ConfigError(f"need x_max > x_min, got [{self.x_min}, {self.x_max}]")
        if self.cells < 1:
            raise ConfigError(f"cells must be >= 1, got {self.cells}")
        if not self.t_end >= 0:
            raise ConfigError(f"t_end must be >= 0, got {self.t_end}")
        if not 0.0 < self.cfl <= 0.5:
            raise ConfigError(f"cfl must lie in (0, 1/2], got {self.cfl}")
        if self.snapshots < 1:
            raise ConfigError(f"snapshots must be >= 1, got {self.snapshots}")
        if self.scenario == "dam-break" and not (self.x_min < self.jump_x < self.x_max):
            raise ConfigError(f"jump_x={self.jump_x} outside the domain interior")
        states = (self.left, self.right) if self.scenario == "dam-break" else (self.left,)
        if self.scenario != "smooth-wave":
            for side, vals in zip(("left", "right"), states):
                if len(vals) != 4:
                    raise ConfigError(f"{side} state needs 4 entries (h u sigma_xx sigma_zz)")
                p = Primitive(*map(float, vals))
                if not np.all(is_admissible(p, self.params)):
                    raise ConfigError(f"{side} state {tuple(vals)} is not admissible")
        return self

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["params"] = dataclasses.asdict(self.params)
        d["left"] = list(map(float, self.left))
        d["right"] = list(map(float, self.right))
        return d


def _params_or_error(**kw) -> PhysParams:
    try:
        return PhysParams(**kw)
    except ValueError as e:
        raise ConfigError(str(e)) from e


def preset_dam_break(ell: float, cells: int = 256, **overrides) -> RunConfig:
    """Viscoelastic dam break on [0, 1]: (1,0,1,1) against (0.1,0,1,1).

    g=10, G=0.1, lambda=0.1, zeta=0, free extensibility parameter ell.
    """
    params = _params_or_error(g=10.0, G=0.1, lam=0.1, zeta=0.0, ell=float(ell))
    cfg = RunConfig(
        params=params,
        cells=cells,
        t_end=0.1,
        scenario="dam-break",
        jump_x=0.5,
        left=(1.0, 0.0, 1.0, 1.0),
        right=(0.1, 0.0, 1.0, 1.0),
    )
    return dataclasses.replace(cfg, **overrides).validated()


def preset_uniform(ell: float = 10.0, **overrides) -> RunConfig:
    """Lake at rest in relaxation equilibrium: stationary for all time."""
    params = _params_or_error(g=10.0, G=0.1, lam=0.1, zeta=0.0, ell=float(ell))
    se = equilibrium_sigma(params)
    cfg = RunConfig(params=params, scenario="uniform", left=(1.0, 0.0, se, se), t_end=0.1)
    return dataclasses.replace(cfg, **overrides).validated()


def preset_smooth_wave(ell: float = 10.0, **overrides) -> RunConfig:
    """Periodic smooth pulse over an equilibrium conformation, for grid studies."""
    params = _params_or_error(g=10.0, G=0.1, lam=0.1, zeta=0.0, ell=float(ell))
    cfg = RunConfig(params=params, scenario="smooth-wave", bc="periodic", t_end=0.05)
    return dataclasses.replace(cfg, **overrides).validated()


def _smooth_primitive(x, config: RunConfig):
    span = config.x_max - config.x_min
    xh = (np.asarray(x) - config.x_min) / span
    se = equilibrium_sigma(config.params)
    h = 1.0 + 0.1 * np.sin(2.0 * np.pi * xh)
    u = 0.1 * np.cos(2.0 * np.pi * xh)
    return Primitive(h, u, np.full_like(h, se), np.full_like(h, se))


# 5-point Gauss-Legendre on [-1, 1]; cell averages of smooth data to ~1e-15
_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(5)


def initial_condition(config: RunConfig, grid: Grid) -> Conserved:
    """Exact cell averages of the initial data, in conserved variables."""
    if config.scenario == "uniform":
        p = Primitive(*map(float, config.left))
        q = p.conserved()
        one = np.ones(grid.n)
        return Conserved(q.h * one, q.hu * one, q.hsxx * one, q.hszz * one)
    if config.scenario == "dam-break":
        ql = Primitive(*map(float, config.left)).conserved().as_array()
        qr = Primitive(*map(float, config.right)).conserved().as_array()
        lo, hi = grid.edges[:-1], grid.edges[1:]
        wl = np.clip((config.jump_x - lo) / grid.dx, 0.0, 1.0)
        return Conserved.from_array(ql[:, None] * wl + qr[:, None] * (1.0 - wl))
    # smooth-wave: conserved averages by Gauss quadrature per cell
    lo = grid.edges[:-1]
    acc = 0.0
    for xg, wg in zip(_GAUSS_X, _GAUSS_W):
        xs = lo + 0.5 * grid.dx * (xg + 1.0)
        acc = acc + 0.5 * wg * _smooth_primitive(xs, config).conserved().as_array()
    return Conserved.from_array(acc)


@dataclass
class RunResult:
    config: RunConfig
    grid: Grid
    initial: Conserved
    state: SimState
    steps: int
    min_dt: float
    dissipation_violations: int
    worst_subchar_ratio: float
    diagnostics: list
    snapshot_files: list
    outdir: Path | None
    wall_time: float

    def final_primitive(self) -> Primitive:
        return self.state.q.primitive()

    def summary(self) -> dict:
        mass0 = float(np.sum(self.initial.h * self.grid.dx))
        mass1 = float(np.sum(self.state.q.h * self.grid.dx))
        return {
            "status": "ok",
            "steps": self.steps,
            "final_time": self.state.t,
            "min_dt": self.min_dt if self.steps else None,
            "dissipation_violations": self.dissipation_violations,
            "worst_subchar_ratio": self.worst_subchar_ratio if self.steps else None,
            "mass_initial": mass0,
            "mass_final": mass1,
            "mass_drift_rel": abs(mass1 - mass0) / abs(mass0),
            "wall_time_s": self.wall_time,
        }


def _snapshot_rows(grid: Grid, q: Conserved, params: PhysParams):
    p = q.primitive()
    cols = (
        grid.centers,
        p.h,
        p.u,
        p.sxx,
        p.szz,
        normal_stress(p, params),
        p.sxx + p.szz,
        free_energy(p, params),
    )
    return np.broadcast_arrays(*cols)


def write_snapshot_csv(path: Path, grid: Grid, q: Conserved, params: PhysParams) -> None:
    cols = _snapshot_rows(grid, q, params)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(SNAPSHOT_COLUMNS) + "\n")
        for i in range(grid.n):
            f.write(",".join(repr(float(c[i])) for c in cols) + "\n")


def _write_diagnostics_csv(path: Path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("n,t,dt,mass,momentum,free_energy,max_dissipation_residual,worst_subchar_ratio\n")
        for r in rows:
            f.write(",".join([str(r[0])] + [repr(float(v)) for v in r[1:]]) + "\n")


def _snapshot_name(t: float, used: set) -> str:
    name = f"snapshot_{t:.6f}.csv"
    if name in used:
        name = f"snapshot_{t!r}.csv"
    used.add(name)
    return name


def run(config: RunConfig) -> RunResult:
    """Integrate the configured scenario and write its artifacts.

    Snapshot times are hit exactly: the step is clipped to the remaining
    interval, or halved when within a factor two of it, so no step ever
    shrinks below half the stable step.
    """
    config = config.validated()
    t0 = time.perf_counter()
    grid = Grid.uniform(config.x_min, config.x_max, config.cells)
    q0 = initial_condition(config, grid)
    state = SimState(t=0.0, q=q0.copy())
    control = StepControl(
        cfl=config.cfl,
        bc=config.bc,
        dt_min_factor=config.dt_min_factor,
        strict_dissipation=config.strict_dissipation,
        strict_subchar=config.strict_subchar,
    )

    outdir = None
    snapshot_files = []
    used_names: set = set()
    if config.outdir is not None:
        outdir = Path(config.outdir)
        outdir.mkdir(parents=True, exist_ok=True)

    def emit(t: float) -> None:
        if outdir is None:
            return
        name = _snapshot_name(t, used_names)
        write_snapshot_csv(outdir / name, grid, state.q, config.params)
        snapshot_files.append(name)

    targets = [k * config.t_end / config.snapshots for k in range(config.snapshots + 1)]
    targets[-1] = config.t_end
    if config.t_end == 0.0:
        targets = [0.0]
    emit(0.0)

    diag_rows = []
    diagnostics = []
    min_dt = np.inf
    violations = 0
    worst_subchar = 0.0
    steps = 0
    for t_next in targets[1:]:
        while state.t < t_next:
            remaining = t_next - state.t
            ctrl = dataclasses.replace(control, max_dt=remaining)
            state, diag = full_step(state, grid, config.params, ctrl)
            if diag.dt == remaining:
                state = dataclasses.replace(state, t=t_next)
            steps += 1
            min_dt = min(min_dt, diag.dt)
            violations += diag.dissipation_violations
            worst_subchar = max(worst_subchar, diag.worst_subchar_ratio)
            diagnostics.append(diag)
            diag_rows.append(
                (
                    steps,
                    state.t,
                    diag.dt,
                    diag.mass,
                    diag.momentum,
                    diag.free_energy,
                    diag.max_dissipation_residual,
                    diag.worst_subchar_ratio,
                )
            )
        emit(t_next)

    wall = time.perf_counter() - t0
    result = RunResult(
        config=config,
        grid=grid,
        initial=q0,
        state=state,
        steps=steps,
        min_dt=float(min_dt) if steps else np.inf,
        dissipation_violations=violations,
        worst_subchar_ratio=worst_subchar,
        diagnostics=diagnostics,
        snapshot_files=snapshot_files,
        outdir=outdir,
        wall_time=wall,
    )

    if outdir is not None:
        _write_diagnostics_csv(outdir / "diagnostics.csv", diag_rows)
        write_svg_summary(outdir / "final.svg", grid, q0, state.q, config.params)
        payload = {
            "config": config.as_dict(),
            "summary": result.summary(),
            "snapshots": snapshot_files,
        }
        with open(outdir / "run.json", "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")
    return result


# ---------------------------------------------------------------------------
# SVG summary plot, written directly (no plotting dependency).

_PANELS = ("h", "u", "sigma_xx", "sigma_zz")


def _panel_svg(ox: float, oy: float, w: float, h: float, title: str, x, y0, y1) -> list:
    lo = min(float(np.min(y0)), float(np.min(y1)))
    hi = max(float(np.max(y0)), float(np.max(y1)))
    pad = 0.05 * (hi - lo)
    if pad <= 1e-12 * max(1.0, abs(hi)):
        pad = max(0.05 * abs(hi), 1e-3)
    lo, hi = lo - pad, hi + pad
    xl, xr = float(x[0]), float(x[-1])

    def sx(v):
        return ox + (v - xl) / (xr - xl) * w

    def sy(v):
        return oy + h - (v - lo) / (hi - lo) * h

    out = [
        f'<rect x="{ox:.1f}" y="{oy:.1f}" width="{w:.1f}" height="{h:.1f}" '
        'fill="#ffffff" stroke="#333333" stroke-width="1"/>',
        f'<text x="{ox + 6:.1f}" y="{oy + 16:.1f}" font-size="13" fill="#111111">{title}</text>',
    ]
    for frac in (0.0, 0.5, 1.0):
        vx = xl + frac * (xr - xl)
        vy = lo + frac * (hi - lo)
        out.append(
            f'<text x="{sx(vx):.1f}" y="{oy + h + 14:.1f}" font-size="10" fill="#555555" '
            f'text-anchor="middle">{vx:.3g}</text>'
        )
        out.append(
            f'<text x="{ox - 4:.1f}" y="{sy(vy) + 3:.1f}" font-size="10" fill="#555555" '
            f'text-anchor="end">{vy:.4g}</text>'
        )
    for ydata, style in (
        (y0, 'fill="none" stroke="#999999" stroke-width="1" stroke-dasharray="4 3"'),
        (y1, 'fill="none" stroke="#1f6feb" stroke-width="1.5"'),
    ):
        pts = " ".join(f"{sx(float(a)):.2f},{sy(float(b)):.2f}" for a, b in zip(x, ydata))
        out.append(f'<polyline points="{pts}" {style}/>')
    return out


def write_svg_summary(path: Path, grid: Grid, q_init: Conserved, q_final: Conserved, params: PhysParams) -> None:
    """2x2 panel plot (h, u, sigma_xx, sigma_zz), final state over initial."""
    p0, p1 = q_init.primitive(), q_final.primitive()
    shape = (grid.n,)
    series = {
        "h": (p0.h, p1.h),
        "u": (p0.u, p1.u),
        "sigma_xx": (p0.sxx, p1.sxx),
        "sigma_zz": (p0.szz, p1.szz),
    }
    series = {k: tuple(np.broadcast_to(v, shape) for v in pair) for k, pair in series.items()}
    for name, (a, b) in series.items():
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise RuntimeError(f"non-finite data in panel {name}; refusing to plot")
    W, H, m = 960, 640, 50
    pw, ph = (W - 3 * m) / 2, (H - 3 * m) / 2
    body = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {W} {H}" '
        f'font-family="monospace">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="#ffffff"/>',
        '<text x="50" y="26" font-size="14" fill="#111111">'
        "final state (solid) vs initial (dashed)</text>",
    ]
    for k, name in enumerate(_PANELS):
        col, row = k % 2, k // 2
        ox = m + col * (pw + m)
        oy = m + row * (ph + m)
        y0, y1 = series[name]
        body.extend(_panel_svg(ox, oy, pw, ph, name, grid.centers, y0, y1))
    body.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(body) + "\n")


# ---------------------------------------------------------------------------
# Grid-refinement study.


@dataclass
class ConvergenceResult:
    levels: list
    errors: list
    orders: list
    reference: str

    def table(self) -> str:
        lines = ["cells    L1(h) error      order"]
        for i, (n, e) in enumerate(zip(self.levels, self.errors)):
            o = f"{self.orders[i - 1]:.3f}" if i > 0 and i - 1 < len(self.orders) else "-"
            lines.append(f"{n:<8d} {e:.6e}   {o}")
        return "\n".join(lines)


def _block_average(h_fine: np.ndarray, n_coarse: int) -> np.ndarray:
    factor = h_fine.size // n_coarse
    return h_fine.reshape(n_coarse, factor).mean(axis=1)


def convergence_study(config: RunConfig, levels, reference: str = "auto") -> ConvergenceResult:
    """L1(h) errors and observed orders across a sequence of grids.

    Each level must divide the next.  reference='exact-sw' compares against
    the exact dam-break solution (valid when G=0 and both sides start at
    rest); 'self' compares each level against the block-averaged finest run;
    'auto' picks 'exact-sw' when valid, else 'self'.
    """
    levels = sorted(int(n) for n in levels)
    if len(levels) < 2:
        raise ConfigError("need at least two grid levels")
    for a, b in zip(levels, levels[1:]):
        if b % a != 0 or b <= a:
            raise ConfigError(f"each level must divide the next; got {a} then {b}")
    if reference == "auto":
        exact_ok = (
            config.scenario == "dam-break"
            and config.params.G == 0.0
            and config.left[1] == 0.0
            and config.right[1] == 0.0
            and config.left[0] > config.right[0]
        )
        reference = "exact-sw" if exact_ok else "self"
    if reference not in ("exact-sw", "self"):
        raise ConfigError(f"unknown reference {reference!r}")

    runs = []
    for n in levels:
        cfg = dataclasses.replace(config, cells=n, outdir=None, snapshots=1)
        runs.append(run(cfg))

    errors = []
    if reference == "exact-sw":
        for res in runs:
            x = res.grid.centers - config.jump_x
            h_ref, _ = exact_sw_dam_break(
                config.left[0], config.right[0], config.params.g, x, config.t_end
            )
            errors.append(float(np.sum(np.abs(res.state.q.h - h_ref) * res.grid.dx)))
        used_levels = levels
    else:
        h_fine = np.asarray(runs[-1].state.q.h)
        for res in runs[:-1]:
            h_ref = _block_average(h_fine, res.grid.n)
            errors.append(float(np.sum(np.abs(res.state.q.h - h_ref) * res.grid.dx)))
        used_levels = levels[:-1]

    orders = [
        float(np.log2(errors[i] / errors[i + 1]) / np.log2(used_levels[i + 1] / used_levels[i]))
        for i in range(len(errors) - 1)
    ]
    return ConvergenceResult(list(used_levels), errors, orders, reference)
