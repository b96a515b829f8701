"""Time integration by splitting: finite-volume transport, then implicit relaxation.

Each step advances the homogeneous system with the relaxation Riemann fluxes
under a half-cell CFL restriction, then relaxes the conformations toward
equilibrium with an unconditionally stable implicit solve at frozen depth and
velocity.  Every step is audited: cells must stay admissible, and the
discrete free-energy balance

    F(q^{n+1}) - F(q^n) + dt/dx (G_{i+1/2} - G_{i-1/2}) <= dt D(q^{n+1})

is checked cell by cell (a tolerance covers roundoff).  Violations are
recorded in the step diagnostics; in strict mode they abort the run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import (
    Conserved,
    PhysParams,
    dissipation_rate,
    free_energy,
    is_admissible,
    require_admissible,
)
from .riemann import (
    SpeedPair,
    energy_flux,
    interface_fluxes,
    relaxation_speeds,
    star_states,
    subcharacteristic_monitor,
)

__all__ = [
    "Grid",
    "SimState",
    "StepControl",
    "StepDiagnostics",
    "TimeStepCollapse",
    "AdmissibilityLoss",
    "SourceSolveFailure",
    "DissipationViolation",
    "apply_boundary",
    "cfl_dt",
    "homogeneous_step",
    "relax_conformations",
    "source_step",
    "full_step",
    "dissipation_residuals",
]

BOUNDARY_KINDS = ("transmissive", "reflective", "periodic")

# Audit tolerance scale for the free-energy balance.
DISSIPATION_RTOL = 1e-10


class TimeStepCollapse(RuntimeError):
    """CFL time step fell below the collapse threshold."""


class AdmissibilityLoss(RuntimeError):
    """A cell left the admissible region during the transport update."""


class SourceSolveFailure(RuntimeError):
    """The implicit relaxation solve failed to converge or broke a postcondition."""


class DissipationViolation(RuntimeError):
    """Free-energy balance violated beyond tolerance (strict mode only)."""


@dataclass
class Grid:
    """1D finite-volume grid defined by its cell edges (monotone, len n+1)."""

    edges: np.ndarray

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=float)
        if self.edges.ndim != 1 or self.edges.size < 2 or np.any(np.diff(self.edges) <= 0):
            raise ValueError("grid edges must be a strictly increasing 1D array")

    @classmethod
    def uniform(cls, x_min: float, x_max: float, cells: int) -> "Grid":
        return cls(np.linspace(x_min, x_max, cells + 1))

    @property
    def n(self) -> int:
        return self.edges.size - 1

    @property
    def dx(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])


@dataclass
class SimState:
    """Solution snapshot: time, conserved fields over the grid, step counter."""

    t: float
    q: Conserved
    step_index: int = 0


@dataclass
class StepControl:
    """Knobs of a single step; defaults reproduce the plain audited scheme."""

    cfl: float = 0.5
    bc: str = "transmissive"
    dt_min_factor: float = 1e-12   # collapse threshold = factor * min dx
    f0: str = "exact"
    strict_dissipation: bool = False
    strict_subchar: bool = False
    max_dt: float | None = None    # cap used to land exactly on output times

    def __post_init__(self):
        if not 0.0 < self.cfl <= 0.5:
            raise ValueError(f"cfl must lie in (0, 1/2], got {self.cfl}")
        if self.bc not in BOUNDARY_KINDS:
            raise ValueError(f"bc must be one of {BOUNDARY_KINDS}, got {self.bc!r}")


@dataclass
class StepDiagnostics:
    dt: float
    mass: float
    momentum: float
    free_energy: float
    max_dissipation_residual: float
    dissipation_violations: int
    worst_subchar_ratio: float
    boundary_mass_flux: tuple = field(default=(0.0, 0.0))
    boundary_momentum_flux: tuple = field(default=(0.0, 0.0))


def apply_boundary(q: Conserved, bc: str) -> Conserved:
    """Pad the cell array with one ghost cell per side."""
    a = q.as_array()
    if bc == "transmissive":
        left, right = a[:, :1].copy(), a[:, -1:].copy()
    elif bc == "reflective":
        left, right = a[:, :1].copy(), a[:, -1:].copy()
        left[1] = -left[1]
        right[1] = -right[1]
    elif bc == "periodic":
        left, right = a[:, -1:].copy(), a[:, :1].copy()
    else:
        raise ValueError(f"bc must be one of {BOUNDARY_KINDS}, got {bc!r}")
    return Conserved.from_array(np.concatenate([left, a, right], axis=1))


def cfl_dt(grid: Grid, fan, cfl: float, dt_min_factor: float = 1e-12) -> float:
    """Half-cell-crossing time step from the extreme fan speeds.

    dt = cfl * min dx / S_max with S_max the largest |outer wave speed| over
    all interfaces.  Raises TimeStepCollapse below dt_min_factor * min dx.
    """
    s_max = float(np.max(np.maximum(np.abs(fan.s1), np.abs(fan.s3))))
    min_dx = float(np.min(grid.dx))
    dt = cfl * min_dx / s_max if s_max > 0 else np.inf
    if dt < dt_min_factor * min_dx:
        raise TimeStepCollapse(
            f"dt={dt!r} under collapse threshold {dt_min_factor * min_dx!r} (S_max={s_max!r})"
        )
    return dt


def _interface_data(qpad: Conserved, params: PhysParams, control: StepControl):
    """Fan and flux pair for every interface of the padded array."""
    a = qpad.as_array()
    q_l = Conserved.from_array(a[:, :-1])
    q_r = Conserved.from_array(a[:, 1:])
    sp = relaxation_speeds(q_l, q_r, params)
    fan = star_states(q_l, q_r, sp, params)
    if control.strict_subchar:
        for _ in range(3):
            bad = subcharacteristic_monitor(fan, params) > 1.0
            if not np.any(bad):
                break
            sp = SpeedPair(
                np.where(bad, 2.0 * sp.c_l, sp.c_l), np.where(bad, 2.0 * sp.c_r, sp.c_r)
            )
            fan = star_states(q_l, q_r, sp, params)
    pair, fan = interface_fluxes(q_l, q_r, params, f0=control.f0, fan=fan)
    return pair, fan


def _fv_update(q: Conserved, grid: Grid, pair, dt: float) -> Conserved:
    """Three-point update: cell i sees f_left of its right interface and
    f_right of its left interface."""
    a = q.as_array()
    out = a - (dt / grid.dx) * (pair.f_left[:, 1:] - pair.f_right[:, :-1])
    return Conserved.from_array(out)


def homogeneous_step(
    state: SimState, grid: Grid, params: PhysParams, dt: float, control: StepControl | None = None
) -> SimState:
    """Transport-only update over dt (no relaxation source)."""
    control = control or StepControl()
    qpad = apply_boundary(state.q, control.bc)
    pair, _ = _interface_data(qpad, params, control)
    q_half = _fv_update(state.q, grid, pair, dt)
    _check_cells(q_half, params)
    return SimState(state.t + dt, q_half, state.step_index + 1)


def _check_cells(q: Conserved, params: PhysParams):
    ok = is_admissible(q.primitive(), params)
    if not np.all(ok):
        bad = np.flatnonzero(~np.atleast_1d(ok))
        i = int(bad[0])
        h = np.atleast_1d(q.h)[i]
        raise AdmissibilityLoss(
            f"cell {i} left the admissible region after transport "
            f"(h={h!r}, {bad.size} offending cells)"
        )


def relax_conformations(sxx0, szz0, dt: float, params: PhysParams):
    """Implicit relaxation of the conformations at fixed depth and velocity.

    The trace s = sxx + szz satisfies the scalar monotone equation

        lam (s - s0)/dt - 2 + s / (1 - s/ell) = 0,

    which has exactly one root in (0, ell); it is found by Newton iterations
    safeguarded with bisection.  Both components then follow in closed form:

        sxx = (sxx0 + dt/lam) / (1 + (dt/lam)/(1 - s/ell)),

    and likewise for szz.  Unconditionally stable: any dt >= 0 keeps the
    result admissible.
    """
    if dt == 0.0:
        return sxx0, szz0
    ell = params.ell
    r = dt / params.lam
    sxx0 = np.asarray(sxx0, dtype=float)
    szz0 = np.asarray(szz0, dtype=float)
    s0 = sxx0 + szz0
    tol = 1e-13 * (2.0 + ell / r)

    def g_of(s):
        return (s - s0) / r - 2.0 + s / (1.0 - s / ell)

    s = s0.copy()
    lo = np.zeros_like(s)
    hi = np.full_like(s, ell)
    g = g_of(s)
    active = np.abs(g) > tol
    for _ in range(100):
        if not np.any(active):
            break
        hi = np.where(active & (g > 0), s, hi)
        lo = np.where(active & (g <= 0), s, lo)
        gp = 1.0 / r + 1.0 / (1.0 - s / ell) ** 2
        s_new = s - g / gp
        outside = (s_new <= lo) | (s_new >= hi)
        s_new = np.where(outside, 0.5 * (lo + hi), s_new)
        s = np.where(active, s_new, s)
        g = np.where(active, g_of(s), g)
        active = np.abs(g) > tol
    if np.any(active):
        raise SourceSolveFailure(
            f"trace equation not converged after 100 iterations "
            f"(worst |g|={float(np.max(np.abs(g[active])))!r}, tol={tol!r})"
        )

    Q = 1.0 - s / ell
    denom = 1.0 + r / Q
    sxx = (sxx0 + r) / denom
    szz = (szz0 + r) / denom
    drift = np.abs((sxx + szz) - s)
    if not np.all(drift <= 1e-10 * ell):
        raise SourceSolveFailure(
            f"component recovery inconsistent with the trace root "
            f"(max drift {float(np.max(drift))!r} vs {1e-10 * ell!r})"
        )
    return sxx, szz


def source_step(q: Conserved, dt: float, params: PhysParams) -> Conserved:
    """Apply the implicit relaxation source; depth and momentum untouched.

    Postconditions (checked): the result is admissible and the free energy
    does not increase beyond a roundoff allowance.
    """
    p = q.primitive()
    sxx, szz = relax_conformations(p.sxx, p.szz, dt, params)
    out = Conserved(q.h, q.hu, q.h * sxx, q.h * szz)
    p_new = out.primitive()
    ok = is_admissible(p_new, params)
    if not np.all(ok):
        i = int(np.flatnonzero(~np.atleast_1d(ok))[0])
        raise SourceSolveFailure(f"relaxed state inadmissible at cell {i}")
    f_before = free_energy(p, params)
    f_after = free_energy(p_new, params)
    allowance = 1e-12 * (1.0 + np.abs(f_before))
    if not np.all(f_after <= f_before + allowance):
        worst = float(np.max(f_after - f_before))
        raise SourceSolveFailure(f"free energy increased by {worst!r} during relaxation")
    return out


def dissipation_residuals(f_old, f_new, g_flux, d_new, dt: float, dx):
    """Per-cell residual of the discrete free-energy inequality and its tolerance.

    residual_i = F_i^{n+1} - F_i^n + dt/dx_i (G_{i+1/2} - G_{i-1/2}) - dt D_i^{n+1};
    the inequality holds when residual_i <= tol_i = 1e-10 (|F_i^n| + dt |D_i| + 1).
    """
    res = f_new - f_old + (dt / dx) * (g_flux[1:] - g_flux[:-1]) - dt * d_new
    tol = DISSIPATION_RTOL * (np.abs(f_old) + dt * np.abs(d_new) + 1.0)
    return res, tol


def full_step(state: SimState, grid: Grid, params: PhysParams, control: StepControl | None = None):
    """One audited step of the splitting scheme.

    Returns (new_state, StepDiagnostics).  The time step is the CFL one,
    possibly shortened by control.max_dt to land on an output time (never
    below half the CFL step unless the cap itself is smaller).
    """
    control = control or StepControl()
    require_admissible(state.q.primitive(), params, "cell state")

    qpad = apply_boundary(state.q, control.bc)
    pair, fan = _interface_data(qpad, params, control)

    dt = cfl_dt(grid, fan, control.cfl, control.dt_min_factor)
    if control.max_dt is not None and np.isfinite(control.max_dt):
        if dt >= control.max_dt:
            dt = control.max_dt
        elif dt >= 0.5 * control.max_dt:
            dt = 0.5 * control.max_dt
    elif not np.isfinite(dt):
        raise TimeStepCollapse("CFL produced a non-finite dt and no cap was given")

    q_half = _fv_update(state.q, grid, pair, dt)
    _check_cells(q_half, params)
    q_new = source_step(q_half, dt, params)

    p_old = state.q.primitive()
    p_new = q_new.primitive()
    f_old = free_energy(p_old, params)
    f_new = free_energy(p_new, params)
    d_new = dissipation_rate(p_new, params)
    g_flux = energy_flux(None, None, fan)
    res, tol = dissipation_residuals(f_old, f_new, g_flux, d_new, dt, grid.dx)
    violations = int(np.sum(res > tol))
    if violations and control.strict_dissipation:
        i = int(np.argmax(res - tol))
        raise DissipationViolation(
            f"free-energy balance violated at cell {i} "
            f"(residual {float(res[i])!r} > tol {float(tol[i])!r}, {violations} cells)"
        )

    dx = grid.dx
    diag = StepDiagnostics(
        dt=float(dt),
        mass=float(np.sum(q_new.h * dx)),
        momentum=float(np.sum(q_new.hu * dx)),
        free_energy=float(np.sum(f_new * dx)),
        max_dissipation_residual=float(np.max(res)),
        dissipation_violations=violations,
        worst_subchar_ratio=float(np.max(subcharacteristic_monitor(fan, params))),
        boundary_mass_flux=(float(pair.f_left[0, 0]), float(pair.f_left[0, -1])),
        boundary_momentum_flux=(float(pair.f_left[1, 0]), float(pair.f_left[1, -1])),
    )
    new_state = SimState(state.t + dt, q_new, state.step_index + 1)
    return new_state, diag
