"""Shallow viscoelastic flow model: parameters, states, and closures.

The flow state is (h, u, sxx, szz): water depth, depth-averaged velocity,
and the two diagonal components of the polymer conformation tensor. The
polymer is finitely extensible (FENE-P): the trace sxx + szz must stay
below the extensibility bound ell, which keeps the elastic normal stress

    N = G (szz - sxx) / (1 - (sxx + szz)/ell)

finite. Momentum is driven by the total pressure P = g h^2/2 + h N.

The admissible region is

    U = { h > 0, sxx > 0, szz > 0, sxx + szz < ell }.

On U the free energy

    F = h ( u^2/2 + g h/2
          - G/(2(1-zeta)) * ( ell*log((ell-sxx-szz)/(ell-2)) + log(sxx*szz) ) )

is strictly convex in the conserved variables (h, hu, h sxx, h szz), has its
elastic part minimized at the equilibrium conformation sxx = szz = ell/(ell+2),
and decays under the relaxation source at rate `dissipation_rate` (always <= 0).

All functions below operate elementwise: fields may be Python floats or
numpy arrays of matching shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PhysParams",
    "Primitive",
    "Conserved",
    "AdmissibilityError",
    "NonHyperbolicError",
    "is_admissible",
    "require_admissible",
    "normal_stress",
    "total_pressure",
    "dP_dh_frozen",
    "free_energy",
    "internal_energy",
    "dissipation_rate",
    "equilibrium_sigma",
]


class AdmissibilityError(ValueError):
    """A state left the admissible region {h>0, sxx>0, szz>0, sxx+szz<ell}."""


class NonHyperbolicError(ValueError):
    """The frozen pressure derivative dP/dh came out non-positive."""


@dataclass(frozen=True)
class PhysParams:
    """Physical parameters, all per unit fluid density.

    Attributes:
        g: gravitational acceleration, > 0.
        G: elastic modulus, >= 0 (0 recovers plain shallow water).
        lam: polymer relaxation time, > 0.
        zeta: slip parameter interpolating between the upper-convected
            (zeta=0) and corotational-leaning (zeta=1/2) derivatives.
        ell: FENE extensibility bound on sxx + szz, > 2 so the equilibrium
            conformation ell/(ell+2) * identity is admissible.
    """

    g: float
    G: float
    lam: float
    zeta: float
    ell: float

    def __post_init__(self):
        if not self.g > 0:
            raise ValueError(f"g must be positive, got {self.g}")
        if not self.G >= 0:
            raise ValueError(f"G must be non-negative, got {self.G}")
        if not self.lam > 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if not 0.0 <= self.zeta <= 0.5:
            raise ValueError(f"zeta must lie in [0, 1/2], got {self.zeta}")
        if not self.ell > 2:
            raise ValueError(f"ell must exceed 2, got {self.ell}")


@dataclass
class Primitive:
    """Primitive state (h, u, sxx, szz). Fields are floats or same-shape arrays."""

    h: np.ndarray | float
    u: np.ndarray | float
    sxx: np.ndarray | float
    szz: np.ndarray | float

    def conserved(self) -> "Conserved":
        return Conserved(self.h, self.h * self.u, self.h * self.sxx, self.h * self.szz)


@dataclass
class Conserved:
    """Conserved state (h, hu, h sxx, h szz); bijective with Primitive for h > 0."""

    h: np.ndarray | float
    hu: np.ndarray | float
    hsxx: np.ndarray | float
    hszz: np.ndarray | float

    def primitive(self) -> Primitive:
        return Primitive(self.h, self.hu / self.h, self.hsxx / self.h, self.hszz / self.h)

    def as_array(self) -> np.ndarray:
        """Stack components into shape (4, ...) for vectorized updates."""
        return np.stack(np.broadcast_arrays(self.h, self.hu, self.hsxx, self.hszz))

    @classmethod
    def from_array(cls, a: np.ndarray) -> "Conserved":
        return cls(a[0], a[1], a[2], a[3])

    def copy(self) -> "Conserved":
        return Conserved.from_array(self.as_array().copy())


def is_admissible(p: Primitive, params: PhysParams):
    """Elementwise test for membership in U (strict inequalities)."""
    return (p.h > 0) & (p.sxx > 0) & (p.szz > 0) & (p.sxx + p.szz < params.ell)


def require_admissible(p: Primitive, params: PhysParams, context: str = "state"):
    ok = is_admissible(p, params)
    if not np.all(ok):
        bad = np.argwhere(~np.atleast_1d(ok))
        i = tuple(bad[0])
        h, sxx, szz = np.atleast_1d(p.h), np.atleast_1d(p.sxx), np.atleast_1d(p.szz)
        raise AdmissibilityError(
            f"{context} outside admissible region at index {i}: "
            f"h={h[i]!r}, sxx={sxx[i]!r}, szz={szz[i]!r}, ell={params.ell!r} "
            f"({bad.shape[0]} offending entries)"
        )


def _trace_gap(p: Primitive, params: PhysParams):
    """1 - (sxx+szz)/ell, the FENE denominator; must be positive."""
    gap = 1.0 - (p.sxx + p.szz) / params.ell
    if not np.all(gap > 0):
        raise AdmissibilityError(
            f"conformation trace reached the extensibility bound ell={params.ell!r}"
        )
    return gap


def normal_stress(p: Primitive, params: PhysParams):
    """Elastic normal-stress difference N = G (szz - sxx) / (1 - (sxx+szz)/ell)."""
    return params.G * (p.szz - p.sxx) / _trace_gap(p, params)


def total_pressure(p: Primitive, params: PhysParams):
    """Total depth-integrated pressure P = g h^2/2 + h N."""
    return params.g * p.h**2 / 2.0 + p.h * normal_stress(p, params)


def dP_dh_frozen(p: Primitive, params: PhysParams):
    """Derivative of P along compressions that transport the conformation.

    Holding w1 = sxx * h^(2(1-zeta)) and w2 = szz * h^(2(zeta-1)) fixed (the
    combinations advected by the homogeneous dynamics), the conformation
    responds to depth changes and

        dP/dh = g h + N + 2(1-zeta) G (s Q + (szz-sxx)^2/ell) / Q^2

    with s = sxx + szz and Q = 1 - s/ell.  The square of the Lagrangian
    sound speed is h^2 dP/dh; positivity is required for hyperbolicity.
    """
    Q = _trace_gap(p, params)
    s = p.sxx + p.szz
    N = params.G * (p.szz - p.sxx) / Q
    out = (
        params.g * p.h
        + N
        + 2.0 * (1.0 - params.zeta) * params.G * (s * Q + (p.szz - p.sxx) ** 2 / params.ell) / Q**2
    )
    if not np.all(out > 0):
        raise NonHyperbolicError(
            f"dP/dh non-positive (min {np.min(out)!r}); state left the hyperbolic region"
        )
    return out


def _elastic_energy(p: Primitive, params: PhysParams):
    """Elastic free energy per unit depth (with its barrier at the bounds)."""
    s = p.sxx + p.szz
    return (
        params.G
        / (2.0 * (1.0 - params.zeta))
        * (params.ell * np.log((params.ell - s) / (params.ell - 2.0)) + np.log(p.sxx * p.szz))
    )


def free_energy(p: Primitive, params: PhysParams):
    """Free energy F = h (u^2/2 + g h/2 - elastic); convex in the conserved state."""
    require_admissible(p, params, "free_energy argument")
    return p.h * (p.u**2 / 2.0 + params.g * p.h / 2.0 - _elastic_energy(p, params))


def internal_energy(p: Primitive, params: PhysParams):
    """Internal (non-kinetic) part of F per unit depth: F/h - u^2/2."""
    require_admissible(p, params, "internal_energy argument")
    return params.g * p.h / 2.0 - _elastic_energy(p, params)


def dissipation_rate(p: Primitive, params: PhysParams):
    """Rate of free-energy decay under the relaxation source; always <= 0.

    D = -G h / (2 (1-zeta) lam) * [ (1 - sxx/Q)^2/sxx + (1 - szz/Q)^2/szz ]
    with Q = 1 - (sxx+szz)/ell.  Vanishes exactly at equilibrium.
    """
    require_admissible(p, params, "dissipation_rate argument")
    Q = 1.0 - (p.sxx + p.szz) / params.ell
    return (
        -params.G
        * p.h
        / (2.0 * (1.0 - params.zeta) * params.lam)
        * ((1.0 - p.sxx / Q) ** 2 / p.sxx + (1.0 - p.szz / Q) ** 2 / p.szz)
    )


def equilibrium_sigma(params: PhysParams) -> float:
    """Equilibrium conformation: sxx = szz = ell/(ell+2) zeroes the source."""
    return params.ell / (params.ell + 2.0)
