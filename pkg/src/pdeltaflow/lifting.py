"""Discrete lifting of divergence and boundary data.

Given scalar divergence data g1 and boundary velocity g2 satisfying the
compatibility condition int g1 = boundary flux of g2, the lift is the
velocity field matching the boundary interpolant of g2 whose gradient is
minimal among all discrete fields with the prescribed weak divergence.
That constrained minimal-gradient (Stokes-type) solve plays the role of
trace lifting plus a bounded right inverse of the divergence, and its
norms are what the coercivity certificate consumes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from . import assembly
from .discretization import (
    Field,
    divergence_values,
    norm_sym_grad_p,
    norm_W1p,
)

__all__ = [
    "BoundaryData",
    "LiftField",
    "LiftingError",
    "check_compatibility",
    "lift",
    "harmonic_extension",
    "operator_norm_probe",
]

COMPAT_TOL = 1e-8


class LiftingError(RuntimeError):
    """Data incompatibility or saddle-solver breakdown during lifting."""


@dataclass
class BoundaryData:
    """Divergence data g1 (callable, P1 field or constant) and boundary
    velocity g2 (callable pair / vector callable, or a full-length velocity
    coefficient array read only at boundary dofs)."""

    g1: object = None
    g2: object = None

    def g1_values(self, space):
        if self.g1 is None:
            return np.zeros_like(space.qw)
        if isinstance(self.g1, Field):
            return self.g1.space.p1_values(self.g1.coeffs)
        if np.isscalar(self.g1):
            return float(self.g1) * np.ones_like(space.qw)
        x, y = space.qpts[..., 0], space.qpts[..., 1]
        return np.asarray(self.g1(x, y), dtype=float) + np.zeros_like(space.qw)

    def g2_dof_values(self, space):
        """Full velocity coefficient array carrying the boundary interpolant."""
        out = np.zeros(space.n_vel)
        if self.g2 is None:
            return out
        if isinstance(self.g2, np.ndarray):
            if self.g2.shape != (space.n_vel,):
                raise ValueError("nodal g2 must be a full-length velocity coefficient array")
            bnd = space.boundary_vel_dofs
            out[bnd] = self.g2[bnd]
            return out
        interp = space.interpolate_velocity(self.g2)
        bnd = space.boundary_vel_dofs
        out[bnd] = interp.coeffs[bnd]
        return out

    def g2_callable(self):
        return None if (self.g2 is None or isinstance(self.g2, np.ndarray)) else self.g2


@dataclass
class LiftField:
    """Lift g with the norms the certifier needs and its defect diagnostics."""

    g: Field
    p: float
    s: float
    norms: dict
    div_defect: float
    div_defect_pointwise: float
    boundary_defect: float
    compat_defect: float

    def to_json(self):
        return {
            "p": self.p,
            "s": self.s,
            "norms": self.norms,
            "div_defect": self.div_defect,
            "div_defect_pointwise": self.div_defect_pointwise,
            "boundary_defect": self.boundary_defect,
            "compat_defect": self.compat_defect,
        }


def check_compatibility(data, space):
    """Signed defect int_Omega g1 dx - boundary flux of the g2 interpolant."""
    vol = space.integrate(data.g1_values(space))
    flux = space.boundary_flux(data.g2_dof_values(space))
    return float(vol - flux)


def _boundary_defect(data, space):
    """L2 boundary distance between the g2 trace interpolant and g2 itself."""
    fun = data.g2_callable()
    if fun is None:
        return 0.0
    coeffs = data.g2_dof_values(space)
    err2 = 0.0
    for seg in space.boundary_quadrature():
        d = list(seg["dofs"])
        vx = seg["basis"] @ coeffs[d]
        vy = seg["basis"] @ coeffs[[k + space.n_p2 for k in d]]
        x, y = seg["pts"][:, 0], seg["pts"][:, 1]
        from .discretization import _as_vec2

        gx, gy = _as_vec2(fun, x, y)
        err2 += np.sum(seg["w"] * ((vx - gx) ** 2 + (vy - gy) ** 2))
    return float(np.sqrt(err2))


def lift(data, space, p, s):
    """Solve the divergence/boundary-data problem on the discrete space.

    Returns the lift with the four norms used downstream (computed by
    quadrature) and the divergence defect in the discrete L2 sense.
    """
    g1_vals = data.g1_values(space)
    defect = check_compatibility(data, space)
    tol = COMPAT_TOL * (1.0 + space.integrate(np.abs(g1_vals)))
    if abs(defect) > tol:
        raise LiftingError(f"incompatible data: defect {defect:.3e} exceeds tolerance {tol:.3e}")

    ghat = data.g2_dof_values(space)
    k = assembly.full_grad_stiffness(space)
    b = assembly.p1_load(space, g1_vals)
    try:
        g_coeffs, _, _ = assembly.solve_saddle(space, k, np.zeros(space.n_vel), b, fixed_vals=ghat)
    except RuntimeError as exc:  # singular coupling
        raise LiftingError(f"saddle-point solve failed (inf-sup {space.inf_sup:.3e}): {exc}") from exc

    g = space.velocity_field(g_coeffs)
    resid = assembly.div_coupling(space) @ g_coeffs - b
    proj = space.p1_mass_solve(resid)
    div_defect = float(np.sqrt(max(proj @ resid, 0.0)))
    div_defect_pointwise = float(
        np.sqrt(space.integrate((divergence_values(space, g_coeffs) - g1_vals) ** 2))
    )

    norms = {
        "W1p": norm_W1p(g, p),
        "W1s": norm_W1p(g, s),
        "Dg_s": norm_sym_grad_p(g, s),
        "Dg_p": norm_sym_grad_p(g, p),
        "div_s": _div_norm(space, g_coeffs, s),
        "div_p": _div_norm(space, g_coeffs, p),
    }
    return LiftField(
        g=g,
        p=p,
        s=s,
        norms=norms,
        div_defect=div_defect,
        div_defect_pointwise=div_defect_pointwise,
        boundary_defect=_boundary_defect(data, space),
        compat_defect=defect,
    )


def _div_norm(space, coeffs, r):
    return space.integrate(np.abs(divergence_values(space, coeffs)) ** r) ** (1.0 / r)


def harmonic_extension(data, space):
    """Discrete minimal-gradient extension of the boundary interpolant.

    Its W^{1,p} norm stands in for the fractional boundary-trace norm in
    the probe statistics.
    """
    ghat = data.g2_dof_values(space)
    k = assembly.full_grad_stiffness(space)
    free = space.free_vel_dofs
    fixed = space.boundary_vel_dofs
    rhs = -k[free][:, fixed] @ ghat[fixed]
    sol = spla.spsolve(k[free][:, free].tocsc(), rhs)
    out = ghat.copy()
    out[free] = sol
    return space.velocity_field(out)


def _random_data(space, rng):
    """Smooth random compatible data used by the operator-norm probe."""
    a = rng.standard_normal(6)
    k1, k2 = rng.integers(1, 3), rng.integers(1, 3)

    def g2x(x, y):
        return a[0] * x + a[1] * y + a[2] * np.sin(np.pi * k1 * x) * np.cos(np.pi * y)

    def g2y(x, y):
        return a[3] * y + a[4] * x + a[5] * np.cos(np.pi * x) * np.sin(np.pi * k2 * y)

    def g1_raw(x, y):
        return a[0] + a[3] + a[1] * np.cos(np.pi * x * k2)

    raw = BoundaryData(g1=g1_raw, g2=(g2x, g2y))
    defect = check_compatibility(raw, space)
    shift = defect / space.domain.measure

    def g1(x, y):
        return g1_raw(x, y) - shift

    return BoundaryData(g1=g1, g2=(g2x, g2y))


def operator_norm_probe(space, trials, p=2.0, s=2.0, seed=0):
    """Empirical norms of the discrete lifting operators.

    Splits each random compatible data set into its boundary part and its
    divergence part, lifts each separately and records the norm ratios
    against the extension norm resp. the L^p norm of g1.  Zero data is
    excluded from the statistics.
    """
    rng = np.random.default_rng(seed)
    rows = []
    c_lift, c_bog = 0.0, 0.0
    wit_lift = wit_bog = None
    for t in range(trials):
        data = _random_data(space, rng)

        # boundary-only part: g1 must carry the flux of g2 to stay compatible
        flux = space.boundary_flux(data.g2_dof_values(space))
        fill = flux / space.domain.measure
        bdata = BoundaryData(g1=fill, g2=data.g2)
        lift_b = lift(bdata, space, p, s)
        ext = harmonic_extension(bdata, space)
        bnorm = norm_W1p(ext, p)
        row = {"trial": t, "bnorm": bnorm}
        if bnorm > 1e-14:
            r = lift_b.norms["W1p"] / bnorm
            row["ratio_lift"] = r
            if r > c_lift:
                c_lift, wit_lift = r, lift_b

        # divergence-only part, compatibility restored by a mean shift
        vals = data.g1_values(space)
        mean = space.integrate(vals) / space.domain.measure
        lift_d = lift(BoundaryData(g1=_MeanZeroG1(vals - mean), g2=None), space, p, s)
        g1norm = space.integrate(np.abs(vals - mean) ** p) ** (1.0 / p)
        row["g1_norm"] = g1norm
        if g1norm > 1e-14:
            r = lift_d.norms["W1p"] / g1norm
            row["ratio_bog"] = r
            if r > c_bog:
                c_bog, wit_bog = r, lift_d
        rows.append(row)
    return {
        "c_lift_est": c_lift,
        "c_bog_est": c_bog,
        "rows": rows,
        "witness_lift": wit_lift,
        "witness_bog": wit_bog,
    }


class _MeanZeroG1:
    """Quadrature-point divergence data wrapped as an evaluable callable."""

    def __init__(self, vals):
        self.vals = vals

    def __call__(self, x, y):
        return self.vals
