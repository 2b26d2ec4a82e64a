"""Coercivity certification for the lifted problem.

Combines the sampled stress characteristics, the discrete embedding
constants and the lift norms into the three dependent constants

    G1 = C3/p,
    G2 = c_sob * c_korn**2 * (||Dg||_s + ||div g||_s / 2),
    G3 = (C2+C3) * || |Dg| + delta ||_p**(p-1) + c_sob ||g||_{1,s}**2
         + c_sob c_korn ||div g||_s ||g||_{1,s} + c_korn ||f||_*,

then tests the smallness condition

    (2-p)**(2-p) * (p-1)**(p-1) * G1  >=  G2**(p-1) * G3**(2-p)

and, when it holds, reports the coercivity radius
R = [G3 / ((2-p) G1)]**(1/(p-1)).  Every constant carries provenance and
the verdict is a numerical certificate (sampled, non-rigorous constants),
not a proof.  The alternative low-regularity bound, which admits no such
radius, is evaluated on a grid to exhibit its unboundedness below.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "CoercivityReport",
    "AlternativeBound",
    "CertifierError",
    "compute_s",
    "conjugate",
    "compute_constants",
    "check_smallness",
    "polynomial_positivity_check",
    "weight_split_max_g3",
    "weight_optimality_scan",
    "alternative_constants",
    "alternative_bound_scan",
    "scaling_sweep",
]


class CertifierError(ValueError):
    """Missing provenance or out-of-range exponents."""


def conjugate(x):
    if x <= 1.0:
        raise CertifierError(f"conjugate exponent needs x > 1, got {x}")
    return x / (x - 1.0)


def compute_s(p, d):
    """Integrability exponent s = max{p, (p*/2)'} for the convective term.

    Both branch forms are evaluated and cross-checked; p = 2 is admitted
    as the Newtonian limit with s = p.
    """
    if d not in (2, 3):
        raise CertifierError(f"dimension must be 2 or 3, got {d}")
    lo = 2.0 * d / (d + 2.0)
    if not (lo < p <= 2.0):
        raise CertifierError(f"exponent p={p} outside ({lo}, 2]")
    if p == 2.0:
        return 2.0
    pstar = p * d / (d - p)
    via_max = max(p, conjugate(pstar / 2.0))
    via_branch = p if p > 3.0 * d / (d + 2.0) else conjugate(pstar / 2.0)
    if abs(via_max - via_branch) > 1e-12 * max(1.0, via_max):
        raise CertifierError(f"branch table mismatch for p={p}, d={d}")
    return via_max


@dataclass
class CoercivityReport:
    p: float
    d: int
    s: float
    G1: float
    G2: float
    G3: float
    lhs: float
    rhs: float
    satisfied: bool
    R: float | None
    provenance: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "p": self.p,
            "d": self.d,
            "s": self.s,
            "G1": self.G1,
            "G2": self.G2,
            "G3": self.G3,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "satisfied": self.satisfied,
            "R": self.R,
            "verdict": "numerical certificate" if self.satisfied else "smallness violated",
            "provenance": self.provenance,
        }


@dataclass
class AlternativeBound:
    F1: float
    F2: float
    G1: float
    p: float
    q: float
    scan: list

    def to_json(self):
        return {"F1": self.F1, "F2": self.F2, "G1": self.G1, "p": self.p, "q": self.q, "scan": self.scan}


def weighted_shear_norm(lift_field, p, delta):
    """|| |Dg| + delta ||_p evaluated by quadrature on the lift's space."""
    space = lift_field.g.space
    g = space.velocity_gradients(lift_field.g.coeffs)
    d = 0.5 * (g + np.swapaxes(g, -1, -2))
    mag = np.sqrt(np.sum(d**2, axis=(-1, -2)))
    return space.integrate((mag + delta) ** p) ** (1.0 / p)


def compute_constants(chars, emb, lift_field, f_norm, p, s, delta):
    """Dependent constants (G1, G2, G3) from estimated provenance.

    The u-side embedding uses the zero-boundary W^{1,p} -> L^{p*} constant,
    the g-side terms the W^{1,s} -> L^{2p'} constant; missing provenance is
    an error rather than a silent default.
    """
    for name, val in (("characteristics", chars), ("embedding constants", emb), ("lift", lift_field)):
        if val is None:
            raise CertifierError(f"missing provenance: {name} not estimated")
    if f_norm is None or f_norm < 0:
        raise CertifierError("missing provenance: dual norm of the load not estimated")

    g1p = chars.C3 / p
    dg_s = lift_field.norms["Dg_s"]
    div_s = lift_field.norms["div_s"]
    g_1s = lift_field.norms["W1s"]
    g2 = emb.sob_p_to_pstar * emb.korn_p**2 * (dg_s + 0.5 * div_s)
    g3 = (
        (chars.C2 + chars.C3) * weighted_shear_norm(lift_field, p, delta) ** (p - 1.0)
        + emb.sob_s_to_2pprime * g_1s**2
        + emb.sob_s_to_2pprime * emb.korn_p * div_s * g_1s
        + emb.korn_p * f_norm
    )
    return g1p, g2, g3


def check_smallness(G1, G2, G3, p, d=2, s=None, provenance=None):
    """Evaluate the smallness condition; ties count as satisfied."""
    if not (1.0 < p < 2.0):
        raise CertifierError(f"smallness condition needs p in (1, 2), got {p}")
    if G1 <= 0 or G2 < 0 or G3 < 0:
        raise CertifierError("constants must satisfy G1 > 0, G2, G3 >= 0")
    lhs = (2.0 - p) ** (2.0 - p) * (p - 1.0) ** (p - 1.0) * G1
    rhs = G2 ** (p - 1.0) * G3 ** (2.0 - p)
    satisfied = lhs >= rhs
    radius = (G3 / ((2.0 - p) * G1)) ** (1.0 / (p - 1.0)) if satisfied else None
    return CoercivityReport(
        p=p,
        d=d,
        s=s if s is not None else compute_s(p, d),
        G1=G1,
        G2=G2,
        G3=G3,
        lhs=lhs,
        rhs=rhs,
        satisfied=bool(satisfied),
        R=radius,
        provenance=provenance or {},
    )


def polynomial_positivity_check(G1, G2, G3, p, R):
    """Value of G1 R^p - G2 R^2 - G3 R (nonnegative on certified radii)."""
    return G1 * R**p - G2 * R**2 - G3 * R


def weight_split_max_g3(G1, G2, p, theta):
    """Largest G3 admitting a nonnegative polynomial under the split
    theta*G1*R^p >= G2*R^2 and (1-theta)*G1*R^p >= G3*R."""
    if not (0.0 < theta < 1.0):
        raise CertifierError("split weight must lie in (0, 1)")
    if G2 <= 0:
        return np.inf
    return (1.0 - theta) * G1 * (theta * G1 / G2) ** ((p - 1.0) / (2.0 - p))


def weight_optimality_scan(G1, G2, p, resolution=1e-3):
    """Scan split weights; the feasible-G3 maximum sits at theta = p-1."""
    thetas = np.arange(resolution, 1.0, resolution)
    vals = np.array([weight_split_max_g3(G1, G2, p, t) for t in thetas])
    best = int(np.argmax(vals))
    return {"thetas": thetas, "g3_max": vals, "best_theta": float(thetas[best]), "optimal_theta": p - 1.0}


def alternative_constants(chars, emb, lift_field, f_norm, p, q, delta, measure):
    """Constants (F1, F2, G1) of the low-regularity bound.

    The p-norm terms that the certifiable case controls by ||Du||_p are
    absorbed into the ||Du||_q coefficient through the Lebesgue embedding
    factor measure**(1/p - 1/q).
    """
    g1p = chars.C3 / p
    dg_p = lift_field.norms["Dg_p"]
    div_p = lift_field.norms["div_p"]
    g_1p = lift_field.norms["W1p"]
    c_pq = measure ** (1.0 / p - 1.0 / q)
    f2 = emb.sob_p_to_pstar * emb.korn_p**2 * (dg_p + 0.5 * div_p)
    f1 = emb.sob_s_to_2pprime * (g_1p**2 + emb.korn_p * div_p * g_1p) + c_pq * (
        (chars.C2 + chars.C3) * weighted_shear_norm(lift_field, p, delta) ** (p - 1.0) + emb.korn_p * f_norm
    )
    return f1, f2, g1p


def alternative_bound_scan(F1, F2, G1, p, q, R_grid, k_grid=(1.0, 2.0, 5.0, 10.0, 100.0)):
    """Evaluate G1 R^p - F1 x_q - F2 R x_q along x_q = k R.

    The scan exhibits that no radius yields a nonnegative lower bound: the
    value decreases without bound in the unconstrained norm.
    """
    if F1 < 0:
        raise CertifierError("F1 must be nonnegative")
    scan = []
    for r in R_grid:
        vals = [
            {"k": float(k), "value": float(G1 * r**p - F1 * k * r - F2 * r * (k * r))}
            for k in k_grid
        ]
        scan.append({"R": float(r), "values": vals, "worst": vals[-1]["value"]})
    return AlternativeBound(F1=F1, F2=F2, G1=G1, p=p, q=q, scan=scan)


def scaling_sweep(chars, emb, lift_field, f_norm, p, s, delta, lambdas):
    """Smallness verdicts for the data family lambda * (g1, g2).

    Lifting is linear, so the scaled lift norms are known in closed form;
    only the delta-weighted shear norm needs fresh quadrature per lambda.
    """
    space = lift_field.g.space
    g = space.velocity_gradients(lift_field.g.coeffs)
    dmag = np.sqrt(np.sum((0.5 * (g + np.swapaxes(g, -1, -2))) ** 2, axis=(-1, -2)))
    rows = []
    for lam in lambdas:
        shear = space.integrate((lam * dmag + delta) ** p) ** (1.0 / p)
        g2c = lam * emb.sob_p_to_pstar * emb.korn_p**2 * (lift_field.norms["Dg_s"] + 0.5 * lift_field.norms["div_s"])
        g3c = (
            (chars.C2 + chars.C3) * shear ** (p - 1.0)
            + emb.sob_s_to_2pprime * (lam * lift_field.norms["W1s"]) ** 2
            + emb.sob_s_to_2pprime * emb.korn_p * (lam * lift_field.norms["div_s"]) * (lam * lift_field.norms["W1s"])
            + emb.korn_p * f_norm
        )
        rep = check_smallness(chars.C3 / p, g2c, g3c, p, s=s)
        rows.append({
            "lambda": float(lam),
            "G1": rep.G1,
            "G2": rep.G2,
            "G3": rep.G3,
            "lhs": rep.lhs,
            "rhs": rep.rhs,
            "satisfied": rep.satisfied,
            "R": rep.R,
        })
    transitions = sum(
        1 for a, b in zip(rows[:-1], rows[1:]) if a["satisfied"] and not b["satisfied"]
    )
    return {"rows": rows, "transitions": transitions}
