"""Mixed Taylor-Hood discretization of a rectangle.

A structured triangulation (each grid square split along its up-diagonal)
carries continuous piecewise-quadratic vector fields for the velocity and
continuous piecewise-linear scalars for the pressure.  The quadrature is
a collapsed (Duffy) Gauss product rule whose polynomial exactness degree
is chosen at build time (default 8), so all norm and form evaluations
reduce to weighted sums over cell quadrature points.

Besides the space itself, this module provides the exponent-p norms, the
discrete divergence, and iterative estimation of the Korn and Sobolev
embedding constants on the discrete space (norm-ratio maximization with
recorded witnesses; lower bounds, not rigorous constants).
"""

from __future__ import annotations

from dataclasses import dataclass

import json
import numpy as np
import scipy.sparse.linalg as spla

from . import assembly

__all__ = [
    "RectDomain",
    "DiscreteSpace",
    "Field",
    "EmbeddingConstants",
    "ConstantEstimate",
    "SpaceBuildError",
    "ExponentRangeError",
    "build_space",
    "norm_Lp",
    "norm_grad_p",
    "norm_sym_grad_p",
    "norm_W1p",
    "divergence_values",
    "prolong_velocity",
    "estimate_korn",
    "estimate_sobolev",
    "estimate_dual_norm",
    "estimate_embedding_constants",
    "discrete_divergence",
    "critical_exponent",
    "save_field",
    "load_field",
]


class SpaceBuildError(RuntimeError):
    """The velocity/pressure pairing failed its build-time stability check."""


class ExponentRangeError(ValueError):
    """Requested embedding target exceeds the critical Sobolev exponent."""


@dataclass(frozen=True)
class RectDomain:
    """Axis-aligned rectangle [x0, x1] x [y0, y1]; d = 2 (3D reserved)."""

    x0: float = 0.0
    y0: float = 0.0
    x1: float = 1.0
    y1: float = 1.0

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError("rectangle must have positive side lengths")

    @property
    def d(self):
        return 2

    @property
    def measure(self):
        return (self.x1 - self.x0) * (self.y1 - self.y0)


def _gauss01(m):
    x, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * (x + 1.0), 0.5 * w


def _triangle_rule(degree):
    """Collapsed Gauss product rule on the unit triangle, exact to `degree`.

    With m one-dimensional points the collapsed rule integrates total
    degree 2m-2 exactly (the Duffy factor raises the u-degree by one).
    """
    m = int(np.ceil((degree + 2) / 2))
    u, wu = _gauss01(m)
    v, wv = _gauss01(m)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    ww = np.outer(wu, wv) * (1.0 - uu)
    xi = uu.ravel()
    eta = (vv * (1.0 - uu)).ravel()
    return np.column_stack([xi, eta]), ww.ravel()


def _p2_basis(pts):
    xi, eta = pts[:, 0], pts[:, 1]
    l0, l1, l2 = 1.0 - xi - eta, xi, eta
    vals = np.column_stack([
        l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
        4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0,
    ])
    dl = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    grads = np.empty((pts.shape[0], 6, 2))
    for k, lk in enumerate((l0, l1, l2)):
        grads[:, k, :] = (4 * lk - 1)[:, None] * dl[k]
    pairs = [(0, 1), (1, 2), (2, 0)]
    lam = (l0, l1, l2)
    for k, (a, b) in enumerate(pairs):
        grads[:, 3 + k, :] = 4 * (lam[a][:, None] * dl[b] + lam[b][:, None] * dl[a])
    return vals, grads


def _p1_basis(pts):
    xi, eta = pts[:, 0], pts[:, 1]
    vals = np.column_stack([1.0 - xi - eta, xi, eta])
    grads = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    return vals, grads


@dataclass
class Field:
    """Coefficient vector tagged with its space and role.

    Roles: ``velocity`` (vector P2, block layout [all x-dofs, all y-dofs]),
    ``pressure`` (P1, mean normalized to zero on construction) and
    ``scalar`` (P1 data, unconstrained).
    """

    space: "DiscreteSpace"
    role: str
    coeffs: np.ndarray

    def __post_init__(self):
        expected = {"velocity": 2 * self.space.n_p2, "pressure": self.space.n_p1, "scalar": self.space.n_p1}
        if self.role not in expected:
            raise ValueError(f"unknown field role {self.role!r}")
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (expected[self.role],):
            raise ValueError(f"{self.role} field needs {expected[self.role]} coefficients, got {self.coeffs.shape}")
        if self.role == "pressure":
            m = self.space.pressure_mean_vector()
            mean = float(m @ self.coeffs) / self.space.domain.measure
            object.__setattr__(self, "coeffs", self.coeffs - mean)

    def copy(self):
        return Field(self.space, self.role, self.coeffs.copy())


class DiscreteSpace:
    """Triangulated rectangle with P2 velocity / P1 pressure approximation."""

    def __init__(self, domain, nx, ny, quad_degree=8, infsup_tol=1e-6, check_infsup=True):
        if nx < 2 or ny < 2:
            raise ValueError(f"need nx, ny >= 2, got {nx}, {ny}")
        self.domain = domain
        self.nx, self.ny = int(nx), int(ny)
        self.quad_degree = int(quad_degree)
        self._build_mesh()
        self._build_quadrature()
        self._cache = {}
        self.inf_sup = assembly.infsup_proxy(self) if check_infsup else None
        if check_infsup and self.inf_sup <= infsup_tol:
            raise SpaceBuildError(
                f"velocity/pressure pairing unstable: scaled divergence coupling "
                f"smallest singular value {self.inf_sup:.3e} <= {infsup_tol:.0e}"
            )

    # -- mesh ----------------------------------------------------------------

    def _build_mesh(self):
        dom, nx, ny = self.domain, self.nx, self.ny
        self.hx = (dom.x1 - dom.x0) / nx
        self.hy = (dom.y1 - dom.y0) / ny
        xs = dom.x0 + self.hx * np.arange(nx + 1)
        ys = dom.y0 + self.hy * np.arange(ny + 1)
        xv, yv = np.meshgrid(xs, ys, indexing="xy")
        self.verts = np.column_stack([xv.ravel(), yv.ravel()])
        self.n_verts = (nx + 1) * (ny + 1)

        def vid(i, j):
            return j * (nx + 1) + i

        cells = []
        for j in range(ny):
            for i in range(nx):
                v00, v10 = vid(i, j), vid(i + 1, j)
                v11, v01 = vid(i + 1, j + 1), vid(i, j + 1)
                cells.append((v00, v10, v11))
                cells.append((v00, v11, v01))
        self.cells = np.asarray(cells, dtype=np.int64)
        self.n_cells = self.cells.shape[0]

        edges = {}
        cell_edges = np.empty((self.n_cells, 3), dtype=np.int64)
        for c, (a, b, d) in enumerate(self.cells):
            for k, (u, v) in enumerate(((a, b), (b, d), (d, a))):
                key = (min(u, v), max(u, v))
                cell_edges[c, k] = edges.setdefault(key, len(edges))
        self.n_edges = len(edges)
        self.edge_verts = np.empty((self.n_edges, 2), dtype=np.int64)
        for (u, v), e in edges.items():
            self.edge_verts[e] = (u, v)
        self._edge_index = edges

        self.n_p2 = self.n_verts + self.n_edges
        self.n_p1 = self.n_verts
        self.n_vel = 2 * self.n_p2
        self.cell_p2 = np.hstack([self.cells, self.n_verts + cell_edges])
        self.cell_p1 = self.cells
        mids = 0.5 * (self.verts[self.edge_verts[:, 0]] + self.verts[self.edge_verts[:, 1]])
        self.p2_coords = np.vstack([self.verts, mids])

        ii = np.arange(self.n_verts) % (nx + 1)
        jj = np.arange(self.n_verts) // (nx + 1)
        bverts = (ii == 0) | (ii == nx) | (jj == 0) | (jj == ny)
        bedges = np.zeros(self.n_edges, dtype=bool)
        bsegs = []  # (end dof, mid dof, end dof, normal, length)
        sides = [
            ([(vid(i, 0), vid(i + 1, 0)) for i in range(nx)], (0.0, -1.0), self.hx),
            ([(vid(i, ny), vid(i + 1, ny)) for i in range(nx)], (0.0, 1.0), self.hx),
            ([(vid(0, j), vid(0, j + 1)) for j in range(ny)], (-1.0, 0.0), self.hy),
            ([(vid(nx, j), vid(nx, j + 1)) for j in range(ny)], (1.0, 0.0), self.hy),
        ]
        for seg_list, nrm, length in sides:
            for (u, v) in seg_list:
                e = edges[(min(u, v), max(u, v))]
                bedges[e] = True
                bsegs.append((u, self.n_verts + e, v, nrm, length))
        self.boundary_segments = bsegs
        bmask = np.concatenate([bverts, bedges])
        self.boundary_p2 = np.flatnonzero(bmask)
        self.interior_p2 = np.flatnonzero(~bmask)
        self.boundary_vel_dofs = np.concatenate([self.boundary_p2, self.boundary_p2 + self.n_p2])
        self.free_vel_dofs = np.concatenate([self.interior_p2, self.interior_p2 + self.n_p2])

    def _build_quadrature(self):
        ref_pts, ref_w = _triangle_rule(self.quad_degree)
        self.nq = ref_pts.shape[0]
        self.p2_vals, p2_ref_grads = _p2_basis(ref_pts)
        self.p1_vals, p1_ref_grads = _p1_basis(ref_pts)

        v1 = self.verts[self.cells[:, 0]]
        v2 = self.verts[self.cells[:, 1]]
        v3 = self.verts[self.cells[:, 2]]
        jac = np.stack([v2 - v1, v3 - v1], axis=-1)  # (C, 2, 2) columns are edge vectors
        det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        inv = np.empty_like(jac)
        inv[:, 0, 0] = jac[:, 1, 1]
        inv[:, 0, 1] = -jac[:, 0, 1]
        inv[:, 1, 0] = -jac[:, 1, 0]
        inv[:, 1, 1] = jac[:, 0, 0]
        inv /= det[:, None, None]

        self.qpts = v1[:, None, :] + np.einsum("qr,crx->cqx", ref_pts, jac.transpose(0, 2, 1))
        self.qw = np.abs(det)[:, None] * ref_w[None, :]
        # physical gradients: dN/dx = J^{-T} dN/dxi
        self.p2_grads = np.einsum("qma,cab->cqmb", p2_ref_grads, inv[:, :, :])
        self.p1_grads = np.einsum("ma,cab->cmb", p1_ref_grads, inv[:, :, :])

        g1d, w1d = _gauss01(4)
        self._bq_pts, self._bq_w = g1d, w1d

    @property
    def h(self):
        return max(self.hx, self.hy)

    # -- field construction ----------------------------------------------------

    def velocity_field(self, coeffs):
        return Field(self, "velocity", coeffs)

    def pressure_field(self, coeffs):
        return Field(self, "pressure", coeffs)

    def scalar_field(self, coeffs):
        return Field(self, "scalar", coeffs)

    def zero_velocity(self):
        return Field(self, "velocity", np.zeros(self.n_vel))

    def interpolate_velocity(self, fun):
        x, y = self.p2_coords[:, 0], self.p2_coords[:, 1]
        vx, vy = _as_vec2(fun, x, y)
        return Field(self, "velocity", np.concatenate([vx, vy]))

    def interpolate_scalar(self, fun):
        x, y = self.verts[:, 0], self.verts[:, 1]
        return Field(self, "scalar", np.asarray(fun(x, y), dtype=float) + np.zeros(self.n_p1))

    # -- evaluation at quadrature points ---------------------------------------

    def velocity_values(self, coeffs):
        cx = coeffs[: self.n_p2][self.cell_p2]
        cy = coeffs[self.n_p2:][self.cell_p2]
        vx = np.einsum("qm,cm->cq", self.p2_vals, cx)
        vy = np.einsum("qm,cm->cq", self.p2_vals, cy)
        return np.stack([vx, vy], axis=-1)

    def velocity_gradients(self, coeffs):
        """(C, Q, 2, 2) array of du_i/dx_j at quadrature points."""
        cx = coeffs[: self.n_p2][self.cell_p2]
        cy = coeffs[self.n_p2:][self.cell_p2]
        gx = np.einsum("cqma,cm->cqa", self.p2_grads, cx)
        gy = np.einsum("cqma,cm->cqa", self.p2_grads, cy)
        return np.stack([gx, gy], axis=-2)

    def p1_values(self, coeffs):
        return np.einsum("qm,cm->cq", self.p1_vals, coeffs[self.cell_p1])

    def p1_gradients(self, coeffs):
        return np.einsum("cma,cm->ca", self.p1_grads, coeffs[self.cell_p1])

    def integrate(self, vals):
        return float(np.sum(self.qw * vals))

    def pressure_mean_vector(self):
        if "mean_vec" not in self._cache:
            self._cache["mean_vec"] = assembly.p1_load(self, np.ones_like(self.qw))
        return self._cache["mean_vec"]

    def p1_mass_solve(self, rhs):
        if "p1_mass_lu" not in self._cache:
            self._cache["p1_mass_lu"] = spla.splu(assembly.p1_mass(self).tocsc())
        return self._cache["p1_mass_lu"].solve(rhs)

    # -- boundary -----------------------------------------------------------------

    def boundary_quadrature(self):
        """Per boundary segment: quadrature points, weights, normal, trace dofs."""
        out = []
        t1d, w1d = self._bq_pts, self._bq_w
        basis = np.column_stack([(1 - t1d) * (1 - 2 * t1d), 4 * t1d * (1 - t1d), t1d * (2 * t1d - 1)])
        for (d0, dm, d1, nrm, length) in self.boundary_segments:
            a = self.p2_coords[d0]
            b = self.p2_coords[d1]
            pts = a[None, :] + np.outer(t1d, b - a)
            out.append({
                "dofs": (d0, dm, d1),
                "pts": pts,
                "w": w1d * length,
                "normal": np.asarray(nrm),
                "basis": basis,
            })
        return out

    def boundary_flux(self, boundary_values):
        """Outward flux of a velocity boundary trace given by P2 boundary dofs."""
        flux = 0.0
        for seg in self.boundary_quadrature():
            d = list(seg["dofs"])
            vx = seg["basis"] @ boundary_values[d]
            vy = seg["basis"] @ boundary_values[[k + self.n_p2 for k in d]]
            flux += np.sum(seg["w"] * (vx * seg["normal"][0] + vy * seg["normal"][1]))
        return float(flux)

    # -- point evaluation --------------------------------------------------------

    def _locate(self, pts):
        rel_x = (pts[:, 0] - self.domain.x0) / self.hx
        rel_y = (pts[:, 1] - self.domain.y0) / self.hy
        i = np.clip(np.floor(rel_x).astype(int), 0, self.nx - 1)
        j = np.clip(np.floor(rel_y).astype(int), 0, self.ny - 1)
        sx = rel_x - i
        sy = rel_y - j
        lower = sy <= sx
        cell = 2 * (j * self.nx + i) + np.where(lower, 0, 1)
        xi = np.where(lower, sx - sy, sx)
        eta = np.where(lower, sy, sy - sx)
        return cell, np.column_stack([xi, eta])

    def eval_p2_scalar(self, coeffs, pts):
        cell, ref = self._locate(np.asarray(pts, dtype=float))
        vals, _ = _p2_basis(ref)
        return np.einsum("nm,nm->n", vals, coeffs[self.cell_p2[cell]])

    def eval_velocity(self, coeffs, pts):
        vx = self.eval_p2_scalar(coeffs[: self.n_p2], pts)
        vy = self.eval_p2_scalar(coeffs[self.n_p2:], pts)
        return np.column_stack([vx, vy])

    def header(self):
        return {
            "domain": [self.domain.x0, self.domain.y0, self.domain.x1, self.domain.y1],
            "nx": self.nx,
            "ny": self.ny,
            "quad_degree": self.quad_degree,
            "n_p2": self.n_p2,
            "n_p1": self.n_p1,
            "inf_sup": self.inf_sup,
        }


def _as_vec2(fun, x, y):
    if isinstance(fun, (tuple, list)):
        return np.asarray(fun[0](x, y), dtype=float) + 0 * x, np.asarray(fun[1](x, y), dtype=float) + 0 * x
    out = np.asarray(fun(x, y), dtype=float)
    if out.ndim == 2 and out.shape[1] == 2:
        return out[:, 0], out[:, 1]
    raise ValueError("velocity callable must return an (N, 2) array or be a pair of scalar callables")


def build_space(domain, nx, ny, quad_degree=8):
    """Build a Taylor-Hood space; aborts if the inf-sup proxy degenerates."""
    return DiscreteSpace(domain, nx, ny, quad_degree=quad_degree)


def prolong_velocity(coarse, fine, field):
    """Exact transfer of a velocity field onto a nested refinement."""
    return fine.velocity_field(np.concatenate([
        coarse.eval_p2_scalar(field.coeffs[: coarse.n_p2], fine.p2_coords),
        coarse.eval_p2_scalar(field.coeffs[coarse.n_p2:], fine.p2_coords),
    ]))


# -- norms -------------------------------------------------------------------


def norm_Lp(field, p):
    """Quadrature Lebesgue norm; Euclidean modulus for vector fields."""
    if p < 1:
        raise ValueError(f"need p >= 1, got {p}")
    s = field.space
    if field.role == "velocity":
        vals = np.linalg.norm(s.velocity_values(field.coeffs), axis=-1)
    else:
        vals = np.abs(s.p1_values(field.coeffs))
    return s.integrate(vals**p) ** (1.0 / p)


def norm_grad_p(field, p):
    s = field.space
    g = s.velocity_gradients(field.coeffs)
    return s.integrate(np.sqrt(np.sum(g**2, axis=(-1, -2))) ** p) ** (1.0 / p)


def norm_sym_grad_p(field, p):
    """Symmetric-gradient norm ||Dv||_p (Frobenius modulus pointwise)."""
    s = field.space
    g = s.velocity_gradients(field.coeffs)
    d = 0.5 * (g + np.swapaxes(g, -1, -2))
    return s.integrate(np.sqrt(np.sum(d**2, axis=(-1, -2))) ** p) ** (1.0 / p)


def norm_W1p(field, p):
    s = field.space
    vals = np.linalg.norm(s.velocity_values(field.coeffs), axis=-1)
    g = s.velocity_gradients(field.coeffs)
    gn = np.sqrt(np.sum(g**2, axis=(-1, -2)))
    return s.integrate(vals**p + gn**p) ** (1.0 / p)


def divergence_values(space, coeffs):
    g = space.velocity_gradients(coeffs)
    return g[..., 0, 0] + g[..., 1, 1]


def discrete_divergence(field):
    """L2 projection of div v onto the pressure-degree scalar space."""
    s = field.space
    b = assembly.p1_load(s, divergence_values(s, field.coeffs))
    return s.scalar_field(s.p1_mass_solve(b))


def critical_exponent(p, d=2):
    if p >= d:
        return np.inf
    return p * d / (d - p)


# -- constant estimation -------------------------------------------------------


@dataclass
class ConstantEstimate:
    value: float
    witness: Field
    converged: bool
    iters: int


def _ratio_ascent(x0, logratio, grad, iters):
    """Maximize a 0-homogeneous log-ratio by normalized gradient ascent."""
    x = x0 / np.linalg.norm(x0)
    best = logratio(x)
    step = 0.25
    stalled = 0
    it = 0
    for it in range(iters):
        g = grad(x)
        gn = np.linalg.norm(g)
        if gn == 0.0:
            break
        improved = False
        s = step
        for _ in range(25):
            y = x + s * g / gn
            y /= np.linalg.norm(y)
            val = logratio(y)
            if val > best:
                x, best = y, val
                step = min(1.5 * s, 1.0)
                improved = True
                break
            s *= 0.5
        if not improved:
            stalled += 1
            step = max(step * 0.5, 1e-6)
            if stalled >= 5:
                break
        else:
            stalled = 0
    return x, best, stalled >= 5 or it < iters - 1, it + 1


def _masked(vec, idx, n):
    out = np.zeros(n)
    out[idx] = vec
    return out


def estimate_korn(space, p, iters=200, seed=0, starts=None):
    """Lower bound for sup ||grad u||_p / ||Du||_p over zero-boundary fields.

    For p = 2 the maximizer solves a generalized eigenvalue problem which
    is handled by power iteration on the stiffness pencil; for p != 2 the
    p = 2 witness seeds a projected gradient ascent.
    """
    if not (1.0 < p <= 2.0):
        raise ValueError(f"need p in (1, 2], got {p}")
    free = space.free_vel_dofs
    kf = assembly.full_grad_stiffness(space)[free][:, free].tocsc()
    ks = assembly.sym_grad_stiffness(space)[free][:, free].tocsc()
    lu = spla.splu(ks)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(free.size)
    lam = 0.0
    converged2 = False
    for k in range(400):
        x = lu.solve(kf @ x)
        x /= np.linalg.norm(x)
        new = float(x @ (kf @ x)) / float(x @ (ks @ x))
        if abs(new - lam) < 1e-11 * max(new, 1.0):
            lam = new
            converged2 = True
            break
        lam = new
    witness2 = _masked(x, free, space.n_vel)
    if p == 2.0:
        return ConstantEstimate(np.sqrt(lam), space.velocity_field(witness2), converged2, k + 1)

    def logratio(xf):
        c = _masked(xf, free, space.n_vel)
        g = space.velocity_gradients(c)
        gn = np.sqrt(np.sum(g**2, axis=(-1, -2)))
        d = 0.5 * (g + np.swapaxes(g, -1, -2))
        dn = np.sqrt(np.sum(d**2, axis=(-1, -2)))
        return (np.log(space.integrate(gn**p)) - np.log(space.integrate(dn**p))) / p

    def grad(xf):
        c = _masked(xf, free, space.n_vel)
        gf = assembly.grad_seminorm_gradient(space, c, p, kind="full")
        gs = assembly.grad_seminorm_gradient(space, c, p, kind="sym")
        nf = assembly.seminorm_pth_power(space, c, p, kind="full")
        ns = assembly.seminorm_pth_power(space, c, p, kind="sym")
        return (gf / nf - gs / ns)[free] / p

    cands = [x]
    if starts:
        cands += [f.coeffs[free] for f in starts]
    cands.append(rng.standard_normal(free.size))
    best = None
    for x0 in cands:
        if np.linalg.norm(x0) == 0:
            continue
        xf, val, conv, used = _ratio_ascent(x0, logratio, grad, iters)
        if best is None or val > best[1]:
            best = (xf, val, conv, used)
    wit = space.velocity_field(_masked(best[0], free, space.n_vel))
    return ConstantEstimate(float(np.exp(best[1])), wit, best[2], best[3])


def estimate_sobolev(space, from_p, to_r, iters=150, seed=0, starts=None):
    """Lower bound for sup ||u||_r / ||u||_{1,p} over the discrete space.

    Fails fast when the target exponent exceeds the critical one.
    """
    pstar = critical_exponent(from_p, 2)
    if to_r > pstar * (1 + 1e-12):
        raise ExponentRangeError(f"target exponent {to_r} exceeds the critical exponent {pstar}")
    if to_r < 1 or from_p < 1:
        raise ValueError("exponents must be >= 1")
    rng = np.random.default_rng(seed)
    n = space.n_vel
    s, r = from_p, to_r

    def logratio(x):
        vals = np.linalg.norm(space.velocity_values(x), axis=-1)
        g = space.velocity_gradients(x)
        gn = np.sqrt(np.sum(g**2, axis=(-1, -2)))
        num = np.log(space.integrate(vals**r)) / r
        den = np.log(space.integrate(vals**s + gn**s)) / s
        return num - den

    def grad(x):
        gnum = assembly.value_norm_gradient(space, x, r)
        vals = np.linalg.norm(space.velocity_values(x), axis=-1)
        nr = space.integrate(vals**r)
        gden = assembly.value_norm_gradient(space, x, s) + assembly.grad_seminorm_gradient(space, x, s, kind="full")
        g = space.velocity_gradients(x)
        gn = np.sqrt(np.sum(g**2, axis=(-1, -2)))
        nd = space.integrate(vals**s + gn**s)
        return gnum / (r * nr) - gden / (s * nd)

    const = np.concatenate([np.ones(space.n_p2), np.zeros(space.n_p2)])
    cx, cy = 0.5 * (space.domain.x0 + space.domain.x1), 0.5 * (space.domain.y0 + space.domain.y1)
    w = 0.15 * min(space.domain.x1 - space.domain.x0, space.domain.y1 - space.domain.y0)
    bump = space.interpolate_velocity(
        (lambda x, y: np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / w**2), lambda x, y: 0.0 * x)
    ).coeffs
    cands = [const, bump, rng.standard_normal(n)]
    if starts:
        cands += [f.coeffs for f in starts]
    best = None
    for x0 in cands:
        xf, val, conv, used = _ratio_ascent(x0, logratio, grad, iters)
        if best is None or val > best[1]:
            best = (xf, val, conv, used)
    return ConstantEstimate(float(np.exp(best[1])), space.velocity_field(best[0]), best[2], best[3])


def estimate_dual_norm(space, load, p, iters=15):
    """Discrete dual norm sup <F, phi>/||D phi||_p over zero-boundary fields.

    Fixed-point iteration on the weighted symmetric stiffness; each iterate
    is itself a valid lower bound and the best one is returned.
    """
    free = space.free_vel_dofs
    lf = load[free]
    if np.linalg.norm(lf) == 0.0:
        return ConstantEstimate(0.0, space.zero_velocity(), True, 0)
    best = 0.0
    xbest = None
    weight = np.ones_like(space.qw)
    for it in range(iters):
        k = assembly.sym_grad_stiffness(space, weight)[free][:, free].tocsc()
        x = spla.splu(k).solve(lf)
        c = _masked(x, free, space.n_vel)
        dn = norm_sym_grad_p(space.velocity_field(c), p)
        if dn == 0.0:
            break
        val = float(lf @ x) / dn
        if val > best:
            best, xbest = val, c
        if p == 2.0:
            break
        g = space.velocity_gradients(c)
        d = 0.5 * (g + np.swapaxes(g, -1, -2))
        dn_pt = np.sqrt(np.sum(d**2, axis=(-1, -2)))
        floor = 1e-10 * max(dn_pt.max(), 1e-300)
        weight = np.maximum(dn_pt, floor) ** (p - 2.0)
    wit = space.velocity_field(xbest if xbest is not None else np.zeros(space.n_vel))
    return ConstantEstimate(best, wit, True, it + 1)


@dataclass
class EmbeddingConstants:
    """Estimated discrete Korn and Sobolev constants with witnesses."""

    p: float
    s: float
    korn_p: float
    sob_p_to_pstar: float
    sob_s_to_2pprime: float
    targets: dict
    witnesses: dict
    converged: dict

    def to_json(self):
        return {
            "p": self.p,
            "s": self.s,
            "korn_p": self.korn_p,
            "sob_p_to_pstar": self.sob_p_to_pstar,
            "sob_s_to_2pprime": self.sob_s_to_2pprime,
            "targets": self.targets,
            "converged": self.converged,
            "non_rigorous": True,
        }


def estimate_embedding_constants(space, p, s, iters=150, seed=0):
    """Estimate the trio (korn_p, W^{1,p} -> L^{p*}, W^{1,s} -> L^{2p'})."""
    pstar = critical_exponent(p, 2)
    target1 = min(pstar, 64.0)  # cap the numerically explored exponent
    two_pprime = 2.0 * p / (p - 1.0)
    korn = estimate_korn(space, p, iters=iters, seed=seed)
    sob1 = estimate_sobolev(space, p, target1, iters=iters, seed=seed + 1)
    sob2 = estimate_sobolev(space, s, min(two_pprime, critical_exponent(s, 2)), iters=iters, seed=seed + 2)
    return EmbeddingConstants(
        p=p,
        s=s,
        korn_p=korn.value,
        sob_p_to_pstar=sob1.value,
        sob_s_to_2pprime=sob2.value,
        targets={"pstar": pstar, "pstar_used": target1, "two_pprime": two_pprime},
        witnesses={"korn_p": korn.witness, "sob_p_to_pstar": sob1.witness, "sob_s_to_2pprime": sob2.witness},
        converged={"korn_p": korn.converged, "sob_p_to_pstar": sob1.converged, "sob_s_to_2pprime": sob2.converged},
    )


# -- field io ----------------------------------------------------------------


def save_field(path, field):
    """Structured-grid text format: one JSON header line, then coefficients."""
    head = {"role": field.role, **field.space.header()}
    with open(path, "w") as fh:
        fh.write(json.dumps(head, sort_keys=True) + "\n")
        for c in field.coeffs:
            fh.write(repr(float(c)) + "\n")


def load_field(path, space):
    with open(path) as fh:
        head = json.loads(fh.readline())
        coeffs = np.array([float(line) for line in fh])
    if head["nx"] != space.nx or head["ny"] != space.ny:
        raise ValueError("field header does not match the space")
    return Field(space, head["role"], coeffs)
