"""Manufactured solutions, data derivation, compatibility checks, instances.

Every catalog case carries closed-form fields with hand-derived analytic
derivatives; a finite-difference oracle cross-checks all of them before a
case is used.  Problem data follow the strong form

    g = curl(kappa curl u) - mu grad p,     f = div(mu u),

with the tangential boundary data supplied as the full field u (only its
tangential content enters the constraint) and the cavity fluxes beta_i
computed by face quadrature of (mu u) . n.

The scalar multiplier p of every catalog case vanishes on the exterior
boundary and is constant (here: zero) on cavity boundaries, which the
consistency of the scheme requires.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assembly import assemble
from .mesh import PolyMesh
from .polybasis import face_quadrature, cell_quadrature
from .solver import solve
from .space import WGSpace

_PI = np.pi


# ---------------------------------------------------------------------------
# small trivariate polynomial helper (exact differentiation for poly cases)

class TriPoly:
    """Trivariate polynomial as a map from exponent triples to coefficients."""

    def __init__(self, terms=None):
        self.terms = dict(terms or {})

    @classmethod
    def random(cls, degree, rng):
        t = {}
        for a in range(degree + 1):
            for b in range(degree - a + 1):
                for c in range(degree - a - b + 1):
                    t[(a, b, c)] = rng.uniform(-1.0, 1.0)
        return cls(t)

    def diff(self, d):
        out = {}
        for e, c in self.terms.items():
            if e[d] > 0:
                ne = list(e)
                ne[d] -= 1
                out[tuple(ne)] = out.get(tuple(ne), 0.0) + c * e[d]
        return TriPoly(out)

    def __add__(self, other):
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0.0) + c
        return TriPoly(out)

    def __sub__(self, other):
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0.0) - c
        return TriPoly(out)

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        vals = np.zeros(len(pts))
        for (a, b, c), co in sorted(self.terms.items()):
            vals += co * pts[:, 0] ** a * pts[:, 1] ** b * pts[:, 2] ** c
        return vals


def _poly_curl(u):
    return [u[2].diff(1) - u[1].diff(2),
            u[0].diff(2) - u[2].diff(0),
            u[1].diff(0) - u[0].diff(1)]


def _vec(fs):
    return lambda pts: np.column_stack([f(pts) for f in fs])


def _zeros(pts):
    return np.zeros(len(np.asarray(pts)))


def _zeros3(pts):
    return np.zeros((len(np.asarray(pts)), 3))


def _identity_field(pts):
    return np.broadcast_to(np.eye(3), (len(np.asarray(pts)), 3, 3))


# ---------------------------------------------------------------------------
# exact cases

@dataclass
class ExactCase:
    """Closed-form manufactured solution with analytically derived data."""
    name: str
    u: callable                     # (n,3) -> (n,3)
    p: callable                     # (n,3) -> (n,)
    curl_u: callable
    curl_kcurl_u: callable          # curl of (kappa curl u)
    grad_p: callable
    f: callable                     # div(mu u)
    mu_field: callable              # (n,3) -> (n,3,3), piecewise constant
    kappa_field: callable
    fd_exclude_planes: list = field(default_factory=list)  # x-planes to avoid

    def kcurl_u(self, pts):
        return np.einsum("nab,nb->na", self.kappa_field(pts), self.curl_u(pts))

    def g(self, pts):
        out = self.curl_kcurl_u(pts)
        gp = self.grad_p(pts)
        if np.any(gp):
            out = out - np.einsum("nab,nb->na", self.mu_field(pts), gp)
        return out

    def mu_of_cell(self, center):
        return self.mu_field(np.asarray(center)[None])[0]

    def kappa_of_cell(self, center):
        return self.kappa_field(np.asarray(center)[None])[0]

    def beta(self, mesh: PolyMesh, degree: int = 7) -> np.ndarray:
        """Fluxes of mu*u through the cavity components, by face quadrature."""
        m = mesh.n_components - 1
        out = np.zeros(m)
        for i in range(1, m + 1):
            total = 0.0
            for fc in mesh.boundary_faces(i):
                quad = face_quadrature(mesh, fc, degree)
                mu_u = np.einsum("nab,nb->na",
                                 self.mu_field(quad.points), self.u(quad.points))
                total += quad.weights @ (mu_u @ mesh.face_normals[fc])
            out[i - 1] = total
        return out


def catalog(name: str, k: int) -> ExactCase:
    """Manufactured-solution catalog.

    poly-exact    random field in [P_k]^3 (fixed seed), p = 0; reproduced
                  exactly by the scheme.
    trig-cube     divergence-free trigonometric field on the unit cube with
                  a trigonometric multiplier vanishing on the boundary.
    trig-hollow   trig-cube field plus (x,0,0) on the hollow cube; p = 0 and
                  the linear part drives a nonzero cavity flux.
    two-material  mu doubles across x = 1/2; u = mu^{-1} curl(0,0,w) keeps
                  mu*u normally and u tangentially continuous there.
    """
    if name == "poly-exact":
        rng = np.random.default_rng(271828 + k)
        u = [TriPoly.random(k, rng) for _ in range(3)]
        w = _poly_curl(u)
        cc = _poly_curl(w)
        div_u = u[0].diff(0) + u[1].diff(1) + u[2].diff(2)
        return ExactCase(
            name=name, u=_vec(u), p=_zeros, curl_u=_vec(w),
            curl_kcurl_u=_vec(cc), grad_p=_zeros3, f=div_u,
            mu_field=_identity_field, kappa_field=_identity_field)

    if name in ("trig-cube", "trig-hollow"):
        s = lambda t: np.sin(_PI * t)
        c = lambda t: np.cos(_PI * t)

        def u_trig(pts):
            x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
            return np.column_stack([s(y) * s(z), s(z) * s(x), s(x) * s(y)])

        def curl_u(pts):
            x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
            return _PI * np.column_stack([
                s(x) * (c(y) - c(z)),
                s(y) * (c(z) - c(x)),
                s(z) * (c(x) - c(y)),
            ])

        def curl_curl(pts):
            # divergence-free, so curl curl u = -laplace u = 2 pi^2 u
            return 2.0 * _PI ** 2 * u_trig(pts)

        if name == "trig-cube":
            def p(pts):
                x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
                return s(x) * s(y) * s(z)

            def grad_p(pts):
                x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
                return _PI * np.column_stack(
                    [c(x) * s(y) * s(z), s(x) * c(y) * s(z), s(x) * s(y) * c(z)])

            return ExactCase(
                name=name, u=u_trig, p=p, curl_u=curl_u,
                curl_kcurl_u=curl_curl, grad_p=grad_p, f=_zeros,
                mu_field=_identity_field, kappa_field=_identity_field)

        # hollow: add the curl-free field (x,0,0); div = 1 gives beta_1 != 0
        def u_hollow(pts):
            out = u_trig(pts)
            out[:, 0] += pts[:, 0]
            return out

        return ExactCase(
            name=name, u=u_hollow, p=_zeros, curl_u=curl_u,
            curl_kcurl_u=curl_curl, grad_p=_zeros3,
            f=lambda pts: np.ones(len(pts)),
            mu_field=_identity_field, kappa_field=_identity_field)

    if name == "two-material":
        def m_of(x):
            return np.where(x >= 0.5, 2.0, 1.0)

        def mu_field(pts):
            pts = np.asarray(pts)
            return m_of(pts[:, 0])[:, None, None] * np.eye(3)

        def parts(pts):
            x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
            xi = x - 0.5
            psi = np.sin(_PI * y) * np.sin(_PI * z)
            psi_y = _PI * np.cos(_PI * y) * np.sin(_PI * z)
            psi_z = _PI * np.sin(_PI * y) * np.cos(_PI * z)
            psi_yz = _PI ** 2 * np.cos(_PI * y) * np.cos(_PI * z)
            return xi, psi, psi_y, psi_z, psi_yz, m_of(x)

        def u(pts):
            xi, psi, psi_y, _, _, m = parts(pts)
            return np.column_stack([xi ** 3 * psi_y, -3 * xi ** 2 * psi,
                                    np.zeros(len(xi))]) / m[:, None]

        def curl_u(pts):
            xi, psi, psi_y, psi_z, psi_yz, m = parts(pts)
            # curl of (phi psi_y, -phi' psi, 0)/m with phi = xi^3
            wz = -(6 * xi * psi - _PI ** 2 * xi ** 3 * psi)
            return np.column_stack([3 * xi ** 2 * psi_z, xi ** 3 * psi_yz,
                                    wz]) / m[:, None]

        def curl_curl(pts):
            xi, psi, psi_y, _, _, m = parts(pts)
            g1 = psi_y * (2 * _PI ** 2 * xi ** 3 - 6 * xi)
            g2 = psi * (6 - 6 * _PI ** 2 * xi ** 2)
            return np.column_stack([g1, g2, np.zeros(len(xi))]) / m[:, None]

        return ExactCase(
            name=name, u=u, p=_zeros, curl_u=curl_u,
            curl_kcurl_u=curl_curl, grad_p=_zeros3,
            f=_zeros,  # mu u = curl(0,0,w) is exactly solenoidal
            mu_field=mu_field, kappa_field=_identity_field,
            fd_exclude_planes=[0.5])

    raise ValueError(f"unknown case {name!r}; see catalog() for choices")


CASE_NAMES = ("poly-exact", "trig-cube", "trig-hollow", "two-material")


# ---------------------------------------------------------------------------
# finite-difference oracle

def _fd_points(case: ExactCase, n_points: int, seed: int, step: float):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0.05, 0.95, size=(4 * n_points, 3))
    ok = np.ones(len(pts), dtype=bool)
    for plane in case.fd_exclude_planes:
        ok &= np.abs(pts[:, 0] - plane) > 50 * step
    return pts[ok][:n_points]


def _fd_jacobian(fn, pts, step):
    """Central-difference Jacobian J[n, i, d] = d(fn_i)/d(x_d)."""
    cols = []
    for d in range(3):
        e = np.zeros(3)
        e[d] = step
        hi = np.atleast_2d(fn(pts + e))
        lo = np.atleast_2d(fn(pts - e))
        cols.append((hi - lo) / (2 * step))
    J = np.stack(cols, axis=-1)
    return J


def fd_check(case: ExactCase, n_points: int = 100, step: float = 1e-5,
             seed: int = 7) -> dict:
    """Max relative mismatch of every analytic derivative against central
    differences at random interior points (material interfaces excluded)."""
    pts = _fd_points(case, n_points, seed, step)

    def rel(a, b):
        return float(np.max(np.abs(a - b) / (1.0 + np.abs(b))))

    Ju = _fd_jacobian(case.u, pts, step)
    fd_curl = np.column_stack([Ju[:, 2, 1] - Ju[:, 1, 2],
                               Ju[:, 0, 2] - Ju[:, 2, 0],
                               Ju[:, 1, 0] - Ju[:, 0, 1]])
    out = {"curl_u": rel(case.curl_u(pts), fd_curl)}

    Jk = _fd_jacobian(case.kcurl_u, pts, step)
    fd_cc = np.column_stack([Jk[:, 2, 1] - Jk[:, 1, 2],
                             Jk[:, 0, 2] - Jk[:, 2, 0],
                             Jk[:, 1, 0] - Jk[:, 0, 1]])
    out["curl_kcurl_u"] = rel(case.curl_kcurl_u(pts), fd_cc)

    mu_u = lambda q: np.einsum("nab,nb->na", case.mu_field(q), case.u(q))
    Jm = _fd_jacobian(mu_u, pts, step)
    out["div_mu_u"] = rel(case.f(pts), Jm[:, 0, 0] + Jm[:, 1, 1] + Jm[:, 2, 2])

    p_scalar = lambda q: np.asarray(case.p(q))[:, None]
    Jp = _fd_jacobian(p_scalar, pts, step)
    out["grad_p"] = rel(case.grad_p(pts), Jp[:, 0, :])
    return out


# ---------------------------------------------------------------------------
# compatibility checks

@dataclass
class CompatibilityReport:
    violations: list
    values: dict

    @property
    def ok(self) -> bool:
        return not self.violations


def check_compatibility(case: ExactCase, kind: str, mesh: PolyMesh,
                        degree: int = 9, f_override=None) -> CompatibilityReport:
    """Data compatibility of a case.

    kind "div-curl": checks (f, 1) = <(mu u) . n, 1> over the whole boundary
    and that the prescribed curl field is divergence-free (FD oracle).
    kind "model": only finiteness of the derived data.
    """
    f_fn = f_override if f_override is not None else case.f
    bad = {}
    if kind == "div-curl":
        vol_int = 0.0
        for c in range(mesh.n_cells):
            quad = cell_quadrature(mesh, c, degree)
            vol_int += quad.weights @ np.asarray(f_fn(quad.points))
        flux = 0.0
        for fc in mesh.boundary_faces():
            quad = face_quadrature(mesh, fc, degree)
            mu_u = np.einsum("nab,nb->na",
                             case.mu_field(quad.points), case.u(quad.points))
            flux += quad.weights @ (mu_u @ mesh.face_normals[fc])
        gap = abs(vol_int - flux)
        if gap > 1e-8 * (1.0 + abs(flux)):
            bad["flux_balance"] = gap

        pts = _fd_points(case, 100, 11, 1e-5)
        J = _fd_jacobian(case.curl_u, pts, 1e-5)
        div_g = np.abs(J[:, 0, 0] + J[:, 1, 1] + J[:, 2, 2]).max()
        if div_g > 1e-8 * (1.0 + float(np.abs(case.curl_u(pts)).max())):
            bad["div_curl_data"] = float(div_g)
        values = {"volume_integral_f": float(vol_int), "boundary_flux": float(flux),
                  "max_div_curl_data": float(div_g)}
    elif kind == "model":
        pts = _fd_points(case, 50, 13, 1e-5)
        for label, arr in (("g", case.g(pts)), ("f", f_fn(pts)),
                           ("u", case.u(pts)), ("p", case.p(pts))):
            if not np.all(np.isfinite(arr)):
                bad[label] = float("nan")
        values = {}
    else:
        raise ValueError("kind must be 'div-curl' or 'model'")

    violations = [f"{name}: off by {mag}" for name, mag in bad.items()]
    return CompatibilityReport(violations, values)


# ---------------------------------------------------------------------------
# problem instances

@dataclass
class ProblemInstance:
    """One fully specified discrete model problem."""
    mesh: PolyMesh
    k: int
    mu: object                    # per-cell spec accepted by WGSpace
    kappa: object
    g: object                     # callable or None
    f: object
    xi: object                    # full boundary field (tangential part used)
    beta: np.ndarray
    exact_u: object = None
    exact_p: object = None
    label: str = ""


def model_instance(case: ExactCase, mesh: PolyMesh, k: int) -> ProblemInstance:
    """The manufactured model problem whose solution is (case.u, case.p)."""
    return ProblemInstance(
        mesh=mesh, k=k,
        mu=case.mu_of_cell, kappa=case.kappa_of_cell,
        g=case.g, f=case.f, xi=case.u, beta=case.beta(mesh, degree=2 * k + 5),
        exact_u=case.u, exact_p=case.p, label=f"{case.name}/model")


def tangential_instance(case: ExactCase, mesh: PolyMesh, k: int) -> ProblemInstance:
    """Reduction of the div-curl system with prescribed tangential trace.

    The curl data (curl u) enters through its analytic curl on the right
    hand side, the identity tensor replaces kappa, and the exact multiplier
    is zero.  Catalog cases are built with kappa = I, so curl_kcurl_u is the
    required curl of the curl data.
    """
    return ProblemInstance(
        mesh=mesh, k=k, mu=case.mu_of_cell, kappa=None,
        g=case.curl_kcurl_u, f=case.f, xi=case.u,
        beta=case.beta(mesh, degree=2 * k + 5),
        exact_u=case.u, exact_p=_zeros, label=f"{case.name}/tangential")


def normal_saddle_instance(case: ExactCase, mesh: PolyMesh, k: int) -> ProblemInstance:
    """Reduction of the div-curl system with prescribed normal flux.

    Seeks the vector potential of the solenoidal part: kappa = mu^{-1},
    right-hand side is the prescribed curl field, homogeneous tangential
    data, zero divergence and zero cavity fluxes.  The discrete field is a
    potential, not case.u, so no exact pair is attached.
    """
    kappa = lambda center: np.linalg.inv(case.mu_of_cell(center))
    m = mesh.n_components - 1
    return ProblemInstance(
        mesh=mesh, k=k, mu=case.mu_of_cell, kappa=kappa,
        g=case.curl_u, f=None, xi=None, beta=np.zeros(m),
        label=f"{case.name}/normal-saddle")


def build_space(inst: ProblemInstance, data_degree=None) -> WGSpace:
    return WGSpace(inst.mesh, inst.k, mu=inst.mu, kappa=inst.kappa,
                   data_degree=data_degree)


def solve_instance(inst: ProblemInstance, tol: float = 1e-10,
                   data_degree=None, method: str = "auto"):
    """Assemble and solve an instance; returns (space, solution)."""
    space = build_space(inst, data_degree=data_degree)
    system = assemble(space, g=inst.g, f=inst.f, xi=inst.xi, beta=inst.beta)
    return space, solve(system, tol=tol, method=method)
