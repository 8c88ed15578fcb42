"""Polynomial bases on cells and faces, quadrature on polyhedra, L2 projections.

Cell bases are scaled monomials ((x - x_T)/h_T)^alpha centered at the cell
centroid; face bases are 2D scaled monomials in face-plane coordinates along
the deterministic face frame.  Quadrature on a polyhedron maps a conical
Gauss-Jacobi simplex rule onto every centroid-fan tetrahedron (triangle on
faces), so all weights are positive and any requested exactness degree is
available.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import roots_jacobi

from .mesh import MeshError, PolyMesh, _face_fan_triangles, frame_from_normal


def n_monomials(dim: int, degree: int) -> int:
    return math.comb(degree + dim, dim)


def monomial_powers(dim: int, degree: int) -> np.ndarray:
    """Exponent multi-indices with |alpha| <= degree, ordered by total degree
    then lexicographically.  The degree-(d-1) set is a prefix of the degree-d
    set, so lower-degree spaces are leading sub-blocks."""
    out = []
    if dim == 2:
        for d in range(degree + 1):
            for a in range(d + 1):
                out.append((a, d - a))
    elif dim == 3:
        for d in range(degree + 1):
            for a in range(d + 1):
                for b in range(d - a + 1):
                    out.append((a, b, d - a - b))
    else:
        raise ValueError("dim must be 2 or 3")
    return np.array(out, dtype=int)


# ---------------------------------------------------------------------------
# quadrature

@dataclass
class QuadRule:
    """Positive-weight quadrature with stated polynomial exactness degree."""
    points: np.ndarray
    weights: np.ndarray
    degree: int


def _gauss_jacobi01(n: int, alpha: int):
    """Nodes/weights for int_0^1 (1-x)^alpha f(x) dx with f poly deg <= 2n-1."""
    x, w = roots_jacobi(n, alpha, 0.0)
    return (x + 1.0) / 2.0, w * 0.5 ** (alpha + 1)


_SIMPLEX_CACHE: dict = {}


def simplex_rule(dim: int, degree: int) -> QuadRule:
    """Conical-product rule on the reference unit simplex, exact to `degree`."""
    degree = max(degree, 0)
    key = (dim, degree)
    if key in _SIMPLEX_CACHE:
        return _SIMPLEX_CACHE[key]
    n1 = (degree + 2) // 2  # ceil((degree+1)/2)
    if dim == 2:
        xi, wx = _gauss_jacobi01(n1, 1)
        et, we = _gauss_jacobi01(n1, 0)
        X, E = np.meshgrid(xi, et, indexing="ij")
        pts = np.column_stack([X.ravel(), (E * (1 - X)).ravel()])
        wts = np.outer(wx, we).ravel()
    elif dim == 3:
        xi, wx = _gauss_jacobi01(n1, 2)
        et, we = _gauss_jacobi01(n1, 1)
        ze, wz = _gauss_jacobi01(n1, 0)
        X, E, Z = np.meshgrid(xi, et, ze, indexing="ij")
        pts = np.column_stack([
            X.ravel(),
            (E * (1 - X)).ravel(),
            (Z * (1 - X) * (1 - E)).ravel(),
        ])
        wts = (wx[:, None, None] * we[None, :, None] * wz[None, None, :]).ravel()
    else:
        raise ValueError("dim must be 2 or 3")
    rule = QuadRule(pts, wts, degree)
    _SIMPLEX_CACHE[key] = rule
    return rule


def cell_quadrature(mesh: PolyMesh, c: int, degree: int) -> QuadRule:
    """Quadrature on cell c exact for polynomials of total degree <= degree,
    built by mapping a simplex rule onto each centroid-fan tetrahedron."""
    base = simplex_rule(3, degree)
    apex = mesh.cell_centroids[c]
    pts, wts = [], []
    for f, s in zip(mesh.cell_faces[c], mesh.cell_signs[c]):
        for a, b, cc in _face_fan_triangles(mesh, f, int(s)):
            B = np.stack([a - apex, b - apex, cc - apex])
            det = np.linalg.det(B)
            if det <= 0.0:
                raise MeshError(
                    f"cell {c}: not star-shaped w.r.t. centroid (face {f})")
            pts.append(apex + base.points @ B)
            wts.append(base.weights * det)
    return QuadRule(np.vstack(pts), np.concatenate(wts), degree)


def face_quadrature(mesh: PolyMesh, f: int, degree: int) -> QuadRule:
    """Quadrature on face f via centroid-fan triangles."""
    base = simplex_rule(2, degree)
    n = mesh.face_normals[f]
    pts, wts = [], []
    for c0, a, b in _face_fan_triangles(mesh, f, 1):
        cr = np.cross(a - c0, b - c0)
        twice_area = np.dot(cr, n)
        if twice_area <= 0.0:
            raise MeshError(f"face {f}: not star-shaped w.r.t. centroid")
        pts.append(c0 + np.outer(base.points[:, 0], a - c0)
                   + np.outer(base.points[:, 1], b - c0))
        wts.append(base.weights * twice_area)
    return QuadRule(np.vstack(pts), np.concatenate(wts), degree)


# ---------------------------------------------------------------------------
# bases

def _mono_eval(scaled: np.ndarray, powers: np.ndarray) -> np.ndarray:
    # scaled: (npts, dim); result (npts, nb)
    return np.prod(scaled[:, None, :] ** powers[None, :, :], axis=2)


class CellBasis:
    """Scaled monomial basis of P_degree on one cell.

    The mass (Gram) matrix is computed under the supplied cell quadrature
    and Cholesky-factored once; projections onto any sub-degree reuse the
    leading block.
    """

    def __init__(self, degree: int, center, scale: float, quad: QuadRule):
        self.degree = degree
        self.center = np.asarray(center, dtype=float)
        self.scale = float(scale)
        self.powers = monomial_powers(3, degree)
        self.dim = len(self.powers)
        V = self.eval(quad.points)
        M = (V * quad.weights[:, None]).T @ V
        self.mass = 0.5 * (M + M.T)
        self.mass_cond = float(np.linalg.cond(self.mass))
        self._factors = {self.dim: cho_factor(self.mass)}

    def eval(self, points) -> np.ndarray:
        scaled = (np.asarray(points) - self.center) / self.scale
        return _mono_eval(scaled, self.powers)

    def grad(self, points) -> np.ndarray:
        """Gradients, shape (npts, nb, 3)."""
        pts = np.asarray(points)
        scaled = (pts - self.center) / self.scale
        out = np.zeros((len(pts), self.dim, 3))
        for d in range(3):
            p = self.powers.copy()
            mask = p[:, d] > 0
            if not mask.any():
                continue
            pd = p[mask].copy()
            coef = pd[:, d].astype(float)
            pd[:, d] -= 1
            out[:, mask, d] = coef * _mono_eval(scaled, pd) / self.scale
        return out

    def _factor(self, nb: int):
        if nb not in self._factors:
            self._factors[nb] = cho_factor(self.mass[:nb, :nb])
        return self._factors[nb]

    def project(self, values, quad: QuadRule, degree=None) -> np.ndarray:
        """L2-project point values onto P_degree' (default: full degree).

        `values` has shape (npts,) or (npts, m); returns (nb',) or (m, nb').
        """
        nb = self.dim if degree is None else n_monomials(3, degree)
        V = self.eval(quad.points)[:, :nb]
        vals = np.asarray(values, dtype=float)
        b = (V * quad.weights[:, None]).T @ vals
        coeff = cho_solve(self._factor(nb), b)
        return coeff.T if vals.ndim == 2 else coeff


class FaceBasis:
    """2D scaled monomial basis of P_degree on one planar face.

    Coordinates are (t1, t2)-components of (x - centroid)/diameter in the
    deterministic face frame; vector face functions carry three blocks of
    these scalars along (n, t1, t2).
    """

    def __init__(self, degree: int, centroid, normal, diameter: float,
                 quad: QuadRule):
        self.degree = degree
        self.centroid = np.asarray(centroid, dtype=float)
        self.frame = frame_from_normal(normal)     # (n, t1, t2)
        self.scale = float(diameter)
        self.powers = monomial_powers(2, degree)
        self.dim = len(self.powers)
        V = self.eval(quad.points)
        M = (V * quad.weights[:, None]).T @ V
        self.mass = 0.5 * (M + M.T)
        self._factor = cho_factor(self.mass)
        # integrals of the basis monomials over the face
        self.integrals = quad.weights @ V

    def eval(self, points) -> np.ndarray:
        rel = np.asarray(points) - self.centroid
        _, t1, t2 = self.frame
        scaled = np.column_stack([rel @ t1, rel @ t2]) / self.scale
        return _mono_eval(scaled, self.powers)

    def project(self, values, quad: QuadRule) -> np.ndarray:
        """L2-project point values (npts,) or (npts, m) onto the face basis."""
        V = self.eval(quad.points)
        vals = np.asarray(values, dtype=float)
        b = (V * quad.weights[:, None]).T @ vals
        coeff = cho_solve(self._factor, b)
        return coeff.T if vals.ndim == 2 else coeff


def l2_project_cell(field, degree: int, basis: CellBasis, quad: QuadRule):
    """Project a callable field (points -> values) onto P_degree of the cell."""
    return basis.project(field(quad.points), quad, degree=degree)


def l2_project_face(field, basis: FaceBasis, quad: QuadRule):
    """Facewise L2 projection of a callable field onto P_degree(e)."""
    return basis.project(field(quad.points), quad)
