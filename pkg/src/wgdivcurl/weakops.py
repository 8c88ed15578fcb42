"""Element-local discrete weak divergence and weak curl operators.

For a cell T with local unknowns {v_0, v_b} (interior vector polynomial of
degree k plus one vector polynomial per face, stored in the face frame
(n, t1, t2)), the weak divergence of mu*v is the unique w in P_{k-1}(T) with

    (w, q)_T = -(mu v_0, grad q)_T + <v_b . n, q>_dT     for all q,

and the weak curl is the unique w in [P_{k-1}(T)]^3 with

    (w, q)_T = (v_0, curl q)_T - <v_b x n, q>_dT         for all q.

Both are precomputed as matrices acting on the local DoF vector, together
with the curl energy (kappa-weighted) and the face stabilizer penalizing
(mu v_0 - v_b) . n and (v_0 - v_b) x n on the cell boundary.

Local DoF order: interior component-major blocks (3 * dim P_k), then per
face three frame blocks (n, t1, t2) of dim P_k(e) each.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .polybasis import CellBasis, QuadRule, n_monomials

_EYE3 = np.eye(3)


@dataclass
class LocalOperators:
    """Per-cell operator matrices over the local DoF vector."""
    ndof: int
    n_int: int                 # 3 * dim P_k
    div_moments: np.ndarray    # (np, ndof): q-moments of the weak divergence
    div_op: np.ndarray         # (np, ndof): coefficients of weak div in P_{k-1}
    curl_op: np.ndarray        # (3, np, ndof): coefficients of weak curl
    curl_energy: np.ndarray    # (ndof, ndof): kappa-weighted curl-curl form
    stab: np.ndarray           # (ndof, ndof): stabilizer, h_T^{-1} included
    mass_sub: np.ndarray       # (np, np): P_{k-1} scalar mass matrix
    mu: np.ndarray             # 3x3 cell tensor
    kappa: np.ndarray          # 3x3 cell tensor


def build_local_operators(k: int, h_T: float, mu: np.ndarray, kappa: np.ndarray,
                          cell_basis: CellBasis, cell_quad: QuadRule,
                          faces) -> LocalOperators:
    """Assemble the local operator matrices of one cell.

    `faces` lists (face_basis, face_quad, sign) per cell face, sign being +1
    when the stored face normal is outward for this cell.
    """
    nb = cell_basis.dim
    np_ = n_monomials(3, k - 1)
    nfb = faces[0][0].dim
    n_int = 3 * nb
    ndof = n_int + 3 * nfb * len(faces)

    W = cell_quad.weights
    V = cell_basis.eval(cell_quad.points)           # (nq, nb)
    G = cell_basis.grad(cell_quad.points)[:, :np_]  # (nq, np, 3)

    div_m = np.zeros((np_, ndof))
    curl_m = np.zeros((3, np_, ndof))

    # interior columns: -(mu v_0, grad q)_T and (v_0, curl q)_T
    muG = G @ mu                                    # (nq, np, 3)
    div_m[:, :n_int] = -np.einsum("q,qj,qic->icj", W, V, muG).reshape(np_, n_int)
    for a in range(3):
        # curl(q e_a) = grad q x e_a
        cr = np.cross(G, _EYE3[a])                  # (nq, np, 3)
        curl_m[a][:, :n_int] = np.einsum("q,qj,qic->icj", W, V, cr).reshape(np_, n_int)

    # face columns: <v_b . n, q>_dT and -<v_b x n, q>_dT
    off = n_int
    for face_basis, face_quad, sign in faces:
        F = face_basis.eval(face_quad.points)               # (nqf, nfb)
        Vc = cell_basis.eval(face_quad.points)[:, :np_]     # (nqf, np)
        FI = (Vc * face_quad.weights[:, None]).T @ F        # (np, nfb)
        _, t1, t2 = face_basis.frame
        div_m[:, off:off + nfb] = sign * FI
        # v_b x n = -(t1-block) t2 + (t2-block) t1
        for a in range(3):
            curl_m[a][:, off + nfb:off + 2 * nfb] = sign * t2[a] * FI
            curl_m[a][:, off + 2 * nfb:off + 3 * nfb] = -sign * t1[a] * FI
        off += 3 * nfb

    M_sub = cell_basis.mass[:np_, :np_]
    fac = cho_factor(M_sub)
    div_op = cho_solve(fac, div_m)
    curl_op = np.stack([cho_solve(fac, curl_m[a]) for a in range(3)])

    energy = np.zeros((ndof, ndof))
    for a in range(3):
        for b in range(3):
            if kappa[a, b] != 0.0:
                energy += kappa[a, b] * curl_op[b].T @ M_sub @ curl_op[a]
    energy = 0.5 * (energy + energy.T)

    stab = _stabilizer_matrix(h_T, mu, cell_basis, faces, nb, nfb, n_int, ndof)
    return LocalOperators(ndof=ndof, n_int=n_int, div_moments=div_m,
                          div_op=div_op, curl_op=curl_op, curl_energy=energy,
                          stab=stab, mass_sub=M_sub, mu=mu, kappa=kappa)


def _stabilizer_matrix(h_T, mu, cell_basis, faces, nb, nfb, n_int, ndof):
    S = np.zeros((ndof, ndof))
    off = n_int
    for face_basis, face_quad, sign in faces:
        nq = len(face_quad.weights)
        n, t1, t2 = face_basis.frame
        Vf = cell_basis.eval(face_quad.points)     # (nq, nb)
        F = face_basis.eval(face_quad.points)      # (nq, nfb)
        mun = mu @ n

        # normal part: (mu v_0 - v_b) . n, a scalar per quad point
        N = np.zeros((nq, ndof))
        for c in range(3):
            N[:, c * nb:(c + 1) * nb] = mun[c] * Vf
        N[:, off:off + nfb] = -F

        # tangential part: (v_0 - v_b) x n, a 3-vector per quad point
        Tm = np.zeros((nq, 3, ndof))
        for c in range(3):
            exn = np.cross(_EYE3[c], n)
            Tm[:, :, c * nb:(c + 1) * nb] = exn[None, :, None] * Vf[:, None, :]
        Tm[:, :, off + nfb:off + 2 * nfb] = t2[None, :, None] * F[:, None, :]
        Tm[:, :, off + 2 * nfb:off + 3 * nfb] = -t1[None, :, None] * F[:, None, :]

        w = face_quad.weights
        S += (N * w[:, None]).T @ N
        S += np.einsum("q,qai,qaj->ij", w, Tm, Tm)
        off += 3 * nfb
    S /= h_T
    return 0.5 * (S + S.T)


def weak_divergence(ops: LocalOperators, v_local: np.ndarray) -> np.ndarray:
    """Coefficients of the weak divergence of mu*v in P_{k-1}(T)."""
    return ops.div_op @ v_local


def weak_curl(ops: LocalOperators, v_local: np.ndarray) -> np.ndarray:
    """Coefficients of the weak curl of v in [P_{k-1}(T)]^3, shape (3, np)."""
    return ops.curl_op @ v_local
